//! External potentials `V`, pair interactions `w`, the `N`-dependent scaling
//! `w_N(x) = N^{dβ} w(N^β x)`, and the admissibility checks applied to them.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{convolve, Field, Grid};

/// Upper bound (exclusive) on the scaling exponent `β`.
pub const BETA_LIMIT: f64 = 1.0 / 3.0;

/// Threshold for `∬ |V(x)||V(y)| / |x-y|^2`.
pub const ROLLNIK_THRESHOLD: f64 = 16.0 * PI * PI;

/// Threshold for `sup_x ∫ |V(y)| / |x-y| dy`.
pub const GLOBAL_KATO_THRESHOLD: f64 = 4.0 * PI;

/// A scaled kernel narrower than this many grid spacings is under-resolved.
pub const MIN_RESOLVED_SPACINGS: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialFamily {
    Zero,
    /// `A exp(-r²/s²)`
    GaussianBump,
    /// `A sech²(r/s)`
    SechSquaredWell,
    /// `A cos²(π r / 2s)` for `r < s`, zero outside.
    CosineBump,
}

/// A bounded external potential with bounded first and second derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub family: PotentialFamily,
    #[serde(default)]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    /// Empty means the origin.
    #[serde(default)]
    pub center: Vec<f64>,
}

fn one() -> f64 {
    1.0
}

impl PotentialSpec {
    pub fn zero() -> Self {
        PotentialSpec {
            family: PotentialFamily::Zero,
            amplitude: 0.0,
            width: 1.0,
            center: Vec::new(),
        }
    }

    pub fn new(family: PotentialFamily, amplitude: f64, width: f64) -> Self {
        PotentialSpec {
            family,
            amplitude,
            width,
            center: Vec::new(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidArgument(
                "potential amplitude must be finite".into(),
            ));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidArgument(
                "potential width must be positive".into(),
            ));
        }
        if !self.center.is_empty() && self.center.len() != dim {
            return Err(Error::InvalidArgument(format!(
                "potential center has {} components, grid has dim {dim}",
                self.center.len()
            )));
        }
        Ok(())
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                let c = self.center.get(i).copied().unwrap_or(0.0);
                (xi - c) * (xi - c)
            })
            .sum();
        let r = r2.sqrt();
        let a = self.amplitude;
        let s = self.width;
        match self.family {
            PotentialFamily::Zero => 0.0,
            PotentialFamily::GaussianBump => a * (-r2 / (s * s)).exp(),
            PotentialFamily::SechSquaredWell => {
                let c = (r / s).cosh();
                a / (c * c)
            }
            PotentialFamily::CosineBump => {
                if r < s {
                    let c = (0.5 * PI * r / s).cos();
                    a * c * c
                } else {
                    0.0
                }
            }
        }
    }
}

/// A sampled potential together with the sup norms of its discrete derivatives.
#[derive(Debug, Clone)]
pub struct SampledPotential {
    pub field: Field,
    pub sup: f64,
    pub sup_gradient: f64,
    pub sup_hessian: f64,
}

pub fn sample_potential(spec: &PotentialSpec, grid: &Arc<Grid>) -> Result<SampledPotential> {
    spec.validate(grid.dim())?;
    let field = Field::from_real_fn(grid, |x| spec.eval(x));
    let values: Vec<f64> = field.values().iter().map(|v| v.re).collect();
    let (sup_gradient, sup_hessian) = derivative_sups(grid, &values);
    let sup = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    Ok(SampledPotential {
        field,
        sup,
        sup_gradient,
        sup_hessian,
    })
}

/// Sup norms of the periodic central-difference gradient and second differences.
fn derivative_sups(grid: &Grid, values: &[f64]) -> (f64, f64) {
    let n = grid.points_per_axis();
    let d = grid.dim();
    let h = grid.spacing();
    let mut sup_g = 0.0f64;
    let mut sup_h = 0.0f64;
    for flat in 0..values.len() {
        let mut grad2 = 0.0;
        for axis in 0..d {
            let stride = n.pow((d - 1 - axis) as u32);
            let i = (flat / stride) % n;
            let up = flat - i * stride + ((i + 1) % n) * stride;
            let down = flat - i * stride + ((i + n - 1) % n) * stride;
            let g = (values[up] - values[down]) / (2.0 * h);
            grad2 += g * g;
            let second = (values[up] - 2.0 * values[flat] + values[down]) / (h * h);
            sup_h = sup_h.max(second.abs());
        }
        sup_g = sup_g.max(grad2.sqrt());
    }
    (sup_g, sup_h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionFamily {
    /// `A exp(-|z|²/s²)`
    Gaussian,
    /// `A exp(1 - 1/(1 - |z|²/s²))` for `|z| < s`, zero outside.
    CompactBump,
    /// Unit-mass Gaussian of width `s` scaled by `A`, so `∫ w = A`.
    DeltaLimit,
    /// `A (1 + |z|²/s²)^{-γ/2}`, a power-law tail with exponent `γ`.
    Algebraic,
}

/// An even, real pair interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InteractionSpec {
    pub family: InteractionFamily,
    #[serde(default = "one")]
    pub amplitude: f64,
    #[serde(default = "one")]
    pub width: f64,
    /// `γ` in `|w(z)| <= C_w |z|^{-γ}` for `|z| >= 1`; may be infinite.
    #[serde(default = "default_decay_exponent")]
    pub decay_exponent: f64,
    #[serde(default = "one")]
    pub decay_constant: f64,
}

fn default_decay_exponent() -> f64 {
    6.0
}

impl InteractionSpec {
    pub fn new(family: InteractionFamily, amplitude: f64, width: f64) -> Self {
        InteractionSpec {
            family,
            amplitude,
            width,
            decay_exponent: 6.0,
            decay_constant: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidArgument(
                "interaction amplitude must be finite".into(),
            ));
        }
        if !(self.width.is_finite() && self.width > 0.0) {
            return Err(Error::InvalidArgument(
                "interaction width must be positive".into(),
            ));
        }
        if !(self.decay_exponent > 3.0) {
            return Err(Error::InvalidArgument(
                "decay exponent must satisfy gamma > 3".into(),
            ));
        }
        if !(self.decay_constant > 0.0) {
            return Err(Error::InvalidArgument(
                "decay constant must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Value at distance `r` in dimension `dim`.
    pub fn radial(&self, r: f64, dim: usize) -> f64 {
        let a = self.amplitude;
        let s = self.width;
        let q = (r / s) * (r / s);
        match self.family {
            InteractionFamily::Gaussian => a * (-q).exp(),
            InteractionFamily::CompactBump => {
                if q < 1.0 {
                    a * (1.0 - 1.0 / (1.0 - q)).exp()
                } else {
                    0.0
                }
            }
            InteractionFamily::DeltaLimit => a * (PI * s * s).powf(-0.5 * dim as f64) * (-q).exp(),
            InteractionFamily::Algebraic => a * (1.0 + q).powf(-0.5 * self.decay_exponent),
        }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        let r = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.radial(r, z.len())
    }

    /// `∫ w` in closed form.
    pub fn integral(&self, dim: usize) -> Option<f64> {
        let s = self.width;
        match self.family {
            InteractionFamily::Gaussian => {
                Some(self.amplitude * (PI * s * s).powf(0.5 * dim as f64))
            }
            InteractionFamily::DeltaLimit => Some(self.amplitude),
            _ => None,
        }
    }
}

/// Samples the unscaled kernel `w` on `grid`.
pub fn sample_interaction(spec: &InteractionSpec, grid: &Arc<Grid>) -> Result<Field> {
    spec.validate()?;
    Ok(Field::from_real_fn(grid, |z| spec.eval(z)))
}

/// Width of `w_N` relative to `w`.
pub fn scaled_width(spec: &InteractionSpec, particles: u64, beta: f64) -> f64 {
    spec.width * (particles as f64).powf(-beta)
}

pub fn check_beta(beta: f64) -> Result<()> {
    if !(0.0..BETA_LIMIT).contains(&beta) {
        return Err(Error::InvalidArgument(format!(
            "beta must satisfy 0 <= beta < 1/3, got {beta}"
        )));
    }
    Ok(())
}

/// Samples `w_N(x) = N^{dβ} w(N^β x)`.
pub fn scaled_interaction(
    spec: &InteractionSpec,
    particles: u64,
    beta: f64,
    grid: &Arc<Grid>,
) -> Result<Field> {
    spec.validate()?;
    check_beta(beta)?;
    if particles == 0 {
        return Err(Error::InvalidArgument(
            "particle number must be positive".into(),
        ));
    }
    let d = grid.dim();
    let stretch = (particles as f64).powf(beta);
    let prefactor = stretch.powi(d as i32);
    if scaled_width(spec, particles, beta) < MIN_RESOLVED_SPACINGS * grid.spacing() {
        log::warn!(
            "scaled interaction width {:.3e} is below {} grid spacings ({:.3e}); kernel under-resolved",
            scaled_width(spec, particles, beta),
            MIN_RESOLVED_SPACINGS,
            grid.spacing()
        );
    }
    Ok(Field::from_real_fn(grid, |z| {
        let mut buf = [0.0; 3];
        for (b, v) in buf.iter_mut().zip(z) {
            *b = stretch * v;
        }
        prefactor * spec.eval(&buf[..d])
    }))
}

/// `∫ |x|² |w(x)| dx` by quadrature.
pub fn second_moment(w: &Field) -> f64 {
    let grid = w.grid();
    let d = grid.dim();
    w.values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = grid.point(i);
            x[..d].iter().map(|c| c * c).sum::<f64>() * v.norm()
        })
        .sum::<f64>()
        * grid.cell_volume()
}

/// Outcome of the Rollnik and global Kato quadratures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollnikReport {
    pub rollnik_integral: f64,
    pub global_kato_integral: f64,
    pub admissible: bool,
}

/// Radius of the ball whose volume equals one grid cell.
fn equal_volume_radius(h: f64) -> f64 {
    (3.0 / (4.0 * PI)).powf(1.0 / 3.0) * h
}

/// Quadrature of the Rollnik integral and of the global Kato norm of `V`.
///
/// Off-diagonal cells are summed with weight `h^6` (resp. `h^3`) through a
/// zero-padded spectral convolution, which makes the sum non-periodic. The
/// singular diagonal cell is replaced by the bound obtained from rearranging the
/// cell into a ball of equal volume: `∫_cell |x-y|^{-2} dy <= 4πR` and
/// `∫_cell |x-y|^{-1} dy <= 2πR²`.
pub fn check_rollnik(spec: &PotentialSpec, grid: &Arc<Grid>) -> Result<RollnikReport> {
    if grid.dim() != 3 {
        return Err(Error::InvalidArgument(format!(
            "Rollnik conditions are defined in dimension 3, grid has dim {}",
            grid.dim()
        )));
    }
    let v = sample_potential(spec, grid)?.field;
    let abs_v: Vec<f64> = v.values().iter().map(|c| c.norm()).collect();
    Ok(rollnik_from_samples(grid, &abs_v))
}

pub(crate) fn rollnik_from_samples(grid: &Arc<Grid>, abs_v: &[f64]) -> RollnikReport {
    let n = grid.points_per_axis();
    let h = grid.spacing();
    let padded = Arc::new(
        Grid::new(3, 2 * n, 2.0 * grid.box_length()).expect("doubling a valid grid stays valid"),
    );
    let offset = n / 2;
    let mut embedded = Field::zeros(&padded);
    for (flat, &val) in abs_v.iter().enumerate() {
        let (i, j, k) = (flat / (n * n), (flat / n) % n, flat % n);
        let p = padded.flat_index(&[i + offset, j + offset, k + offset]);
        embedded.values_mut()[p] = Complex64::new(val, 0.0);
    }
    let kernel = |power: i32| {
        Field::from_real_fn(&padded, |z| {
            let r2: f64 = z.iter().map(|c| c * c).sum();
            if r2 == 0.0 {
                0.0
            } else {
                r2.sqrt().powi(-power)
            }
        })
    };
    let inv_sq = convolve(&embedded, &kernel(2)).expect("same grid");
    let inv = convolve(&embedded, &kernel(1)).expect("same grid");

    let radius = equal_volume_radius(h);
    let cell = grid.cell_volume();
    let mut rollnik = 0.0;
    let mut kato = 0.0f64;
    for (flat, &val) in abs_v.iter().enumerate() {
        let (i, j, k) = (flat / (n * n), (flat / n) % n, flat % n);
        let p = padded.flat_index(&[i + offset, j + offset, k + offset]);
        rollnik += cell * val * (inv_sq.values()[p].re + val * 4.0 * PI * radius);
        kato = kato.max(inv.values()[p].re + val * 2.0 * PI * radius * radius);
    }
    RollnikReport {
        rollnik_integral: rollnik,
        global_kato_integral: kato,
        admissible: rollnik < ROLLNIK_THRESHOLD && kato < GLOBAL_KATO_THRESHOLD,
    }
}

/// Checks `|w(r)| <= C_w r^{-γ}` at `samples` radii spread over `[1, max(1, 10 s)]`.
pub fn check_decay_condition(spec: &InteractionSpec, dim: usize, samples: usize) -> Result<bool> {
    if samples < 100 {
        return Err(Error::InvalidArgument(
            "decay check needs at least 100 samples".into(),
        ));
    }
    let r_max = (10.0 * spec.width).max(1.0);
    Ok(check_decay_profile(
        |r| spec.radial(r, dim),
        spec.decay_exponent,
        spec.decay_constant,
        r_max,
        samples,
    ))
}

/// Checks `|profile(r)| <= c_w r^{-γ}` at `samples` radii in `[1, r_max]`.
pub fn check_decay_profile(
    profile: impl Fn(f64) -> f64,
    gamma: f64,
    c_w: f64,
    r_max: f64,
    samples: usize,
) -> bool {
    let samples = samples.max(2);
    (0..samples).all(|k| {
        let r = 1.0 + (r_max - 1.0) * k as f64 / (samples - 1) as f64;
        let bound = c_w * r.powf(-gamma);
        profile(r).abs() <= bound * (1.0 + 1e-12)
    })
}

/// Coupling constant, scaling exponent and particle number of the `N`-body problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub lambda: f64,
    #[serde(default)]
    pub beta: f64,
    #[serde(default = "default_particles")]
    pub particle_number: u64,
}

fn default_particles() -> u64 {
    1
}

impl CouplingConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda.is_finite() {
            return Err(Error::InvalidArgument("lambda must be finite".into()));
        }
        check_beta(self.beta)?;
        if self.particle_number == 0 {
            return Err(Error::InvalidArgument(
                "particle number must be positive".into(),
            ));
        }
        Ok(())
    }
}
