//! Periodic box discretization, spectral transforms, convolution and norms.
//!
//! The box is `[-L/2, L/2)^d` sampled at `n` points per axis. Spectral
//! coefficients follow the continuum convention `f^(xi) = ∫ f(x) e^{-2πi x·xi} dx`,
//! approximated by the Riemann sum with weight `h^d`, so a coefficient does not
//! depend on the resolution once the field is resolved.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::TensorFft;

/// Fraction of the box width, measured inward from each face, that counts as
/// the boundary shell for wrap-around monitoring.
pub const BOUNDARY_SHELL: f64 = 0.1;

/// Default tolerated probability inside the boundary shell.
pub const DEFAULT_BOUNDARY_THRESHOLD: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct Grid {
    dim: usize,
    points: usize,
    length: f64,
    spacing: f64,
    fft: TensorFft,
    /// `|xi|^2` per flat index, FFT ordering.
    xi_squared: Vec<f64>,
    /// Parity of `sum_a k_a` per flat index; the sign `(-1)^k` shifts the
    /// DFT origin to the box corner `-L/2`.
    odd: Vec<bool>,
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.points == other.points && self.length == other.length
    }
}

/// Builds a grid with `points_per_axis` samples per axis on a box of side `box_length`.
pub fn make_grid(dim: usize, points_per_axis: usize, box_length: f64) -> Result<Arc<Grid>> {
    Grid::new(dim, points_per_axis, box_length).map(Arc::new)
}

impl Grid {
    pub fn new(dim: usize, points: usize, length: f64) -> Result<Grid> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!(
                "dim must be 1, 2 or 3, got {dim}"
            )));
        }
        if points < 8 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be a power of two >= 8, got {points}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "box length must be positive, got {length}"
            )));
        }
        let total = points.pow(dim as u32);
        let mut xi_squared = Vec::with_capacity(total);
        let mut odd = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        for flat in 0..total {
            unflatten(flat, points, &mut idx);
            let mut s = 0.0;
            let mut parity = 0usize;
            for &k in &idx {
                let xi = mode_number(k, points) as f64 / length;
                s += xi * xi;
                parity += k;
            }
            xi_squared.push(s);
            odd.push(parity % 2 == 1);
        }
        Ok(Grid {
            dim,
            points,
            length,
            spacing: length / points as f64,
            fft: TensorFft::new(points),
            xi_squared,
            odd,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_axis(&self) -> usize {
        self.points
    }

    pub fn box_length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total number of grid points, `n^d`.
    pub fn len(&self) -> usize {
        self.xi_squared.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight `h^d` of a single cell.
    pub fn cell_volume(&self) -> f64 {
        self.spacing.powi(self.dim as i32)
    }

    pub fn volume(&self) -> f64 {
        self.length.powi(self.dim as i32)
    }

    /// Coordinate of sample `i` along one axis.
    ///
    /// Computed as `(i - n/2) h` so that mirrored samples are exact negatives.
    pub fn coordinate(&self, i: usize) -> f64 {
        (i as f64 - (self.points / 2) as f64) * self.spacing
    }

    /// Coordinates of the flat index `flat`; only the first `dim` entries are used.
    pub fn point(&self, flat: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            out[a] = self.coordinate(rest % self.points);
            rest /= self.points;
        }
        out
    }

    /// Flat index of the multi-index `idx` (row-major, first axis slowest).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().fold(0, |acc, &i| acc * self.points + i)
    }

    /// Flat index of the sample at the origin.
    pub fn origin_index(&self) -> usize {
        self.flat_index(&vec![self.points / 2; self.dim])
    }

    /// Flat spectral index of the integer mode `k` (each entry in `[-n/2, n/2)`).
    pub fn mode_index(&self, k: &[i64]) -> usize {
        let n = self.points as i64;
        k.iter()
            .fold(0, |acc, &m| acc * self.points + m.rem_euclid(n) as usize)
    }

    pub fn frequency(&self, flat: usize) -> [f64; 3] {
        let mut out = [0.0; 3];
        let mut rest = flat;
        for a in (0..self.dim).rev() {
            out[a] = mode_number(rest % self.points, self.points) as f64 / self.length;
            rest /= self.points;
        }
        out
    }

    /// All lattice frequencies `xi_k = k / L`, in FFT ordering.
    pub fn frequency_lattice(&self) -> Vec<Vec<f64>> {
        (0..self.len())
            .map(|i| self.frequency(i)[..self.dim].to_vec())
            .collect()
    }

    /// `|xi|^2` per spectral index.
    pub fn xi_squared(&self) -> &[f64] {
        &self.xi_squared
    }

    pub(crate) fn fft(&self) -> &TensorFft {
        &self.fft
    }

    /// Whether flat index `flat` lies within the boundary shell of the box.
    pub fn in_boundary_shell(&self, flat: usize) -> bool {
        let limit = (0.5 - BOUNDARY_SHELL) * self.length;
        self.point(flat)[..self.dim]
            .iter()
            .any(|x| x.abs() >= limit)
    }
}

fn unflatten(mut flat: usize, n: usize, out: &mut [usize]) {
    for a in (0..out.len()).rev() {
        out[a] = flat % n;
        flat /= n;
    }
}

/// Signed mode number of FFT bin `k` in the centered range `[-n/2, n/2)`.
pub(crate) fn mode_number(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// A complex function sampled on a [`Grid`].
#[derive(Debug, Clone)]
pub struct Field {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Arc<Grid>) -> Field {
        Field {
            grid: grid.clone(),
            values: vec![Complex64::default(); grid.len()],
        }
    }

    /// Samples `f` at every grid point; the closure receives a `dim`-length slice.
    pub fn from_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> Complex64) -> Field {
        let d = grid.dim();
        let values = (0..grid.len()).map(|i| f(&grid.point(i)[..d])).collect();
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_real_fn(grid: &Arc<Grid>, f: impl Fn(&[f64]) -> f64) -> Field {
        Field::from_fn(grid, |x| Complex64::new(f(x), 0.0))
    }

    /// Wraps raw samples, checking length and finiteness.
    pub fn from_values(grid: &Arc<Grid>, values: Vec<Complex64>) -> Result<Field> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "expected {} samples, got {}",
                grid.len(),
                values.len()
            )));
        }
        if let Some(index) = values
            .iter()
            .position(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::NonFinite { index });
        }
        Ok(Field {
            grid: grid.clone(),
            values,
        })
    }

    pub(crate) fn from_values_unchecked(grid: &Arc<Grid>, values: Vec<Complex64>) -> Field {
        debug_assert_eq!(values.len(), grid.len());
        Field {
            grid: grid.clone(),
            values,
        }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn same_grid(&self, other: &Field) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    fn check_grid(&self, other: &Field) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// `L^2` inner product `∫ conj(self) other`.
    pub fn inner(&self, other: &Field) -> Result<Complex64> {
        self.check_grid(other)?;
        let s: Complex64 = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum();
        Ok(s * self.grid.cell_volume())
    }

    pub fn sub(&self, other: &Field) -> Result<Field> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Field::from_values_unchecked(&self.grid, values))
    }

    pub fn scaled(&self, c: Complex64) -> Field {
        Field::from_values_unchecked(&self.grid, self.values.iter().map(|v| v * c).collect())
    }

    /// Returns a copy with unit `L^2` norm.
    pub fn normalized(&self) -> Result<Field> {
        let l2 = norm(self, Norm::L2);
        if l2 == 0.0 {
            return Err(Error::InvalidArgument(
                "cannot normalize the zero field".into(),
            ));
        }
        Ok(self.scaled(Complex64::new(1.0 / l2, 0.0)))
    }

    /// `|f|^2` as a real vector.
    pub fn density(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm_sqr()).collect()
    }

    /// Largest `|Im f|` over the grid.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    /// Probability `∫ |f|^2` inside the boundary shell.
    pub fn boundary_mass(&self) -> f64 {
        let w = self.grid.cell_volume();
        self.values
            .iter()
            .enumerate()
            .filter(|(i, _)| self.grid.in_boundary_shell(*i))
            .map(|(_, v)| v.norm_sqr())
            .sum::<f64>()
            * w
    }
}

/// Spectral coefficients of a [`Field`], stored in FFT ordering.
#[derive(Debug, Clone)]
pub struct Spectrum {
    grid: Arc<Grid>,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    /// Coefficient at the integer mode `k`, i.e. at `xi = k / L`.
    pub fn at_mode(&self, k: &[i64]) -> Complex64 {
        self.values[self.grid.mode_index(k)]
    }

    /// Spectral `l^2` norm, `sqrt(L^-d sum |c_k|^2)`, equal to the `L^2` norm by Plancherel.
    pub fn l2(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() / self.grid.volume()).sqrt()
    }
}

/// Continuum-scaled forward transform.
pub fn transform_forward(f: &Field) -> Spectrum {
    let grid = &f.grid;
    let mut values = f.values.clone();
    grid.fft().forward(&mut values, grid.dim());
    let w = grid.cell_volume();
    for (v, &odd) in values.iter_mut().zip(&grid.odd) {
        *v *= if odd { -w } else { w };
    }
    Spectrum {
        grid: grid.clone(),
        values,
    }
}

/// Inverse of [`transform_forward`].
pub fn transform_inverse(s: &Spectrum) -> Field {
    let grid = &s.grid;
    let inv = 1.0 / grid.volume();
    let mut values: Vec<Complex64> = s
        .values
        .iter()
        .zip(&grid.odd)
        .map(|(v, &odd)| v * if odd { -inv } else { inv })
        .collect();
    grid.fft().inverse(&mut values, grid.dim());
    Field {
        grid: grid.clone(),
        values,
    }
}

/// Multiplies the spectrum of `values` by `multiplier` in place.
///
/// Equivalent to `transform_inverse(m * transform_forward(f))` but skips the
/// origin sign and continuum scaling, which cancel.
pub(crate) fn apply_fourier_multiplier(
    grid: &Grid,
    values: &mut [Complex64],
    multiplier: &[Complex64],
) {
    grid.fft().forward(values, grid.dim());
    let inv = 1.0 / grid.len() as f64;
    for (v, m) in values.iter_mut().zip(multiplier) {
        *v *= m * inv;
    }
    grid.fft().inverse(values, grid.dim());
}

/// Periodic convolution `(f * g)(x) = ∫ f(y) g(x - y) dy`, evaluated spectrally.
pub fn convolve(f: &Field, g: &Field) -> Result<Field> {
    f.check_grid(g)?;
    let fs = transform_forward(f);
    let mut gs = transform_forward(g);
    for (a, b) in gs.values.iter_mut().zip(&fs.values) {
        *a *= b;
    }
    Ok(transform_inverse(&gs))
}

/// Convolution against a kernel whose spectrum was computed once up front.
pub(crate) fn convolve_with_spectrum(
    f_values: &[Complex64],
    grid: &Grid,
    kernel: &[Complex64],
) -> Vec<Complex64> {
    let mut values = f_values.to_vec();
    grid.fft().forward(&mut values, grid.dim());
    let scale = grid.cell_volume() / grid.volume();
    // The origin signs of forward(f) and of the inverse cancel; the one
    // carried by the kernel spectrum stays.
    for (v, k) in values.iter_mut().zip(kernel) {
        *v *= k * scale;
    }
    grid.fft().inverse(&mut values, grid.dim());
    values
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
    Linf,
    /// `‖(1 + 4π²|xi|²) f^‖`, computed spectrally.
    H2,
}

pub fn norm(f: &Field, kind: Norm) -> f64 {
    let w = f.grid.cell_volume();
    match kind {
        Norm::L1 => f.values.iter().map(|v| v.norm()).sum::<f64>() * w,
        Norm::L2 => (f.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * w).sqrt(),
        Norm::Linf => f.values.iter().fold(0.0, |m, v| m.max(v.norm())),
        Norm::H2 => {
            let s = transform_forward(f);
            let sum: f64 = s
                .values
                .iter()
                .zip(f.grid.xi_squared())
                .map(|(c, &x2)| (c * (1.0 + 4.0 * PI * PI * x2)).norm_sqr())
                .sum();
            (sum / f.grid.volume()).sqrt()
        }
    }
}
