//! Split-step Fourier evolution of the one-body effective equations
//!
//! ```text
//! i ∂_t u = (-Δ + V) u + λ N[u] u,   N[u] = w * |u|²  or  a |u|²,
//! ```
//!
//! and the decay measurements performed on the resulting trajectories.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    apply_fourier_multiplier, convolve_with_spectrum, norm, transform_forward, Field, Grid, Norm,
    DEFAULT_BOUNDARY_THRESHOLD,
};
use crate::io::csv_string;
use crate::potentials::{scaled_interaction, InteractionSpec};

/// Factor by which `‖u‖_∞` may grow over its initial value before a run is aborted.
pub const BLOW_UP_FACTOR: f64 = 1e6;

/// CSV header of exported trajectory observables.
pub const TRAJECTORY_CSV_HEADER: &str = "t,l2,linf,energy,boundary_mass";

#[derive(Debug, Clone)]
pub enum Nonlinearity {
    /// `(w * |u|²) u` with a fixed kernel.
    Hartree { kernel: Field },
    /// `(w_N * |u|²) u` where `kernel` already holds the sampled `w_N`.
    ScaledHartree {
        kernel: Field,
        particles: u64,
        beta: f64,
    },
    /// `a |u|² u`.
    Cubic { a: f64 },
}

impl Nonlinearity {
    pub fn hartree(kernel: Field) -> Self {
        Nonlinearity::Hartree { kernel }
    }

    pub fn scaled_hartree(
        spec: &InteractionSpec,
        particles: u64,
        beta: f64,
        grid: &Arc<Grid>,
    ) -> Result<Self> {
        let kernel = scaled_interaction(spec, particles, beta, grid)?;
        Ok(Nonlinearity::ScaledHartree {
            kernel,
            particles,
            beta,
        })
    }

    pub fn cubic(a: f64) -> Self {
        Nonlinearity::Cubic { a }
    }

    fn kernel(&self) -> Option<&Field> {
        match self {
            Nonlinearity::Hartree { kernel } | Nonlinearity::ScaledHartree { kernel, .. } => {
                Some(kernel)
            }
            Nonlinearity::Cubic { .. } => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OneBodyProblem {
    grid: Arc<Grid>,
    initial: Field,
    potential: Field,
    nonlinearity: Nonlinearity,
    lambda: f64,
}

impl OneBodyProblem {
    /// Validates that `initial` is normalized, `potential` is real and all
    /// fields share one grid.
    pub fn new(
        initial: Field,
        potential: Field,
        nonlinearity: Nonlinearity,
        lambda: f64,
    ) -> Result<Self> {
        let grid = initial.grid().clone();
        if !initial.same_grid(&potential) {
            return Err(Error::GridMismatch);
        }
        if let Some(k) = nonlinearity.kernel() {
            if !initial.same_grid(k) {
                return Err(Error::GridMismatch);
            }
        }
        let l2 = norm(&initial, Norm::L2);
        if (l2 - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "initial state must have unit L2 norm, got {l2}"
            )));
        }
        if potential.max_imag() > 1e-14 {
            return Err(Error::InvalidArgument(
                "external potential must be real-valued".into(),
            ));
        }
        if !lambda.is_finite() || !initial.is_finite() || !potential.is_finite() {
            return Err(Error::InvalidArgument("problem data must be finite".into()));
        }
        Ok(OneBodyProblem {
            grid,
            initial,
            potential,
            nonlinearity,
            lambda,
        })
    }

    /// Free problem: no potential, no interaction.
    pub fn free(initial: Field) -> Result<Self> {
        let potential = Field::zeros(initial.grid());
        OneBodyProblem::new(initial, potential, Nonlinearity::cubic(0.0), 0.0)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn initial(&self) -> &Field {
        &self.initial
    }

    pub fn potential(&self) -> &Field {
        &self.potential
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nonlinearity
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// The same problem with the interaction switched off.
    pub fn linear(&self) -> OneBodyProblem {
        OneBodyProblem {
            lambda: 0.0,
            ..self.clone()
        }
    }

    pub fn with_initial(&self, initial: Field) -> Result<OneBodyProblem> {
        OneBodyProblem::new(
            initial,
            self.potential.clone(),
            self.nonlinearity.clone(),
            self.lambda,
        )
    }
}

enum NonlinearKernel {
    Off,
    Convolution(Vec<Complex64>),
    Local(f64),
}

/// Precomputed Strang propagator for a fixed problem and time step.
pub struct Propagator {
    grid: Arc<Grid>,
    potential: Vec<f64>,
    lambda: f64,
    kernel: NonlinearKernel,
    dt: f64,
    half_kinetic: Vec<Complex64>,
    full_kinetic: Vec<Complex64>,
}

fn kinetic_multiplier(grid: &Grid, tau: f64) -> Vec<Complex64> {
    grid.xi_squared()
        .iter()
        .map(|&x2| Complex64::from_polar(1.0, -tau * 4.0 * PI * PI * x2))
        .collect()
}

impl Propagator {
    /// Builds a propagator for steps of signed size `dt` (negative runs backward).
    pub fn new(problem: &OneBodyProblem, dt: f64) -> Result<Self> {
        if !(dt.is_finite() && dt != 0.0) {
            return Err(Error::InvalidArgument(
                "time step must be finite and nonzero".into(),
            ));
        }
        let grid = problem.grid.clone();
        let kernel = if problem.lambda == 0.0 {
            NonlinearKernel::Off
        } else {
            match &problem.nonlinearity {
                Nonlinearity::Cubic { a } => NonlinearKernel::Local(*a),
                other => {
                    let k = other
                        .kernel()
                        .expect("convolution nonlinearity has a kernel");
                    NonlinearKernel::Convolution(transform_forward(k).values().to_vec())
                }
            }
        };
        Ok(Propagator {
            potential: problem.potential.values().iter().map(|v| v.re).collect(),
            lambda: problem.lambda,
            kernel,
            dt,
            half_kinetic: kinetic_multiplier(&grid, 0.5 * dt),
            full_kinetic: kinetic_multiplier(&grid, dt),
            grid,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&self, values: &mut [Complex64], full: bool) {
        let m = if full {
            &self.full_kinetic
        } else {
            &self.half_kinetic
        };
        apply_fourier_multiplier(&self.grid, values, m);
    }

    /// Pointwise phase `exp(-i dt (V + λ N[ρ]))` using the current density.
    fn potential_phase(&self, values: &mut [Complex64]) {
        let dt = self.dt;
        match &self.kernel {
            NonlinearKernel::Off => {
                for (v, &pot) in values.iter_mut().zip(&self.potential) {
                    *v *= Complex64::from_polar(1.0, -dt * pot);
                }
            }
            NonlinearKernel::Local(a) => {
                let c = self.lambda * a;
                for (v, &pot) in values.iter_mut().zip(&self.potential) {
                    let e = pot + c * v.norm_sqr();
                    *v *= Complex64::from_polar(1.0, -dt * e);
                }
            }
            NonlinearKernel::Convolution(spec) => {
                let rho: Vec<Complex64> = values
                    .iter()
                    .map(|v| Complex64::new(v.norm_sqr(), 0.0))
                    .collect();
                let mean_field = convolve_with_spectrum(&rho, &self.grid, spec);
                for ((v, &pot), m) in values.iter_mut().zip(&self.potential).zip(&mean_field) {
                    let e = pot + self.lambda * m.re;
                    *v *= Complex64::from_polar(1.0, -dt * e);
                }
            }
        }
    }

    /// One full Strang step.
    pub fn step(&self, values: &mut [Complex64]) {
        self.kinetic(values, false);
        self.potential_phase(values);
        self.kinetic(values, false);
    }

    /// `steps` Strang steps with the inner half-kicks fused.
    pub fn advance(&self, values: &mut [Complex64], steps: usize) {
        if steps == 0 {
            return;
        }
        self.kinetic(values, false);
        for k in 0..steps {
            self.potential_phase(values);
            self.kinetic(values, k + 1 < steps);
        }
    }
}

fn sup_norm(values: &[Complex64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.norm()))
}

fn guard(time: f64, values: &[Complex64], reference: f64) -> Result<()> {
    let sup = sup_norm(values);
    let limit = BLOW_UP_FACTOR * reference;
    let finite = values.iter().all(|v| v.re.is_finite() && v.im.is_finite());
    if !finite || sup > limit {
        return Err(Error::BlowUp { time, sup, limit });
    }
    Ok(())
}

/// One Strang step of size `dt > 0` from `state`.
pub fn step(problem: &OneBodyProblem, state: &Field, dt: f64) -> Result<Field> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    if !state.same_grid(&problem.initial) {
        return Err(Error::GridMismatch);
    }
    let prop = Propagator::new(problem, dt)?;
    let mut values = state.values().to_vec();
    prop.step(&mut values);
    guard(dt, &values, sup_norm(state.values()))?;
    Field::from_values(&problem.grid, values)
}

/// Observables recorded along a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub t: f64,
    pub l2: f64,
    pub linf: f64,
    pub energy: f64,
    pub boundary_mass: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: f64,
    pub field: Field,
}

#[derive(Debug, Clone)]
pub struct WaveTrajectory {
    pub times: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub observables: Vec<Observables>,
    pub warnings: Vec<String>,
}

impl WaveTrajectory {
    /// A trajectory made only of snapshots, with observables computed from them
    /// for the free functional.
    pub fn from_snapshots(snapshots: Vec<Snapshot>) -> Result<Self> {
        if snapshots.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::InvalidArgument(
                "snapshot times must be strictly increasing".into(),
            ));
        }
        let observables = snapshots
            .iter()
            .map(|s| Observables {
                t: s.t,
                l2: norm(&s.field, Norm::L2),
                linf: norm(&s.field, Norm::Linf),
                energy: kinetic_energy(&s.field),
                boundary_mass: s.field.boundary_mass(),
            })
            .collect();
        Ok(WaveTrajectory {
            times: snapshots.iter().map(|s| s.t).collect(),
            snapshots,
            observables,
            warnings: Vec::new(),
        })
    }

    pub fn final_state(&self) -> Option<&Field> {
        self.snapshots.last().map(|s| &s.field)
    }

    pub fn snapshot_at(&self, t: f64) -> Option<&Field> {
        self.snapshots
            .iter()
            .find(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1.0))
            .map(|s| &s.field)
    }

    /// Largest `|‖u_t‖_2 - 1|` over the recorded steps.
    pub fn mass_drift(&self) -> f64 {
        self.observables
            .iter()
            .fold(0.0, |m, o| m.max((o.l2 - 1.0).abs()))
    }

    /// Largest `|E(t) - E(0)| / |E(0)|` over the recorded steps.
    pub fn relative_energy_drift(&self) -> f64 {
        let Some(first) = self.observables.first() else {
            return 0.0;
        };
        let e0 = first.energy;
        self.observables
            .iter()
            .fold(0.0, |m, o| m.max((o.energy - e0).abs() / e0.abs()))
    }

    pub fn to_csv(&self) -> String {
        let rows: Vec<[f64; 5]> = self
            .observables
            .iter()
            .map(|o| [o.t, o.l2, o.linf, o.energy, o.boundary_mass])
            .collect();
        csv_string(TRAJECTORY_CSV_HEADER, rows.iter().map(|r| r.as_slice()))
    }
}

/// Parameters of [`evolve_with`].
#[derive(Debug, Clone)]
pub struct EvolveOptions {
    pub t_max: f64,
    pub dt: f64,
    pub snapshot_times: Vec<f64>,
    /// Observables are recorded every this many steps (and at the final step).
    pub record_every: usize,
    pub boundary_threshold: f64,
}

impl EvolveOptions {
    pub fn new(t_max: f64, dt: f64) -> Self {
        EvolveOptions {
            t_max,
            dt,
            snapshot_times: Vec::new(),
            record_every: 1,
            boundary_threshold: DEFAULT_BOUNDARY_THRESHOLD,
        }
    }

    pub fn snapshots(mut self, times: impl IntoIterator<Item = f64>) -> Self {
        self.snapshot_times = times.into_iter().collect();
        self
    }

    /// Snapshots at every `stride`-th step, including `t = 0`.
    pub fn snapshot_every(mut self, stride: usize) -> Self {
        let steps = step_count(self.t_max, self.dt);
        let dt = self.t_max / steps.max(1) as f64;
        self.snapshot_times = (0..=steps)
            .step_by(stride.max(1))
            .map(|k| k as f64 * dt)
            .collect();
        self
    }

    pub fn record_every(mut self, stride: usize) -> Self {
        self.record_every = stride.max(1);
        self
    }
}

fn step_count(t_max: f64, dt: f64) -> usize {
    if t_max == 0.0 {
        0
    } else {
        (t_max / dt).round().max(1.0) as usize
    }
}

/// Evolves `problem` to `t_max`, recording observables every step.
pub fn evolve(
    problem: &OneBodyProblem,
    t_max: f64,
    dt: f64,
    snapshot_times: &[f64],
) -> Result<WaveTrajectory> {
    evolve_with(
        problem,
        &EvolveOptions::new(t_max, dt).snapshots(snapshot_times.iter().copied()),
    )
}

pub fn evolve_with(problem: &OneBodyProblem, opts: &EvolveOptions) -> Result<WaveTrajectory> {
    let EvolveOptions { t_max, dt, .. } = *opts;
    if !(t_max >= 0.0 && t_max.is_finite()) {
        return Err(Error::InvalidArgument("t_max must be nonnegative".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument("time step must be positive".into()));
    }
    if t_max > 0.0 && dt > t_max * (1.0 + 1e-12) {
        return Err(Error::InvalidArgument("time step exceeds t_max".into()));
    }
    let steps = step_count(t_max, dt);
    // Round to an integer step count so the final time is hit exactly.
    let dt = if steps > 0 { t_max / steps as f64 } else { dt };

    let mut snapshot_steps: Vec<usize> = opts
        .snapshot_times
        .iter()
        .filter(|&&s| s >= -0.5 * dt && s <= t_max + 0.5 * dt)
        .map(|&s| (s / dt).round() as usize)
        .collect();
    snapshot_steps.sort_unstable();
    snapshot_steps.dedup();

    let prop = if steps > 0 {
        Some(Propagator::new(problem, dt)?)
    } else {
        None
    };
    let mut values = problem.initial.values().to_vec();
    let reference = sup_norm(&values);
    let mut traj = WaveTrajectory {
        times: Vec::new(),
        snapshots: Vec::new(),
        observables: Vec::new(),
        warnings: Vec::new(),
    };
    let mut warned = false;

    let mut record = |k: usize, values: &[Complex64], traj: &mut WaveTrajectory| -> Result<()> {
        let t = k as f64 * dt;
        let field = Field::from_values_unchecked(&problem.grid, values.to_vec());
        let obs = Observables {
            t,
            l2: norm(&field, Norm::L2),
            linf: sup_norm(values),
            energy: energy(problem, &field),
            boundary_mass: field.boundary_mass(),
        };
        if obs.boundary_mass > opts.boundary_threshold && !warned {
            let msg = format!(
                "boundary mass {:.3e} exceeds {:.1e} at t = {t}; enlarge the box",
                obs.boundary_mass, opts.boundary_threshold
            );
            log::warn!("{msg}");
            traj.warnings.push(msg);
            warned = true;
        }
        traj.times.push(t);
        traj.observables.push(obs);
        if snapshot_steps.binary_search(&k).is_ok() {
            traj.snapshots.push(Snapshot { t, field });
        }
        Ok(())
    };

    record(0, &values, &mut traj)?;
    let mut k = 0;
    while k < steps {
        let mut next = (k + opts.record_every).min(steps);
        if let Some(&s) = snapshot_steps.iter().find(|&&s| s > k) {
            next = next.min(s);
        }
        prop.as_ref()
            .expect("steps > 0")
            .advance(&mut values, next - k);
        k = next;
        guard(k as f64 * dt, &values, reference)?;
        record(k, &values, &mut traj)?;
    }
    Ok(traj)
}

fn kinetic_energy(state: &Field) -> f64 {
    let grid = state.grid();
    let s = transform_forward(state);
    let sum: f64 = s
        .values()
        .iter()
        .zip(grid.xi_squared())
        .map(|(c, &x2)| 4.0 * PI * PI * x2 * c.norm_sqr())
        .sum();
    sum / grid.volume()
}

/// `∫|∇u|² + ∫V|u|² + (λ/2)∫(w*|u|²)|u|²`, with `(λa/2)∫|u|⁴` for the cubic case.
pub fn energy(problem: &OneBodyProblem, state: &Field) -> f64 {
    let grid = state.grid();
    let w = grid.cell_volume();
    let rho = state.density();
    let potential: f64 = rho
        .iter()
        .zip(problem.potential.values())
        .map(|(r, v)| r * v.re)
        .sum::<f64>()
        * w;
    let interaction = if problem.lambda == 0.0 {
        0.0
    } else {
        match &problem.nonlinearity {
            Nonlinearity::Cubic { a } => {
                0.5 * problem.lambda * a * rho.iter().map(|r| r * r).sum::<f64>() * w
            }
            other => {
                let k = transform_forward(other.kernel().expect("kernel"));
                let rho_c: Vec<Complex64> = rho.iter().map(|&r| Complex64::new(r, 0.0)).collect();
                let mf = convolve_with_spectrum(&rho_c, grid, k.values());
                0.5 * problem.lambda * mf.iter().zip(&rho).map(|(m, r)| m.re * r).sum::<f64>() * w
            }
        }
    };
    kinetic_energy(state) + potential + interaction
}

/// `(t, (1+t)^p ‖u_t‖_∞)` with its running supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySeries {
    pub points: Vec<(f64, f64)>,
    pub running_sup: Vec<f64>,
}

impl DecaySeries {
    fn new(points: Vec<(f64, f64)>) -> Self {
        let mut sup = f64::NEG_INFINITY;
        let running_sup = points
            .iter()
            .map(|&(_, v)| {
                sup = sup.max(v);
                sup
            })
            .collect();
        DecaySeries {
            points,
            running_sup,
        }
    }

    pub fn sup(&self) -> f64 {
        self.running_sup.last().copied().unwrap_or(0.0)
    }
}

pub fn measure_decay(traj: &WaveTrajectory, exponent: f64) -> Result<DecaySeries> {
    if !(exponent >= 0.0) {
        return Err(Error::InvalidArgument(
            "decay exponent must be nonnegative".into(),
        ));
    }
    Ok(DecaySeries::new(
        traj.observables
            .iter()
            .map(|o| (o.t, (1.0 + o.t).powf(exponent) * o.linf))
            .collect(),
    ))
}

/// Central-difference estimate of `(1+t)^p ‖∂_t u_t‖_∞` at interior snapshots.
pub fn measure_time_derivative_decay(
    traj: &WaveTrajectory,
    exponent: f64,
) -> Result<Vec<(f64, f64)>> {
    let snaps = &traj.snapshots;
    if snaps.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least three snapshots".into(),
        ));
    }
    let delta = snaps[1].t - snaps[0].t;
    if snaps
        .windows(2)
        .any(|w| ((w[1].t - w[0].t) - delta).abs() > 1e-9 * delta.max(1.0))
    {
        return Err(Error::InvalidArgument(
            "snapshots must be uniformly spaced".into(),
        ));
    }
    Ok(snaps
        .windows(3)
        .map(|w| {
            let sup = w[2]
                .field
                .values()
                .iter()
                .zip(w[0].field.values())
                .fold(0.0f64, |m, (a, b)| m.max(((a - b) / (2.0 * delta)).norm()));
            let t = w[1].t;
            (t, (1.0 + t).powf(exponent) * sup)
        })
        .collect())
}

/// Result of [`linear_decay_probe`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearDecayProbe {
    /// `(t, ‖e^{-it(-Δ+V)} f‖_∞ t^{d/2} / ‖f‖_1)`
    pub ratios: Vec<(f64, f64)>,
    /// Largest ratio over the probed times.
    pub empirical_cv: f64,
}

/// Measures the `L¹ → L^∞` decay ratio of the linear propagator `e^{-it(-Δ+V)}`.
///
/// With `V = 0` the propagator is applied exactly in Fourier space; otherwise
/// Strang steps of size at most `dt` are taken between the probe times.
pub fn linear_decay_probe(
    v: &Field,
    f: &Field,
    t_list: &[f64],
    dt: f64,
) -> Result<LinearDecayProbe> {
    if !v.same_grid(f) {
        return Err(Error::GridMismatch);
    }
    if t_list.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::InvalidArgument(
            "probe times must be positive".into(),
        ));
    }
    if v.max_imag() > 1e-14 {
        return Err(Error::InvalidArgument(
            "external potential must be real-valued".into(),
        ));
    }
    let grid = f.grid().clone();
    let l1 = norm(f, Norm::L1);
    if l1 == 0.0 {
        return Err(Error::InvalidArgument(
            "probe profile must be nonzero".into(),
        ));
    }
    let half_d = 0.5 * grid.dim() as f64;
    let free = v.values().iter().all(|c| c.re == 0.0);
    let mut times = t_list.to_vec();
    times.sort_by(f64::total_cmp);

    let mut ratios = Vec::with_capacity(times.len());
    if free {
        for &t in &times {
            let mut values = f.values().to_vec();
            apply_fourier_multiplier(&grid, &mut values, &kinetic_multiplier(&grid, t));
            ratios.push((t, sup_norm(&values) * t.powf(half_d) / l1));
        }
    } else {
        if !(dt > 0.0) {
            return Err(Error::InvalidArgument("time step must be positive".into()));
        }
        let prop_for = |tau: f64| -> Result<Propagator> {
            Propagator::new(
                &OneBodyProblem {
                    grid: grid.clone(),
                    initial: f.clone(),
                    potential: v.clone(),
                    nonlinearity: Nonlinearity::cubic(0.0),
                    lambda: 0.0,
                },
                tau,
            )
        };
        let mut values = f.values().to_vec();
        let mut now = 0.0;
        for &t in &times {
            let span = t - now;
            if span > 0.0 {
                let steps = (span / dt).ceil().max(1.0) as usize;
                prop_for(span / steps as f64)?.advance(&mut values, steps);
                now = t;
            }
            ratios.push((t, sup_norm(&values) * t.powf(half_d) / l1));
        }
    }
    let empirical_cv = ratios.iter().fold(0.0f64, |m, r| m.max(r.1));
    Ok(LinearDecayProbe {
        ratios,
        empirical_cv,
    })
}

/// Smallest nonnegative root of `eps + C x³ - x`.
///
/// A root exists iff `27 C eps² < 4`; it lies below the minimum `x* = (3C)^{-1/2}`
/// of the cubic and is located by bisection.
pub fn bootstrap_root(eps: f64, c: f64) -> Result<f64> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidArgument("eps must be nonnegative".into()));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidArgument("C must be positive".into()));
    }
    let discriminant = 27.0 * c * eps * eps;
    if discriminant >= 4.0 {
        return Err(Error::NoBootstrapRoot { discriminant });
    }
    if eps == 0.0 {
        return Ok(0.0);
    }
    let f = |x: f64| eps + c * x * x * x - x;
    let (mut lo, mut hi) = (0.0, (3.0 * c).sqrt().recip());
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// `‖D^k u‖_2` computed spectrally, `D = (-Δ)^{1/2}`.
pub fn derivative_norm(u: &Field, k: u32) -> f64 {
    let grid = u.grid();
    let s = transform_forward(u);
    let sum: f64 = s
        .values()
        .iter()
        .zip(grid.xi_squared())
        .map(|(c, &x2)| (2.0 * PI * x2.sqrt()).powi(2 * k as i32) * c.norm_sqr())
        .sum();
    (sum / grid.volume()).sqrt()
}

/// `M(T) = sup (1+t)^{d/2}‖u_t‖_∞ + sup ‖D^k u_t‖_2 + ‖u_0‖_2` over snapshots with `t <= T`.
pub fn m_functional(traj: &WaveTrajectory, k: u32, up_to: f64) -> Result<f64> {
    let first = traj
        .snapshots
        .first()
        .ok_or_else(|| Error::InvalidArgument("trajectory has no snapshots".into()))?;
    let d = first.field.grid().dim();
    if !k.is_multiple_of(2) || (k as f64) <= 0.5 * d as f64 {
        return Err(Error::InvalidArgument(format!(
            "k must be an even integer above d/2, got {k}"
        )));
    }
    let mut weighted = 0.0f64;
    let mut sobolev = 0.0f64;
    for s in traj.snapshots.iter().filter(|s| s.t <= up_to) {
        weighted = weighted.max((1.0 + s.t).powf(0.5 * d as f64) * norm(&s.field, Norm::Linf));
        sobolev = sobolev.max(derivative_norm(&s.field, k));
    }
    Ok(weighted + sobolev + norm(&first.field, Norm::L2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;
    use approx::assert_relative_eq;

    fn gaussian(grid: &Arc<Grid>, sigma: f64) -> Field {
        Field::from_real_fn(grid, |x| {
            (-x.iter().map(|v| v * v).sum::<f64>() / (4.0 * sigma * sigma)).exp()
        })
        .normalized()
        .unwrap()
    }

    #[test]
    fn plane_wave_picks_up_exact_phase() {
        let g = make_grid(1, 64, 8.0).unwrap();
        let k = 3.0;
        let u = Field::from_fn(&g, |x| {
            Complex64::from_polar(1.0, 2.0 * PI * k * x[0] / 8.0)
        })
        .normalized()
        .unwrap();
        let p = OneBodyProblem::free(u.clone()).unwrap();
        let dt = 0.01;
        let out = step(&p, &u, dt).unwrap();
        let phase = Complex64::from_polar(1.0, -dt * 4.0 * PI * PI * (k / 8.0) * (k / 8.0));
        for (a, b) in out.values().iter().zip(u.values()) {
            assert!((a - b * phase).norm() < 1e-13);
        }
    }

    #[test]
    fn step_rejects_nonpositive_dt() {
        let g = make_grid(1, 16, 8.0).unwrap();
        let p = OneBodyProblem::free(gaussian(&g, 1.0)).unwrap();
        assert!(step(&p, p.initial(), 0.0).is_err());
        assert!(step(&p, p.initial(), -0.1).is_err());
    }

    #[test]
    fn problem_validation() {
        let g = make_grid(1, 64, 16.0).unwrap();
        let u = gaussian(&g, 1.0);
        let unnormalized = u.scaled(Complex64::new(1.1, 0.0));
        assert!(OneBodyProblem::free(unnormalized).is_err());
        let complex_v = Field::from_fn(&g, |_| Complex64::new(0.0, 1e-3));
        assert!(OneBodyProblem::new(u.clone(), complex_v, Nonlinearity::cubic(1.0), 1.0).is_err());
        let other = make_grid(1, 32, 16.0).unwrap();
        assert_eq!(
            OneBodyProblem::new(u, Field::zeros(&other), Nonlinearity::cubic(1.0), 1.0)
                .unwrap_err(),
            Error::GridMismatch
        );
    }

    #[test]
    fn blow_up_guard_trips() {
        let g = make_grid(1, 16, 8.0).unwrap();
        let values = vec![Complex64::new(1.0, 0.0); 16];
        assert!(guard(0.0, &values, 1.0).is_ok());
        let mut bad = values.clone();
        bad[3] = Complex64::new(2e6, 0.0);
        assert!(matches!(guard(1.0, &bad, 1.0), Err(Error::BlowUp { .. })));
        bad[3] = Complex64::new(f64::NAN, 0.0);
        assert!(guard(1.0, &bad, 1.0).is_err());
        let _ = g;
    }

    #[test]
    fn zero_time_trajectory_is_initial_state() {
        let g = make_grid(1, 64, 16.0).unwrap();
        let p = OneBodyProblem::free(gaussian(&g, 1.0)).unwrap();
        let traj = evolve(&p, 0.0, 0.01, &[0.0]).unwrap();
        assert_eq!(traj.times, vec![0.0]);
        assert_eq!(traj.snapshots.len(), 1);
        assert_eq!(traj.snapshots[0].field.values(), p.initial().values());
    }

    #[test]
    fn constant_state_has_zero_energy() {
        let g = make_grid(2, 16, 4.0).unwrap();
        let u = Field::from_real_fn(&g, |_| 1.0).normalized().unwrap();
        let p = OneBodyProblem::free(u.clone()).unwrap();
        assert!(energy(&p, &u).abs() < 1e-14);
    }

    #[test]
    fn plane_wave_energy() {
        let g = make_grid(1, 32, 8.0).unwrap();
        let u = Field::from_fn(&g, |x| {
            Complex64::from_polar(1.0, 2.0 * PI * 2.0 * x[0] / 8.0)
        })
        .normalized()
        .unwrap();
        let p = OneBodyProblem::free(u.clone()).unwrap();
        assert_relative_eq!(
            energy(&p, &u),
            4.0 * PI * PI * (2.0f64 / 8.0).powi(2),
            max_relative = 1e-12
        );
    }

    #[test]
    fn bootstrap_values() {
        assert_eq!(bootstrap_root(0.0, 8.0).unwrap(), 0.0);
        assert!((bootstrap_root(0.1, 8.0).unwrap() - 0.110916).abs() < 1e-6);
        assert!(matches!(
            bootstrap_root(0.2, 8.0),
            Err(Error::NoBootstrapRoot { .. })
        ));
        assert!(bootstrap_root(-0.1, 8.0).is_err());
        assert!(bootstrap_root(0.1, 0.0).is_err());
    }

    #[test]
    fn bootstrap_root_is_a_root() {
        for (eps, c) in [(0.01, 1.0), (0.05, 20.0), (0.3, 1.5)] {
            let x = bootstrap_root(eps, c).unwrap();
            assert!((eps + c * x.powi(3) - x).abs() < 1e-11);
            assert!(x >= eps);
        }
    }

    #[test]
    fn m_functional_basics() {
        let g = make_grid(1, 64, 16.0).unwrap();
        let zero = WaveTrajectory::from_snapshots(vec![Snapshot {
            t: 0.0,
            field: Field::zeros(&g),
        }])
        .unwrap();
        assert_eq!(m_functional(&zero, 2, 0.0).unwrap(), 0.0);
        assert!(m_functional(&zero, 1, 0.0).is_err());

        let u = gaussian(&g, 1.0);
        let p = OneBodyProblem::free(u.clone()).unwrap();
        let traj = evolve_with(&p, &EvolveOptions::new(2.0, 0.01).snapshot_every(10)).unwrap();
        let m0 = m_functional(&traj, 2, 0.0).unwrap();
        let expected = norm(&u, Norm::Linf) + derivative_norm(&u, 2) + 1.0;
        assert_relative_eq!(m0, expected, max_relative = 1e-12);
        let mut last = m0;
        for t in [0.5, 1.0, 1.5, 2.0] {
            let m = m_functional(&traj, 2, t).unwrap();
            assert!(m >= last);
            last = m;
        }
    }

    #[test]
    fn time_derivative_needs_uniform_snapshots() {
        let g = make_grid(1, 32, 8.0).unwrap();
        let u = gaussian(&g, 1.0);
        let snaps = |ts: &[f64]| {
            WaveTrajectory::from_snapshots(
                ts.iter()
                    .map(|&t| Snapshot {
                        t,
                        field: u.clone(),
                    })
                    .collect(),
            )
            .unwrap()
        };
        assert!(measure_time_derivative_decay(&snaps(&[0.0, 1.0]), 0.5).is_err());
        assert!(measure_time_derivative_decay(&snaps(&[0.0, 1.0, 3.0]), 0.5).is_err());
        assert_eq!(
            measure_time_derivative_decay(&snaps(&[0.0, 1.0, 2.0]), 0.5).unwrap(),
            vec![(1.0, 0.0)]
        );
    }

    #[test]
    fn decay_with_zero_exponent_is_raw_sup() {
        let g = make_grid(1, 128, 32.0).unwrap();
        let p = OneBodyProblem::free(gaussian(&g, 1.0)).unwrap();
        let traj = evolve(&p, 1.0, 0.05, &[]).unwrap();
        let series = measure_decay(&traj, 0.0).unwrap();
        for ((t, v), o) in series.points.iter().zip(&traj.observables) {
            assert_eq!((*t, *v), (o.t, o.linf));
        }
        assert!(series.running_sup.windows(2).all(|w| w[1] >= w[0]));
        assert!(measure_decay(&traj, -1.0).is_err());
    }
}
