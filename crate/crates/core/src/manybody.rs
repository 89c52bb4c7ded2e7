//! Exact propagation of symmetric `N`-boson states on the tensor-product grid,
//! reduced one-particle density matrices and trace distances.
//!
//! A state is stored row-major over `N` particle slots, each slot a flat index
//! into the one-particle grid (cardinality `G = n^d`); particle 1 is the slowest
//! index. The Hamiltonian is
//!
//! ```text
//! H_N = Σ_j (-Δ_j + V(x_j)) + (λ/N) Σ_{i<j} w_N(x_i - x_j),
//! ```
//!
//! with `w_N` evaluated at the periodic displacement, the same convention the
//! one-body Hartree convolution uses.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, Field, Grid, Norm};
use crate::io::csv_string;
use crate::onebody::BLOW_UP_FACTOR;
use crate::potentials::{sample_potential, scaled_interaction, InteractionSpec, PotentialSpec};

/// Default cap on the number of stored amplitudes (`2^27`, 2 GiB of `Complex64`).
pub const DEFAULT_AMPLITUDE_BUDGET: usize = 1 << 27;

/// CSV header of exported many-body run records.
pub const RUN_CSV_HEADER: &str = "t,trace_distance,condensate_fraction,mass,energy";

/// Number of amplitudes of an `N`-particle state on `grid`.
pub fn amplitude_count(grid: &Grid, particles: usize) -> u128 {
    (grid.len() as u128).saturating_pow(particles as u32)
}

/// Checks the memory budget, reporting the nearest feasible `(n, N)` on failure.
pub fn check_budget(grid: &Grid, particles: usize, budget: usize) -> Result<usize> {
    let required = amplitude_count(grid, particles);
    if required <= budget as u128 {
        return Ok(required as usize);
    }
    let g = grid.len() as u128;
    let mut max_particles = 0;
    while g.saturating_pow(max_particles as u32 + 1) <= budget as u128 {
        max_particles += 1;
    }
    let mut max_points = 0;
    let mut n = 8usize;
    while ((n as u128).pow(grid.dim() as u32)).saturating_pow(particles as u32) <= budget as u128 {
        max_points = n;
        n *= 2;
    }
    Err(Error::MemoryBudget {
        required,
        budget,
        points: grid.points_per_axis(),
        particles,
        max_particles,
        max_points,
    })
}

#[derive(Debug, Clone)]
pub struct ManyBodyState {
    particles: usize,
    grid: Arc<Grid>,
    values: Vec<Complex64>,
    time: f64,
}

impl ManyBodyState {
    /// Wraps raw amplitudes; checks the length only.
    pub fn from_values(grid: &Arc<Grid>, particles: usize, values: Vec<Complex64>) -> Result<Self> {
        if particles == 0 {
            return Err(Error::InvalidArgument(
                "particle number must be positive".into(),
            ));
        }
        if values.len() as u128 != amplitude_count(grid, particles) {
            return Err(Error::InvalidArgument(
                "amplitude count does not match G^N".into(),
            ));
        }
        Ok(ManyBodyState {
            particles,
            grid: grid.clone(),
            values,
            time: 0.0,
        })
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Quadrature weight `h^{dN}`.
    pub fn cell_volume(&self) -> f64 {
        self.grid.cell_volume().powi(self.particles as i32)
    }

    /// `L²` norm with weight `h^{dN}`.
    pub fn norm(&self) -> f64 {
        (self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.cell_volume()).sqrt()
    }

    /// Largest change of any amplitude under a transposition of particle slots.
    pub fn symmetry_defect(&self) -> f64 {
        let g = self.grid.len();
        let n = self.particles;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let si = g.pow((n - 1 - i) as u32);
                let sj = g.pow((n - 1 - j) as u32);
                let d = (0..self.values.len())
                    .into_par_iter()
                    .map(|flat| {
                        let pi = (flat / si) % g;
                        let pj = (flat / sj) % g;
                        let swapped = flat - pi * si - pj * sj + pj * si + pi * sj;
                        (self.values[flat] - self.values[swapped]).norm()
                    })
                    .reduce(|| 0.0, f64::max);
                worst = worst.max(d);
            }
        }
        worst
    }

    /// Projection onto the symmetric subspace followed by normalization.
    pub fn symmetrized(&self) -> Result<ManyBodyState> {
        let g = self.grid.len();
        let n = self.particles;
        let perms = permutations(n);
        let mut digits = vec![0usize; n];
        let mut permuted = vec![0usize; n];
        let mut out = vec![Complex64::default(); self.values.len()];
        for (flat, o) in out.iter_mut().enumerate() {
            decode(flat, g, &mut digits);
            let mut acc = Complex64::default();
            for p in &perms {
                for (k, &src) in p.iter().enumerate() {
                    permuted[k] = digits[src];
                }
                acc += self.values[encode(&permuted, g)];
            }
            *o = acc / perms.len() as f64;
        }
        let mut s = ManyBodyState {
            values: out,
            ..self.clone()
        };
        let nrm = s.norm();
        if nrm == 0.0 {
            return Err(Error::InvalidArgument("symmetric part vanishes".into()));
        }
        s.values.iter_mut().for_each(|v| *v /= nrm);
        Ok(s)
    }
}

fn decode(mut flat: usize, g: usize, out: &mut [usize]) {
    for d in out.iter_mut().rev() {
        *d = flat % g;
        flat /= g;
    }
}

fn encode(digits: &[usize], g: usize) -> usize {
    digits.iter().fold(0, |acc, &d| acc * g + d)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// The factorized state `u0^{⊗N}`, under the default amplitude budget.
pub fn product_state(u0: &Field, particles: usize) -> Result<ManyBodyState> {
    product_state_with_budget(u0, particles, DEFAULT_AMPLITUDE_BUDGET)
}

pub fn product_state_with_budget(
    u0: &Field,
    particles: usize,
    budget: usize,
) -> Result<ManyBodyState> {
    if particles == 0 {
        return Err(Error::InvalidArgument(
            "particle number must be positive".into(),
        ));
    }
    let l2 = norm(u0, Norm::L2);
    if (l2 - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "u0 must have unit L2 norm, got {l2}"
        )));
    }
    check_budget(u0.grid(), particles, budget)?;
    let mut values = u0.values().to_vec();
    for _ in 1..particles {
        values = values
            .iter()
            .flat_map(|&a| u0.values().iter().map(move |&b| a * b))
            .collect();
    }
    Ok(ManyBodyState {
        particles,
        grid: u0.grid().clone(),
        values,
        time: 0.0,
    })
}

/// Potential part of `H_N` tabulated on the one-particle grid.
#[derive(Debug, Clone)]
pub struct ManyBodyHamiltonian {
    grid: Arc<Grid>,
    particles: usize,
    potential: Vec<f64>,
    /// `w_N(x_p - x_q)` for one-particle indices `p, q` (row-major `G x G`).
    pair: Vec<f64>,
    lambda: f64,
}

impl ManyBodyHamiltonian {
    /// `potential` is `V`, `interaction` the already scaled kernel `w_N`.
    pub fn new(
        particles: usize,
        potential: &Field,
        interaction: &Field,
        lambda: f64,
    ) -> Result<Self> {
        if !potential.same_grid(interaction) {
            return Err(Error::GridMismatch);
        }
        if particles == 0 {
            return Err(Error::InvalidArgument(
                "particle number must be positive".into(),
            ));
        }
        if potential.max_imag() > 1e-14 || interaction.max_imag() > 1e-14 {
            return Err(Error::InvalidArgument(
                "potentials must be real-valued".into(),
            ));
        }
        let grid = potential.grid().clone();
        let g = grid.len();
        let n = grid.points_per_axis();
        let d = grid.dim();
        let mut pair = vec![0.0; g * g];
        let (mut ip, mut iq, mut diff) = (vec![0; d], vec![0; d], vec![0; d]);
        for p in 0..g {
            decode(p, n, &mut ip);
            for q in 0..g {
                decode(q, n, &mut iq);
                for a in 0..d {
                    diff[a] = (ip[a] + n + n / 2 - iq[a]) % n;
                }
                pair[p * g + q] = interaction.values()[encode(&diff, n)].re;
            }
        }
        Ok(ManyBodyHamiltonian {
            potential: potential.values().iter().map(|v| v.re).collect(),
            grid,
            particles,
            pair,
            lambda,
        })
    }

    /// Samples `V` and `w_N(x) = N^{dβ} w(N^β x)` from their specifications.
    pub fn from_specs(
        grid: &Arc<Grid>,
        particles: usize,
        potential: &PotentialSpec,
        interaction: &InteractionSpec,
        lambda: f64,
        beta: f64,
    ) -> Result<Self> {
        let v = sample_potential(potential, grid)?.field;
        let w = scaled_interaction(interaction, particles as u64, beta, grid)?;
        ManyBodyHamiltonian::new(particles, &v, &w, lambda)
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    /// `Σ_j V(x_j) + (λ/N) Σ_{i<j} w_N(x_i - x_j)` for every configuration.
    fn configuration_energy(&self) -> Vec<f64> {
        let g = self.grid.len();
        let n = self.particles;
        let total = g.pow(n as u32);
        let coupling = self.lambda / n as f64;
        (0..total)
            .into_par_iter()
            .map_init(
                || vec![0usize; n],
                |digits, flat| {
                    decode(flat, g, digits);
                    let mut e = 0.0;
                    for (i, &p) in digits.iter().enumerate() {
                        e += self.potential[p];
                        if coupling != 0.0 {
                            for &q in &digits[i + 1..] {
                                e += coupling * self.pair[p * g + q];
                            }
                        }
                    }
                    e
                },
            )
            .collect()
    }
}

/// Applies `exp(-i tau (-Δ))` on all `dN` axes.
struct KineticPhase {
    per_particle: Vec<Complex64>,
}

impl KineticPhase {
    fn new(grid: &Grid, tau: f64) -> Self {
        KineticPhase {
            per_particle: grid
                .xi_squared()
                .iter()
                .map(|&x2| Complex64::from_polar(1.0, -tau * 4.0 * PI * PI * x2))
                .collect(),
        }
    }

    fn apply(&self, grid: &Grid, particles: usize, values: &mut [Complex64]) {
        let axes = grid.dim() * particles;
        let g = grid.len();
        let inv = 1.0 / values.len() as f64;
        grid.fft().forward(values, axes);
        values
            .par_chunks_mut(g)
            .enumerate()
            .for_each(|(outer, chunk)| {
                let mut prefix = Complex64::new(inv, 0.0);
                let mut rest = outer;
                for _ in 1..particles {
                    prefix *= self.per_particle[rest % g];
                    rest /= g;
                }
                for (v, ph) in chunk.iter_mut().zip(&self.per_particle) {
                    *v *= prefix * ph;
                }
            });
        grid.fft().inverse(values, axes);
    }
}

/// `⟨ψ, H_N ψ⟩` for a normalized state, given the tabulated configuration energy.
fn expectation(state: &ManyBodyState, config_energy: &[f64]) -> f64 {
    let grid = &state.grid;
    let g = grid.len();
    let n = state.particles;
    let mut spectrum = state.values.clone();
    grid.fft().forward(&mut spectrum, grid.dim() * n);
    let k2: Vec<f64> = grid
        .xi_squared()
        .iter()
        .map(|x| 4.0 * PI * PI * x)
        .collect();
    let kinetic: f64 = spectrum
        .par_chunks(g)
        .enumerate()
        .map(|(outer, chunk)| {
            let mut prefix = 0.0;
            let mut rest = outer;
            for _ in 1..n {
                prefix += k2[rest % g];
                rest /= g;
            }
            chunk
                .iter()
                .zip(&k2)
                .map(|(c, k)| (prefix + k) * c.norm_sqr())
                .sum::<f64>()
        })
        .sum::<f64>()
        / spectrum.len() as f64;
    let potential: f64 = state
        .values
        .iter()
        .zip(config_energy)
        .map(|(v, e)| e * v.norm_sqr())
        .sum();
    (kinetic + potential) * state.cell_volume()
}

/// Parameters of [`evolve_manybody`].
#[derive(Debug, Clone)]
pub struct ManyBodyOptions {
    pub t_max: f64,
    pub dt: f64,
    /// Records are taken every this many steps and at the final step.
    pub record_every: usize,
    /// Whether to store the reduced density matrix at every record.
    pub reduced_densities: bool,
}

impl ManyBodyOptions {
    pub fn new(t_max: f64, dt: f64) -> Self {
        ManyBodyOptions {
            t_max,
            dt,
            record_every: 1,
            reduced_densities: false,
        }
    }

    pub fn record_every(mut self, stride: usize) -> Self {
        self.record_every = stride.max(1);
        self
    }

    pub fn with_densities(mut self) -> Self {
        self.reduced_densities = true;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManyBodyRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub symmetry_defect: f64,
}

#[derive(Debug, Clone)]
pub struct ManyBodyRun {
    pub state: ManyBodyState,
    pub records: Vec<ManyBodyRecord>,
    /// Reduced densities at the record times, if requested.
    pub densities: Vec<(f64, DensityMatrix)>,
}

impl ManyBodyRun {
    pub fn mass_drift(&self) -> f64 {
        self.records
            .iter()
            .fold(0.0, |m, r| m.max((r.mass - 1.0).abs()))
    }

    pub fn relative_energy_drift(&self) -> f64 {
        let e0 = self.records.first().map_or(0.0, |r| r.energy);
        self.records
            .iter()
            .fold(0.0, |m, r| m.max((r.energy - e0).abs() / e0.abs()))
    }

    pub fn max_symmetry_defect(&self) -> f64 {
        self.records
            .iter()
            .fold(0.0, |m, r| m.max(r.symmetry_defect))
    }
}

/// Strang splitting on the `dN`-dimensional grid.
pub fn evolve_manybody(
    state: &ManyBodyState,
    ham: &ManyBodyHamiltonian,
    opts: &ManyBodyOptions,
) -> Result<ManyBodyRun> {
    if ham.particles != state.particles || *ham.grid != *state.grid {
        return Err(Error::InvalidArgument(
            "Hamiltonian does not match the state".into(),
        ));
    }
    if !(opts.dt > 0.0) || !(opts.t_max >= 0.0) {
        return Err(Error::InvalidArgument("need dt > 0 and t_max >= 0".into()));
    }
    let steps = if opts.t_max == 0.0 {
        0
    } else {
        (opts.t_max / opts.dt).round().max(1.0) as usize
    };
    let dt = if steps > 0 {
        opts.t_max / steps as f64
    } else {
        opts.dt
    };
    let grid = state.grid.clone();
    let n = state.particles;

    let config_energy = ham.configuration_energy();
    let potential_phase: Vec<Complex64> = config_energy
        .par_iter()
        .map(|&e| Complex64::from_polar(1.0, -dt * e))
        .collect();
    let half = KineticPhase::new(&grid, 0.5 * dt);
    let full = KineticPhase::new(&grid, dt);

    let mut current = state.clone();
    let reference = current.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
    let t0 = state.time;
    let mut run = ManyBodyRun {
        state: state.clone(),
        records: Vec::new(),
        densities: Vec::new(),
    };
    let record = |s: &ManyBodyState, run: &mut ManyBodyRun| {
        run.records.push(ManyBodyRecord {
            t: s.time,
            mass: s.norm(),
            energy: expectation(s, &config_energy),
            symmetry_defect: s.symmetry_defect(),
        });
        if opts.reduced_densities {
            run.densities.push((s.time, reduced_density(s)));
        }
    };
    record(&current, &mut run);

    let mut k = 0;
    while k < steps {
        let next = (k + opts.record_every).min(steps);
        half.apply(&grid, n, &mut current.values);
        for j in k..next {
            current
                .values
                .par_iter_mut()
                .zip(&potential_phase)
                .for_each(|(v, p)| *v *= p);
            let kin = if j + 1 < next { &full } else { &half };
            kin.apply(&grid, n, &mut current.values);
        }
        k = next;
        current.time = t0 + k as f64 * dt;
        let sup = current.values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
        let finite = current
            .values
            .iter()
            .all(|v| v.re.is_finite() && v.im.is_finite());
        if !finite || sup > BLOW_UP_FACTOR * reference {
            return Err(Error::BlowUp {
                time: current.time,
                sup,
                limit: BLOW_UP_FACTOR * reference,
            });
        }
        record(&current, &mut run);
    }
    run.state = current;
    Ok(run)
}

/// Hermitian one-particle density matrix whose entries are kernel values
/// `γ(x; y)` times `h^d`, so its plain matrix trace is the physical trace.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    entries: DMatrix<Complex64>,
}

impl DensityMatrix {
    pub fn from_entries(entries: DMatrix<Complex64>) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::InvalidArgument(
                "density matrix must be square".into(),
            ));
        }
        Ok(DensityMatrix { entries })
    }

    /// `|φ⟩⟨φ|` under the same weight convention.
    pub fn from_pure(phi: &Field) -> Self {
        let w = phi.grid().cell_volume();
        let v = phi.values();
        DensityMatrix {
            entries: DMatrix::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj() * w),
        }
    }

    pub fn dimension(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        self.entries.diagonal().iter().map(|c| c.re).sum()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let m = &self.entries;
        let mut worst = 0.0f64;
        for i in 0..m.nrows() {
            for j in i..m.ncols() {
                worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.entries.clone())
    }

    /// Checks Hermiticity, unit trace and positivity within the stated tolerances.
    pub fn validate(&self) -> Result<()> {
        let herm = self.hermiticity_defect();
        if herm > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "not Hermitian: defect {herm:e}"
            )));
        }
        let tr = self.trace();
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("trace {tr} differs from 1")));
        }
        let min = self.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -1e-10 {
            return Err(Error::InvalidArgument(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(())
    }
}

fn hermitian_eigenvalues(mut m: DMatrix<Complex64>) -> Vec<f64> {
    // Symmetrize away roundoff so the solver sees an exactly Hermitian input.
    let n = m.nrows();
    for i in 0..n {
        m[(i, i)].im = 0.0;
        for j in i + 1..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)].conj());
            m[(i, j)] = avg;
            m[(j, i)] = avg.conj();
        }
    }
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Partial trace over particles `2..N`.
pub fn reduced_density(state: &ManyBodyState) -> DensityMatrix {
    let g = state.grid.len();
    let rest = state.values.len() / g;
    let w = state.cell_volume();
    let rows: Vec<&[Complex64]> = state.values.chunks(rest).collect();
    let upper: Vec<Vec<Complex64>> = (0..g)
        .into_par_iter()
        .map(|x| {
            (x..g)
                .map(|y| {
                    rows[x]
                        .iter()
                        .zip(rows[y])
                        .map(|(a, b)| a * b.conj())
                        .sum::<Complex64>()
                        * w
                })
                .collect()
        })
        .collect();
    let mut m = DMatrix::zeros(g, g);
    for (x, row) in upper.iter().enumerate() {
        for (k, &v) in row.iter().enumerate() {
            let y = x + k;
            m[(x, y)] = v;
            m[(y, x)] = v.conj();
        }
    }
    DensityMatrix { entries: m }
}

/// `Tr |γ - |φ⟩⟨φ||`, the sum of absolute eigenvalues of the difference.
pub fn trace_distance(gamma: &DensityMatrix, phi: &Field) -> Result<f64> {
    if phi.grid().len() != gamma.dimension() {
        return Err(Error::GridMismatch);
    }
    let l2 = norm(phi, Norm::L2);
    if (l2 - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!(
            "reference state must be normalized, got {l2}"
        )));
    }
    let diff = &gamma.entries - DensityMatrix::from_pure(phi).entries;
    Ok(hermitian_eigenvalues(diff).iter().map(|v| v.abs()).sum())
}

/// Closed form `2 sqrt(1 - |⟨ψ,φ⟩|²)` for two normalized pure states.
pub fn pure_trace_distance(psi: &Field, phi: &Field) -> Result<f64> {
    let overlap = psi.inner(phi)?.norm_sqr();
    Ok(2.0 * (1.0 - overlap).max(0.0).sqrt())
}

/// Largest eigenvalue of `γ`.
pub fn condensate_fraction(gamma: &DensityMatrix) -> f64 {
    gamma.eigenvalues().last().copied().unwrap_or(0.0)
}

/// One row of a many-body trace record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: f64,
    pub trace_distance: f64,
    pub condensate_fraction: f64,
    pub mass: f64,
    pub energy: f64,
}

pub fn trace_records_csv(records: &[TraceRecord]) -> String {
    let rows: Vec<[f64; 5]> = records
        .iter()
        .map(|r| {
            [
                r.t,
                r.trace_distance,
                r.condensate_fraction,
                r.mass,
                r.energy,
            ]
        })
        .collect();
    csv_string(RUN_CSV_HEADER, rows.iter().map(|r| r.as_slice()))
}
