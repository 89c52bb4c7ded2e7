//! Predicted convergence exponents, log-log rate fits, Grönwall bounds and
//! uniform-in-time checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm, Norm};
use crate::onebody::WaveTrajectory;
use crate::potentials::check_beta;

/// Default ratio `sup_late / sup_early` tolerated by [`uniformity_check`].
pub const DEFAULT_UNIFORMITY_FACTOR: f64 = 1.5;

/// Predicted decay exponent of the one-particle trace distance in `N`.
///
/// `1` in the mean-field case `β = 0` and `min(β, (1 - 3β)/2)` for
/// `0 < β < 1/3`. The rate jumps at `β = 0`: the value there is 1 while the
/// right limit is 0.
pub fn theorem_rate(beta: f64) -> Result<f64> {
    check_beta(beta)?;
    if beta == 0.0 {
        Ok(1.0)
    } else {
        Ok(beta.min(0.5 * (1.0 - 3.0 * beta)))
    }
}

/// Exponent `α/2` of the one-body comparison under the weaker decay
/// assumption `γ > 3`, with `α = β (γ - 3)/(γ - 2)`.
pub fn alternative_rate(beta: f64, gamma: f64) -> Result<f64> {
    check_beta(beta)?;
    if !(gamma > 3.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must exceed 3, got {gamma}"
        )));
    }
    if gamma.is_infinite() {
        return Ok(0.5 * beta);
    }
    Ok(0.5 * beta * (gamma - 3.0) / (gamma - 2.0))
}

/// `(t, ‖u_t - φ_t‖_2)` at shared snapshot times, plus the supremum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub differences: Vec<(f64, f64)>,
    pub sup: f64,
}

pub fn compare_one_body(
    u: &WaveTrajectory,
    phi: &WaveTrajectory,
    times: &[f64],
) -> Result<Comparison> {
    let mut differences = Vec::with_capacity(times.len());
    for &t in times {
        let (a, b) = match (u.snapshot_at(t), phi.snapshot_at(t)) {
            (Some(a), Some(b)) => (a, b),
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "no shared snapshot at t = {t}"
                )));
            }
        };
        differences.push((t, norm(&a.sub(b)?, Norm::L2)));
    }
    let sup = differences.iter().fold(0.0f64, |m, d| m.max(d.1));
    Ok(Comparison { differences, sup })
}

/// Least-squares power law `error ≈ e^{intercept} N^{exponent}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub exponent: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    pub sample_points: Vec<(f64, f64)>,
}

impl RateFit {
    /// Fitted error at `n`.
    pub fn predict(&self, n: f64) -> f64 {
        (self.intercept + self.exponent * n.ln()).exp()
    }
}

pub fn fit_rate(samples: &[(f64, f64)]) -> Result<RateFit> {
    if let Some(&(n, e)) = samples.iter().find(|(n, e)| !(*e > 0.0) || !(*n > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "log-log fit needs positive samples, got ({n}, {e})"
        )));
    }
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.0).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(Error::InvalidArgument(
            "need at least three distinct N".into(),
        ));
    }
    let xs: Vec<f64> = samples.iter().map(|s| s.0.ln()).collect();
    let ys: Vec<f64> = samples.iter().map(|s| s.1.ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let exponent = sxy / sxx;
    let intercept = my - exponent * mx;
    let residual_rms = (xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (y - intercept - exponent * x).powi(2))
        .sum::<f64>()
        / m)
        .sqrt();
    Ok(RateFit {
        exponent,
        intercept,
        residual_rms,
        sample_points: samples.to_vec(),
    })
}

/// Discrete Grönwall bound
/// `φ(t) <= e^{A(t)} φ(0) + ∫_0^t e^{A(t) - A(s)} ε(s) ds`, `A(t) = ∫_0^t α`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroenwallCertificate {
    pub time_nodes: Vec<f64>,
    pub alpha_values: Vec<f64>,
    pub eps_values: Vec<f64>,
    pub bound_values: Vec<f64>,
    pub phi0: f64,
}

/// Cumulative trapezoid integral of `values` over `nodes`.
fn cumulative_trapezoid(nodes: &[f64], values: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..nodes.len() {
        acc += 0.5 * (nodes[k] - nodes[k - 1]) * (values[k] + values[k - 1]);
        out.push(acc);
    }
    out
}

fn groenwall_values(nodes: &[f64], alpha: &[f64], eps: &[f64], phi0: f64) -> Vec<f64> {
    let a = cumulative_trapezoid(nodes, alpha);
    // ∫_0^t e^{A(t)-A(s)} ε(s) ds = e^{A(t)} ∫_0^t e^{-A(s)} ε(s) ds
    let weighted: Vec<f64> = eps.iter().zip(&a).map(|(e, a)| e * (-a).exp()).collect();
    let inner = cumulative_trapezoid(nodes, &weighted);
    a.iter()
        .zip(&inner)
        .map(|(a, i)| a.exp() * (phi0 + i))
        .collect()
}

pub fn groenwall_bound(
    alpha: impl Fn(f64) -> f64,
    eps: impl Fn(f64) -> f64,
    phi0: f64,
    time_nodes: &[f64],
) -> Result<GroenwallCertificate> {
    if time_nodes.is_empty() {
        return Err(Error::InvalidArgument("need at least one time node".into()));
    }
    if time_nodes.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "time nodes must be strictly increasing".into(),
        ));
    }
    if !(phi0 >= 0.0) {
        return Err(Error::InvalidArgument("phi0 must be nonnegative".into()));
    }
    let alpha_values: Vec<f64> = time_nodes.iter().map(|&t| alpha(t)).collect();
    let eps_values: Vec<f64> = time_nodes.iter().map(|&t| eps(t)).collect();
    let bound_values = groenwall_values(time_nodes, &alpha_values, &eps_values, phi0);
    Ok(GroenwallCertificate {
        time_nodes: time_nodes.to_vec(),
        alpha_values,
        eps_values,
        bound_values,
        phi0,
    })
}

impl GroenwallCertificate {
    /// Recomputes the bound from the stored samples and checks it matches and
    /// is nonnegative.
    pub fn verify(&self) -> bool {
        let again = groenwall_values(
            &self.time_nodes,
            &self.alpha_values,
            &self.eps_values,
            self.phi0,
        );
        again
            .iter()
            .zip(&self.bound_values)
            .all(|(a, b)| *b >= 0.0 && (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }

    /// Rows `t,alpha,eps,bound`.
    pub fn to_csv(&self) -> String {
        let rows: Vec<[f64; 4]> = (0..self.time_nodes.len())
            .map(|k| {
                [
                    self.time_nodes[k],
                    self.alpha_values[k],
                    self.eps_values[k],
                    self.bound_values[k],
                ]
            })
            .collect();
        crate::io::csv_string("t,alpha,eps,bound", rows.iter().map(|r| r.as_slice()))
    }
}

/// Uniform nodes `0, h, ..., t_max`.
pub fn uniform_nodes(t_max: f64, spacing: f64) -> Vec<f64> {
    let n = (t_max / spacing).round().max(1.0) as usize;
    (0..=n).map(|k| t_max * k as f64 / n as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Uniformity {
    pub sup_early: f64,
    pub sup_late: f64,
    pub uniform: bool,
}

/// Compares suprema over `[0, split T]` and `(split T, T]`, `T` the last time.
pub fn uniformity_check(series: &[(f64, f64)], split: f64) -> Result<Uniformity> {
    uniformity_check_with(series, split, DEFAULT_UNIFORMITY_FACTOR)
}

pub fn uniformity_check_with(series: &[(f64, f64)], split: f64, factor: f64) -> Result<Uniformity> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("series is empty".into()));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(Error::InvalidArgument("split must lie in (0, 1)".into()));
    }
    let t_end = series.iter().fold(f64::NEG_INFINITY, |m, s| m.max(s.0));
    let cut = split * t_end;
    let mut sup_early = f64::NEG_INFINITY;
    let mut sup_late = f64::NEG_INFINITY;
    for &(t, v) in series {
        if t <= cut {
            sup_early = sup_early.max(v);
        } else {
            sup_late = sup_late.max(v);
        }
    }
    Ok(Uniformity {
        sup_early,
        sup_late,
        uniform: sup_late <= factor * sup_early,
    })
}
