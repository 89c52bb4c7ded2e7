#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use meanfield::{Field, Grid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Normalized `(2πσ²)^{-d/4} exp(-|x - c|²/(4σ²))`.
pub fn gaussian(grid: &Arc<Grid>, sigma: f64) -> Field {
    gaussian_at(grid, sigma, &[0.0; 3])
}

pub fn gaussian_at(grid: &Arc<Grid>, sigma: f64, center: &[f64]) -> Field {
    let d = grid.dim() as f64;
    let c = (2.0 * PI * sigma * sigma).powf(-0.25 * d);
    Field::from_real_fn(grid, |x| {
        let r2: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
        c * (-r2 / (4.0 * sigma * sigma)).exp()
    })
}

/// Exact solution of `i ∂_t u = -u''` from the one-dimensional [`gaussian`].
pub fn free_gaussian(grid: &Arc<Grid>, sigma: f64, t: f64) -> Field {
    let a = Complex64::new(sigma * sigma, t);
    let pre =
        (2.0 * PI * sigma * sigma).powf(-0.25) * (Complex64::new(sigma * sigma, 0.0) / a).sqrt();
    Field::from_fn(grid, |x| pre * (-(x[0] * x[0]) / (4.0 * a)).exp())
}

/// `‖u_t‖_∞` of [`free_gaussian`].
pub fn free_gaussian_sup(sigma: f64, t: f64) -> f64 {
    let a = sigma * sigma;
    (2.0 * PI * a).powf(-0.25) * (a / (a * a + t * t).sqrt()).sqrt()
}

pub fn random_field(grid: &Arc<Grid>, rng: &mut impl Rng) -> Field {
    let values = (0..grid.len())
        .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    Field::from_values(grid, values).unwrap()
}

pub fn random_state(grid: &Arc<Grid>, rng: &mut impl Rng) -> Field {
    random_field(grid, rng).normalized().unwrap()
}

pub fn max_abs_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn max_abs(a: &[Complex64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.norm()))
}
