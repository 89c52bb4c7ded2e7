mod common;

use approx::assert_relative_eq;
use common::*;
use meanfield::analysis::*;
use meanfield::make_grid;
use meanfield::onebody::*;
use meanfield::potentials::*;
use proptest::prelude::*;
use rand::Rng;

#[test]
fn groenwall_constant_coefficient_closed_form() {
    let nodes = uniform_nodes(5.0, 1e-3);
    let (c, phi0, eps) = (0.4, 0.3, 0.0);
    let cert = groenwall_bound(|_| c, |_| eps, phi0, &nodes).unwrap();
    for (t, b) in cert.time_nodes.iter().zip(&cert.bound_values) {
        assert!((b - phi0 * (c * t).exp()).abs() <= 1e-8 * b);
    }
    let eps = 0.2;
    let cert = groenwall_bound(|_| c, |_| eps, phi0, &nodes).unwrap();
    for (t, b) in cert.time_nodes.iter().zip(&cert.bound_values) {
        let exact = (c * t).exp() * (phi0 + eps * (1.0 - (-c * t).exp()) / c);
        assert!((b - exact).abs() <= 1e-7 * exact);
    }
    assert!(cert.verify());
}

#[test]
fn groenwall_cubic_decay_profile_is_uniform_and_scales() {
    // α = 3/(1+t)³ and ε = ε0/(1+t)³ give A = 3/2 (1 - (1+t)^{-2}) and the
    // exact bound e^A φ0 + ε0 (e^A - 1)/3.
    let nodes = uniform_nodes(50.0, 2.5e-4);
    let bound_for = |n: f64, beta: f64, phi0: f64| {
        let eps0 = n.powf(-2.0 * beta);
        groenwall_bound(
            |t| 3.0 / (1.0 + t).powi(3),
            move |t| eps0 / (1.0 + t).powi(3),
            phi0,
            &nodes,
        )
        .unwrap()
    };
    let cert = bound_for(64.0, 0.2, 0.01);
    let eps0 = 64f64.powf(-0.4);
    for (t, b) in cert.time_nodes.iter().zip(&cert.bound_values) {
        let a = 1.5 * (1.0 - (1.0 + t).powi(-2));
        let exact = a.exp() * 0.01 + eps0 * (a.exp() - 1.0) / 3.0;
        assert!((b - exact).abs() <= 1e-6 * exact.max(1e-300), "t = {t}");
    }
    let ceiling = 1.5f64.exp() * 0.01 + eps0 * (1.5f64.exp() - 1.0) / 3.0;
    assert!(cert.bound_values.iter().all(|&b| b <= ceiling));

    let small = bound_for(16.0, 0.2, 0.0);
    let large = bound_for(1024.0, 0.2, 0.0);
    let ratio = large.bound_values.last().unwrap() / small.bound_values.last().unwrap();
    assert_relative_eq!(ratio, 64f64.powf(-0.4), max_relative = 1e-12);
}

#[test]
fn groenwall_dominates_forward_euler() {
    let nodes = uniform_nodes(4.0, 1e-2);
    let alpha = |t: f64| 0.5 + 0.1 * t;
    let eps = |t: f64| 0.2 + 0.05 * t;
    let cert = groenwall_bound(alpha, eps, 0.1, &nodes).unwrap();
    let mut phi = 0.1;
    for k in 0..nodes.len() {
        assert!(cert.bound_values[k] >= phi, "node {k}");
        if k + 1 < nodes.len() {
            let h = nodes[k + 1] - nodes[k];
            phi += h * (alpha(nodes[k]) * phi + eps(nodes[k]));
        }
    }
}

#[test]
fn groenwall_node_halving_is_stable() {
    let run = |spacing: f64| {
        let nodes = uniform_nodes(10.0, spacing);
        *groenwall_bound(|t| 1.0 / (1.0 + t).powi(2), |t| (-t).exp(), 0.5, &nodes)
            .unwrap()
            .bound_values
            .last()
            .unwrap()
    };
    let (coarse, fine) = (run(1e-3), run(5e-4));
    assert!((coarse - fine).abs() / fine < 1e-6);
}

#[test]
fn fit_rate_recovers_noisy_inverse_law() {
    let mut r = rng(5);
    let samples: Vec<(f64, f64)> = [10.0, 20.0, 40.0, 80.0, 160.0, 320.0]
        .iter()
        .map(|&n: &f64| (n, 2.5 / n * (1.0 + 0.01 * r.random_range(-1.0..1.0))))
        .collect();
    let fit = fit_rate(&samples).unwrap();
    assert!((fit.exponent + 1.0).abs() < 0.05);
    assert!(fit.residual_rms < 0.02);
}

#[test]
fn theorem_rate_peaks_at_one_fifth() {
    let steps = 100_000;
    let (mut best, mut at) = (f64::NEG_INFINITY, 0.0);
    for k in 1..steps {
        let beta = k as f64 / steps as f64 / 3.0;
        let r = theorem_rate(beta).unwrap();
        if r > best {
            best = r;
            at = beta;
        }
    }
    assert!((at - 0.2).abs() <= 0.002);
    assert_relative_eq!(best, 0.2, epsilon = 1e-4);
    assert_eq!(theorem_rate(1e-9).unwrap(), 1e-9);
    assert_eq!(theorem_rate(0.0).unwrap(), 1.0);
}

#[test]
fn alternative_rate_limits() {
    assert_eq!(alternative_rate(0.0, 7.0).unwrap(), 0.0);
    let far = alternative_rate(0.2, 1e12).unwrap();
    assert!((far - 0.1).abs() < 1e-12);
    assert_eq!(alternative_rate(0.2, f64::INFINITY).unwrap(), 0.1);
    assert!(alternative_rate(0.2, 3.0).is_err());
}

#[test]
fn one_body_comparisons_reduce_to_identities() {
    let grid = make_grid(1, 512, 64.0).unwrap();
    let u0 = gaussian(&grid, 1.0).normalized().unwrap();
    let v = sample_potential(
        &PotentialSpec::new(PotentialFamily::GaussianBump, 0.3, 1.0),
        &grid,
    )
    .unwrap()
    .field;
    let spec = InteractionSpec::new(InteractionFamily::Gaussian, 1.0, 1.0);
    let w = sample_interaction(&spec, &grid).unwrap();
    let times = [0.5, 1.0, 2.0];
    let run = |nl: Nonlinearity, lambda: f64| {
        evolve(
            &OneBodyProblem::new(u0.clone(), v.clone(), nl, lambda).unwrap(),
            2.0,
            1e-2,
            &times,
        )
        .unwrap()
    };
    let hartree = run(Nonlinearity::hartree(w.clone()), 0.3);
    let same = compare_one_body(&hartree, &hartree, &times).unwrap();
    assert!(same.differences.iter().all(|d| d.1 == 0.0));

    let scaled = run(
        Nonlinearity::scaled_hartree(&spec, 512, 0.0, &grid).unwrap(),
        0.3,
    );
    assert!(compare_one_body(&scaled, &hartree, &times).unwrap().sup < 1e-8);

    let nls0 = run(Nonlinearity::cubic(spec.integral(1).unwrap()), 0.0);
    let hartree0 = run(Nonlinearity::hartree(w.clone()), 0.0);
    assert!(compare_one_body(&nls0, &hartree0, &times).unwrap().sup < 1e-10);
    assert!(compare_one_body(&nls0, &hartree0, &[0.7]).is_err());
}

#[test]
fn decaying_series_is_uniform() {
    let series: Vec<(f64, f64)> = (0..=100)
        .map(|k| (k as f64 * 0.1, 2.0 / (1.0 + k as f64 * 0.1)))
        .collect();
    let u = uniformity_check(&series, 0.25).unwrap();
    assert!(u.uniform && u.sup_late < u.sup_early);
    let growing: Vec<(f64, f64)> = (0..=100).map(|k| (k as f64, 1.0 + k as f64)).collect();
    assert!(!uniformity_check(&growing, 0.25).unwrap().uniform);
}

proptest! {
    #[test]
    fn fit_rate_is_scale_invariant(
        exponent in -2.0f64..1.0,
        scale in 1e-6f64..1e6,
        wiggle in proptest::collection::vec(-0.2f64..0.2, 5),
    ) {
        let ns = [16.0, 64.0, 256.0, 1024.0, 4096.0];
        let samples: Vec<(f64, f64)> = ns.iter().zip(&wiggle).map(|(&n, w): (&f64, &f64)| (n, n.powf(exponent) * w.exp())).collect();
        let scaled: Vec<(f64, f64)> = samples.iter().map(|&(n, e)| (n, e * scale)).collect();
        let a = fit_rate(&samples).unwrap();
        let b = fit_rate(&scaled).unwrap();
        prop_assert!((a.exponent - b.exponent).abs() <= 1e-12 * a.exponent.abs().max(1.0));
        prop_assert!((b.intercept - a.intercept - scale.ln()).abs() <= 1e-9);
    }

    #[test]
    fn theorem_rate_never_exceeds_one_fifth_for_positive_beta(beta in 1e-12f64..(1.0 / 3.0 - 1e-12)) {
        let r = theorem_rate(beta).unwrap();
        prop_assert!(r <= 0.2 + 1e-15 && r > 0.0);
    }
}
