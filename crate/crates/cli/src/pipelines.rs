//! One function per experiment; each writes its artifacts through the sink
//! and returns a JSON summary for the result record.

use std::f64::consts::PI;
use std::sync::Arc;

use meanfield::analysis::{
    alternative_rate, compare_one_body, fit_rate, groenwall_bound, theorem_rate, uniform_nodes,
    uniformity_check,
};
use meanfield::io::csv_string;
use meanfield::manybody::{
    check_budget, condensate_fraction, evolve_manybody, product_state_with_budget, trace_distance,
    trace_records_csv, ManyBodyHamiltonian, ManyBodyOptions, TraceRecord,
};
use meanfield::onebody::{
    bootstrap_root, evolve_with, linear_decay_probe, measure_decay, EvolveOptions, Nonlinearity,
    OneBodyProblem,
};
use meanfield::potentials::{
    check_rollnik, sample_interaction, sample_potential, scaled_interaction, GLOBAL_KATO_THRESHOLD,
    ROLLNIK_THRESHOLD,
};
use meanfield::{make_grid, Field, Grid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{Experiment, ExperimentConfig, NonlinearityKind, Profile};
use crate::record::{PlotKind, RateFitRecord, Sink};
use crate::RunError;

type Result<T> = std::result::Result<T, RunError>;

pub fn run(cfg: &ExperimentConfig, experiment: Experiment, sink: &Sink) -> Result<Value> {
    match experiment {
        Experiment::Dispersive => dispersive(cfg, sink),
        Experiment::LinearDecay => linear_decay(cfg, sink),
        Experiment::Rollnik => rollnik(cfg, sink),
        Experiment::RateSweep => rate_sweep(cfg, sink),
        Experiment::ManybodyTrace => manybody_trace(cfg, sink),
        Experiment::GroenwallCert => groenwall_cert(cfg, sink),
        Experiment::Bootstrap => bootstrap(cfg, sink),
    }
}

/// Plot files emitted after a successful run.
pub fn plot_kinds(experiment: Experiment) -> &'static [PlotKind] {
    match experiment {
        Experiment::Dispersive => &[PlotKind::Decay],
        Experiment::RateSweep => &[PlotKind::Rate],
        Experiment::ManybodyTrace => &[PlotKind::Trace],
        _ => &[],
    }
}

fn grid_of(cfg: &ExperimentConfig) -> Result<Arc<Grid>> {
    // for_experiment guarantees presence for grid-based experiments
    let (d, n, l) = (
        cfg.dim.unwrap_or(1),
        cfg.grid_points.unwrap_or(0),
        cfg.box_length.unwrap_or(0.0),
    );
    Ok(make_grid(d, n, l)?)
}

fn t_max(cfg: &ExperimentConfig) -> f64 {
    cfg.t_max.unwrap_or(0.0)
}

/// Normalized initial datum from `[initial]`.
pub fn initial_profile(cfg: &ExperimentConfig, grid: &Arc<Grid>) -> Result<Field> {
    let s = &cfg.initial;
    let d = grid.dim();
    let center: Vec<f64> = (0..d)
        .map(|i| s.center.get(i).copied().unwrap_or(0.0))
        .collect();
    let bump = |c: &[f64]| {
        let c = c.to_vec();
        let sigma = s.sigma;
        move |x: &[f64]| {
            let r2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
            (-r2 / (4.0 * sigma * sigma)).exp()
        }
    };
    let field = match s.profile {
        Profile::Gaussian => Field::from_real_fn(grid, bump(&center)),
        Profile::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let parts: Vec<(Complex64, Vec<f64>)> = (0..4)
                .map(|_| {
                    let w =
                        Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                    let c = center
                        .iter()
                        .map(|c| c + s.sigma * rng.random_range(-1.0..1.0))
                        .collect();
                    (w, c)
                })
                .collect();
            let bumps: Vec<_> = parts.iter().map(|(w, c)| (*w, bump(c))).collect();
            Field::from_fn(grid, |x| bumps.iter().map(|(w, f)| w * f(x)).sum())
        }
    };
    Ok(field.normalized()?)
}

fn cubic_coefficient(cfg: &ExperimentConfig, grid: &Arc<Grid>) -> Result<f64> {
    if let Some(a) = cfg.interaction.integral(grid.dim()) {
        return Ok(a);
    }
    let w = sample_interaction(&cfg.interaction, grid)?;
    Ok(w.values().iter().map(|c| c.re).sum::<f64>() * grid.cell_volume())
}

fn nonlinearity(cfg: &ExperimentConfig, grid: &Arc<Grid>) -> Result<Nonlinearity> {
    let c = &cfg.coupling;
    Ok(match cfg.nonlinearity {
        NonlinearityKind::Hartree => {
            Nonlinearity::hartree(sample_interaction(&cfg.interaction, grid)?)
        }
        NonlinearityKind::ScaledHartree => {
            Nonlinearity::scaled_hartree(&cfg.interaction, c.particle_number, c.beta, grid)?
        }
        NonlinearityKind::Cubic => Nonlinearity::cubic(cubic_coefficient(cfg, grid)?),
    })
}

fn dispersive(cfg: &ExperimentConfig, sink: &Sink) -> Result<Value> {
    let grid = grid_of(cfg)?;
    let u0 = initial_profile(cfg, &grid)?;
    let v = sample_potential(&cfg.potential, &grid)?.field;
    let problem = OneBodyProblem::new(u0, v, nonlinearity(cfg, &grid)?, cfg.coupling.lambda)?;
    let opts = EvolveOptions::new(t_max(cfg), cfg.dt).record_every(cfg.snapshot_stride);
    let traj = evolve_with(&problem, &opts)?;
    sink.write(
        "trajectory",
        "trajectory.csv",
        None,
        traj.to_csv().as_bytes(),
    )?;

    let exponent = 0.5 * grid.dim() as f64;
    let decay = measure_decay(&traj, exponent)?;
    let rows: Vec<[f64; 2]> = decay.points.iter().map(|&(t, w)| [t, w]).collect();
    sink.write(
        "decay",
        "decay.csv",
        None,
        csv_string("t,weighted_sup", rows.iter().map(|r| r.as_slice())).as_bytes(),
    )?;
    let u = uniformity_check(&decay.points, cfg.uniformity_split)?;
    Ok(json!({
        "decay_exponent": exponent,
        "weighted_sup": decay.sup(),
        "uniformity_split": cfg.uniformity_split,
        "sup_early": u.sup_early,
        "sup_late": u.sup_late,
        "uniform": u.uniform,
        "mass_drift": traj.mass_drift(),
        "relative_energy_drift": traj.relative_energy_drift(),
        "lambda": cfg.coupling.lambda,
        "warnings": traj.warnings,
    }))
}

fn linear_decay(cfg: &ExperimentConfig, sink: &Sink) -> Result<Value> {
    let grid = grid_of(cfg)?;
    let f = initial_profile(cfg, &grid)?;
    let v = sample_potential(&cfg.potential, &grid)?.field;
    let probe = linear_decay_probe(&v, &f, &cfg.linear_decay.times, cfg.dt)?;
    let rows: Vec<[f64; 2]> = probe.ratios.iter().map(|&(t, r)| [t, r]).collect();
    sink.write(
        "ratios",
        "ratios.csv",
        None,
        csv_string("t,ratio", rows.iter().map(|r| r.as_slice())).as_bytes(),
    )?;
    let summary = json!({
        "empirical_cv": probe.empirical_cv,
        "free_constant": (4.0 * PI).powf(-0.5 * grid.dim() as f64),
        "times": cfg.linear_decay.times,
    });
    sink.write_json("summary", "summary.json", None, &summary)?;
    Ok(summary)
}

fn rollnik(cfg: &ExperimentConfig, sink: &Sink) -> Result<Value> {
    let grid = grid_of(cfg)?;
    let report = check_rollnik(&cfg.potential, &grid)?;
    let summary = json!({
        "rollnik_integral": report.rollnik_integral,
        "rollnik_threshold": ROLLNIK_THRESHOLD,
        "global_kato_integral": report.global_kato_integral,
        "global_kato_threshold": GLOBAL_KATO_THRESHOLD,
        "admissible": report.admissible,
    });
    sink.write_json("admissibility", "admissibility.json", None, &summary)?;
    Ok(summary)
}

fn rate_sweep(cfg: &ExperimentConfig, sink: &Sink) -> Result<Value> {
    let grid = grid_of(cfg)?;
    let u0 = initial_profile(cfg, &grid)?;
    let v = sample_potential(&cfg.potential, &grid)?.field;
    let lambda = cfg.coupling.lambda;
    let opts = EvolveOptions::new(t_max(cfg), cfg.dt)
        .snapshot_every(cfg.snapshot_stride)
        .record_every(cfg.snapshot_stride);
    let limit = OneBodyProblem::new(
        u0.clone(),
        v.clone(),
        Nonlinearity::cubic(cubic_coefficient(cfg, &grid)?),
        lambda,
    )?;
    let phi = evolve_with(&limit, &opts)?;
    let times: Vec<f64> = phi.snapshots.iter().map(|s| s.t).collect();

    let cells: Vec<(f64, u64)> = cfg
        .particle_schedule()
        .into_iter()
        .flat_map(|n| cfg.beta_schedule().into_iter().map(move |b| (b, n)))
        .collect();
    let errors: Vec<f64> = cells
        .par_iter()
        .map(|&(beta, n)| -> Result<f64> {
            let nl = Nonlinearity::scaled_hartree(&cfg.interaction, n, beta, &grid)?;
            let u = evolve_with(
                &OneBodyProblem::new(u0.clone(), v.clone(), nl, lambda)?,
                &opts,
            )?;
            let sup = compare_one_body(&u, &phi, &times)?.sup;
            log::info!("rate-sweep cell beta={beta} N={n}: sup error {sup:.3e}");
            Ok(sup)
        })
        .collect::<Result<_>>()?;

    let mut fits = Vec::new();
    for beta in cfg.beta_schedule() {
        let mut samples: Vec<(f64, f64)> = cells
            .iter()
            .zip(&errors)
            .filter(|((b, _), _)| *b == beta)
            .map(|((_, n), e)| (*n as f64, *e))
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        let rows: Vec<[f64; 2]> = samples.iter().map(|&(n, e)| [n, e]).collect();
        let label = Some(format!("{beta}"));
        sink.write(
            "errors",
            &format!("beta{beta}_errors.csv"),
            label.clone(),
            csv_string("N,error", rows.iter().map(|r| r.as_slice())).as_bytes(),
        )?;
        let fit = fit_rate(&samples)?;
        let record = RateFitRecord {
            beta,
            predicted_exponent: -beta,
            fitted_exponent: fit.exponent,
            intercept: fit.intercept,
            residual_rms: fit.residual_rms,
            samples,
            theorem_exponent: -theorem_rate(beta)?,
            alternative_exponent: alternative_rate(beta, cfg.interaction.decay_exponent)
                .ok()
                .map(|r| -r),
        };
        sink.write_json("rate_fit", &format!("beta{beta}_fit.json"), label, &record)?;
        fits.push(record);
    }
    Ok(json!({ "lambda": lambda, "fits": fits }))
}

fn manybody_trace(cfg: &ExperimentConfig, sink: &Sink) -> Result<Value> {
    let grid = grid_of(cfg)?;
    let schedule = cfg.particle_schedule();
    // largest N first, so an oversized sweep is rejected before any work is done
    for &n in &schedule {
        check_budget(&grid, n as usize, cfg.amplitude_budget)?;
    }
    let u0 = initial_profile(cfg, &grid)?;
    let v = sample_potential(&cfg.potential, &grid)?.field;
    let (lambda, beta) = (cfg.coupling.lambda, cfg.coupling.beta);
    let stride = cfg.snapshot_stride;

    let cells: Vec<Value> = schedule
        .par_iter()
        .map(|&n| -> Result<Value> {
            let w = scaled_interaction(&cfg.interaction, n, beta, &grid)?;
            let mf_opts = EvolveOptions::new(t_max(cfg), cfg.dt)
                .snapshot_every(stride)
                .record_every(stride);
            let phi = evolve_with(
                &OneBodyProblem::new(
                    u0.clone(),
                    v.clone(),
                    Nonlinearity::hartree(w.clone()),
                    lambda,
                )?,
                &mf_opts,
            )?;
            let ham = ManyBodyHamiltonian::new(n as usize, &v, &w, lambda)?;
            let state = product_state_with_budget(&u0, n as usize, cfg.amplitude_budget)?;
            let opts = ManyBodyOptions::new(t_max(cfg), cfg.dt)
                .record_every(stride)
                .with_densities();
            let run = evolve_manybody(&state, &ham, &opts)?;
            let mut records = Vec::with_capacity(run.densities.len());
            for ((t, gamma), rec) in run.densities.iter().zip(&run.records) {
                let mf = phi.snapshot_at(*t).ok_or_else(|| {
                    meanfield::Error::InvalidArgument(format!(
                        "mean-field snapshot missing at t = {t}"
                    ))
                })?;
                records.push(TraceRecord {
                    t: *t,
                    trace_distance: trace_distance(gamma, mf)?,
                    condensate_fraction: condensate_fraction(gamma),
                    mass: rec.mass,
                    energy: rec.energy,
                });
            }
            sink.write(
                "trace",
                &format!("N{n}_trace.csv"),
                Some(n.to_string()),
                trace_records_csv(&records).as_bytes(),
            )?;
            let sup = records.iter().fold(0.0f64, |m, r| m.max(r.trace_distance));
            log::info!("manybody-trace N={n}: sup trace distance {sup:.3e}");
            Ok(json!({
                "particles": n,
                "sup_trace_distance": sup,
                "mass_drift": run.mass_drift(),
                "relative_energy_drift": run.relative_energy_drift(),
                "max_symmetry_defect": run.max_symmetry_defect(),
            }))
        })
        .collect::<Result<_>>()?;

    let samples: Vec<(f64, f64)> = cells
        .iter()
        .map(|c| {
            (
                c["particles"].as_f64().unwrap_or(0.0),
                c["sup_trace_distance"].as_f64().unwrap_or(0.0),
            )
        })
        .collect();
    // a fit is only meaningful with an interaction and enough distinct N
    let fit = if lambda != 0.0 {
        fit_rate(&samples).ok()
    } else {
        None
    };
    Ok(json!({
        "lambda": lambda,
        "beta": beta,
        "cells": cells,
        "fitted_exponent": fit.as_ref().map(|f| f.exponent),
        "residual_rms": fit.as_ref().map(|f| f.residual_rms),
    }))
}

fn groenwall_cert(cfg: &ExperimentConfig, sink: &Sink) -> Result<Value> {
    let g = cfg.groenwall.clone();
    let nodes = uniform_nodes(t_max(cfg), g.node_spacing);
    let cert = groenwall_bound(
        |t| g.alpha_scale * (1.0 + t).powf(-g.alpha_power),
        |t| g.eps_scale * (1.0 + t).powf(-g.eps_power),
        g.phi0,
        &nodes,
    )?;
    sink.write(
        "certificate",
        "certificate.csv",
        None,
        cert.to_csv().as_bytes(),
    )?;
    Ok(json!({
        "verified": cert.verify(),
        "nodes": nodes.len(),
        "final_bound": cert.bound_values.last(),
        "max_bound": cert.bound_values.iter().fold(0.0f64, |m, &b| m.max(b)),
    }))
}

fn bootstrap(cfg: &ExperimentConfig, sink: &Sink) -> Result<Value> {
    let b = &cfg.bootstrap;
    let root = bootstrap_root(b.eps, b.c)?;
    let summary = json!({
        "eps": b.eps,
        "c": b.c,
        "discriminant": 27.0 * b.c * b.eps * b.eps,
        "root": root,
    });
    sink.write_json("root", "root.json", None, &summary)?;
    Ok(summary)
}
