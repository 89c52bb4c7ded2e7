use std::fs;
use std::path::Path;

use meanfield_cli::config::{parse_config, Experiment};
use meanfield_cli::record::{emit_plotdata, PlotKind, RateFitRecord, ResultRecord, Status};
use meanfield_cli::{run_experiment, RunError, RunOptions};

fn run(text: &str, experiment: Experiment, out: &Path) -> Result<ResultRecord, RunError> {
    let opts = RunOptions {
        out: Some(out.to_path_buf()),
        ..Default::default()
    };
    run_experiment(parse_config(text).unwrap(), experiment, &opts)
}

fn artifact<'a>(record: &'a ResultRecord, kind: &str) -> &'a Path {
    &record
        .artifacts
        .iter()
        .find(|a| a.kind == kind)
        .unwrap_or_else(|| panic!("no {kind} artifact"))
        .path
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().parse().unwrap())
        .collect()
}

const SMALL_DISPERSIVE: &str = "\
dim = 1
grid_points = 256
box_length = 64.0
t_max = 2.0
dt = 0.01
snapshot_stride = 5

[potential]
family = \"gaussian_bump\"
amplitude = 0.5

[coupling]
lambda = 0.05
";

#[test]
fn bootstrap_root_json() {
    let dir = tempfile::tempdir().unwrap();
    let record = run(
        "[bootstrap]\neps = 0.1\nc = 8.0\n",
        Experiment::Bootstrap,
        dir.path(),
    )
    .unwrap();
    assert_eq!(record.status, Status::Completed);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(artifact(&record, "root")).unwrap()).unwrap();
    let root = json["root"].as_f64().unwrap();
    assert!((root - 0.110916).abs() < 1e-6, "root {root}");

    let on_disk = ResultRecord::load(artifact(&record, "record")).unwrap();
    assert_eq!(on_disk, record);
    assert_eq!(on_disk.software_version, env!("CARGO_PKG_VERSION"));
    assert!(on_disk.finished >= on_disk.started);
}

#[test]
fn failed_run_leaves_marker_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let err = run(
        "[bootstrap]\neps = 0.5\nc = 8.0\n",
        Experiment::Bootstrap,
        dir.path(),
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 3);
    assert!(dir.path().join("bootstrap_FAILED").exists());
    let record = ResultRecord::load(&dir.path().join("bootstrap_record.json")).unwrap();
    assert_eq!(record.status, Status::Failed);
    assert!(record.error.unwrap().contains("no bounded bootstrap"));

    // a later successful run clears the marker
    run(
        "[bootstrap]\neps = 0.1\nc = 8.0\n",
        Experiment::Bootstrap,
        dir.path(),
    )
    .unwrap();
    assert!(!dir.path().join("bootstrap_FAILED").exists());
}

#[test]
fn manybody_trace_without_interaction_factorizes() {
    let dir = tempfile::tempdir().unwrap();
    let text = "\
dim = 1
grid_points = 16
box_length = 4.0
t_max = 0.5
dt = 0.005
snapshot_stride = 10

[potential]
family = \"gaussian_bump\"
amplitude = 0.5

[coupling]
lambda = 0.0

[sweep]
particles = [2, 3]

[initial]
sigma = 0.4
";
    let record = run(text, Experiment::ManybodyTrace, dir.path()).unwrap();
    let traces: Vec<_> = record
        .artifacts
        .iter()
        .filter(|a| a.kind == "trace")
        .collect();
    assert_eq!(traces.len(), 2);
    for art in traces {
        let d = csv_column(&art.path, "trace_distance");
        assert_eq!(d.len(), 11);
        assert!(d.iter().all(|&x| x < 1e-8), "{d:?}");
        let mass = csv_column(&art.path, "mass");
        assert!(mass.iter().all(|m| (m - 1.0).abs() < 1e-10));
    }
    assert!(record.summary["fitted_exponent"].is_null());

    let plot = fs::read_to_string(artifact(&record, "plot_trace")).unwrap();
    assert!(plot.starts_with("# t trace_distance\n"));
    assert!(plot.contains("# N = 2\n") && plot.contains("# N = 3\n"));
    let data: Vec<&str> = plot
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .collect();
    assert_eq!(data.len(), 22);
    assert!(data.iter().all(|l| l.split_whitespace().count() == 2));
}

#[test]
fn manybody_budget_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let text = "dim = 1\ngrid_points = 64\nbox_length = 8.0\nt_max = 0.1\namplitude_budget = 1000000\n[sweep]\nparticles = [2, 4]\n";
    let err = run(text, Experiment::ManybodyTrace, dir.path()).unwrap_err();
    assert_eq!(err.exit_code(), 4);
    assert!(err.to_string().contains("N <= 3"), "{err}");
    let record = ResultRecord::load(&dir.path().join("manybody_trace_record.json")).unwrap();
    assert!(record.artifacts.is_empty());
}

#[test]
fn dispersive_outputs_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let record = run(SMALL_DISPERSIVE, Experiment::Dispersive, dir.path()).unwrap();
    let t = csv_column(artifact(&record, "decay"), "t");
    let w = csv_column(artifact(&record, "decay"), "weighted_sup");
    assert_eq!(t.len(), 41);
    assert!((t[40] - 2.0).abs() < 1e-12);
    assert!(
        (record.summary["weighted_sup"].as_f64().unwrap() - w.iter().cloned().fold(0.0, f64::max))
            .abs()
            < 1e-15
    );
    assert!(record.summary["mass_drift"].as_f64().unwrap() < 1e-9);

    let plot = fs::read_to_string(artifact(&record, "plot_decay")).unwrap();
    let mut lines = plot.lines();
    assert_eq!(lines.next(), Some("# t weighted_sup"));
    let first: Vec<f64> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|s| s.parse().unwrap())
        .collect();
    assert_eq!(first, [t[0], w[0]]);
}

#[test]
fn identical_configs_give_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run(SMALL_DISPERSIVE, Experiment::Dispersive, a.path()).unwrap();
    let rb = run(SMALL_DISPERSIVE, Experiment::Dispersive, b.path()).unwrap();
    assert_eq!(ra.config_hash, rb.config_hash);
    for kind in ["decay", "trajectory"] {
        assert_eq!(
            fs::read(artifact(&ra, kind)).unwrap(),
            fs::read(artifact(&rb, kind)).unwrap()
        );
    }
}

#[test]
fn random_profile_follows_seed() {
    let text = format!("{SMALL_DISPERSIVE}[initial]\nprofile = \"random\"\n");
    let cfg = parse_config(&text).unwrap();
    let dirs: Vec<_> = (0..3).map(|_| tempfile::tempdir().unwrap()).collect();
    let runs: Vec<ResultRecord> = [1u64, 1, 2]
        .iter()
        .zip(&dirs)
        .map(|(&seed, d)| {
            let opts = RunOptions {
                out: Some(d.path().to_path_buf()),
                seed: Some(seed),
                workers: None,
            };
            run_experiment(cfg.clone(), Experiment::Dispersive, &opts).unwrap()
        })
        .collect();
    let decay = |r: &ResultRecord| fs::read(artifact(r, "decay")).unwrap();
    assert_eq!(decay(&runs[0]), decay(&runs[1]));
    assert_ne!(decay(&runs[0]), decay(&runs[2]));
    assert_eq!(runs[0].config_hash, runs[1].config_hash);
    assert_ne!(runs[0].config_hash, runs[2].config_hash);
}

const SMALL_SWEEP: &str = "\
dim = 1
grid_points = 512
box_length = 64.0
t_max = 1.0
dt = 0.01
snapshot_stride = 20

[coupling]
lambda = 0.05

[sweep]
particles = [4, 16, 64]
betas = [0.1, 0.2]

[initial]
sigma = 2.0
";

#[test]
fn rate_sweep_fit_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let record = run(SMALL_SWEEP, Experiment::RateSweep, dir.path()).unwrap();
    let fits: Vec<RateFitRecord> = record
        .artifacts
        .iter()
        .filter(|a| a.kind == "rate_fit")
        .map(|a| serde_json::from_str(&fs::read_to_string(&a.path).unwrap()).unwrap())
        .collect();
    assert_eq!(fits.len(), 2);
    for fit in &fits {
        assert_eq!(fit.predicted_exponent, -fit.beta);
        assert_eq!(fit.samples.len(), 3);
        assert!(fit.samples.windows(2).all(|w| w[0].0 < w[1].0));
        // the error shrinks as the kernel approaches its delta limit
        assert!(fit.fitted_exponent < 0.0, "{fit:?}");
        assert!(fit.alternative_exponent.is_some());
    }

    let plot = fs::read_to_string(artifact(&record, "plot_rate")).unwrap();
    assert!(plot.starts_with("# log10_N log10_error fitted_line\n"));
    let rows: Vec<Vec<f64>> = plot
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| l.split_whitespace().map(|s| s.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 6);
    for (row, fit) in rows
        .iter()
        .zip(fits.iter().flat_map(|f| std::iter::repeat_n(f, 3)))
    {
        let predicted = fit.intercept / std::f64::consts::LN_10 + fit.fitted_exponent * row[0];
        assert!((row[2] - predicted).abs() < 1e-12);
    }
}

#[test]
fn worker_count_does_not_change_numbers() {
    let samples = |workers: usize| {
        let dir = tempfile::tempdir().unwrap();
        let opts = RunOptions {
            out: Some(dir.path().to_path_buf()),
            seed: None,
            workers: Some(workers),
        };
        let record = run_experiment(
            parse_config(SMALL_SWEEP).unwrap(),
            Experiment::RateSweep,
            &opts,
        )
        .unwrap();
        record.summary["fits"]
            .as_array()
            .unwrap()
            .iter()
            .flat_map(|f| {
                f["samples"]
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|s| s[1].as_f64().unwrap())
                    .collect::<Vec<_>>()
            })
            .collect::<Vec<f64>>()
    };
    let one = samples(1);
    let two = samples(2);
    for (a, b) in one.iter().zip(&two) {
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0), "{a} vs {b}");
    }
}

#[test]
fn rollnik_and_groenwall_pipelines() {
    let dir = tempfile::tempdir().unwrap();
    let text = "dim = 3\ngrid_points = 16\nbox_length = 8.0\n[potential]\nfamily = \"gaussian_bump\"\namplitude = 0.5\n";
    let record = run(text, Experiment::Rollnik, dir.path()).unwrap();
    assert_eq!(record.summary["admissible"], serde_json::Value::Bool(true));
    assert!(artifact(&record, "admissibility").exists());

    let text = "t_max = 2.0\n[groenwall]\nphi0 = 0.01\nalpha_scale = 1.0\nalpha_power = 0.0\neps_scale = 0.0\nnode_spacing = 0.001\n";
    let record = run(text, Experiment::GroenwallCert, dir.path()).unwrap();
    assert_eq!(record.summary["verified"], serde_json::Value::Bool(true));
    // constant α = 1 and ε = 0 give φ0 e^t
    let bound = record.summary["final_bound"].as_f64().unwrap();
    assert!((bound - 0.01 * 2f64.exp()).abs() < 1e-12, "{bound}");
}

#[test]
fn linear_decay_without_potential_matches_gaussian_spreading() {
    let dir = tempfile::tempdir().unwrap();
    let text =
        "dim = 1\ngrid_points = 4096\nbox_length = 512.0\n[linear_decay]\ntimes = [20.0, 40.0]\n";
    let record = run(text, Experiment::LinearDecay, dir.path()).unwrap();
    // for exp(-x²/4) the ratio is (4π)^{-1/2} (t²/(1+t²))^{1/4}
    let exact =
        |t: f64| (4.0 * std::f64::consts::PI).powf(-0.5) * (t * t / (1.0 + t * t)).powf(0.25);
    let cv = record.summary["empirical_cv"].as_f64().unwrap();
    assert!((cv - exact(40.0)).abs() < 1e-9, "{cv} vs {}", exact(40.0));
    let ratios = csv_column(artifact(&record, "ratios"), "ratio");
    assert!((ratios[0] - exact(20.0)).abs() < 1e-9);
    assert_eq!(csv_column(artifact(&record, "ratios"), "t"), [20.0, 40.0]);
}

#[test]
fn plotdata_requires_payload() {
    let dir = tempfile::tempdir().unwrap();
    let record = run("", Experiment::Bootstrap, dir.path()).unwrap();
    for kind in [PlotKind::Decay, PlotKind::Rate, PlotKind::Trace] {
        assert!(matches!(
            emit_plotdata(&record, kind),
            Err(RunError::MissingPayload(_))
        ));
    }
}
