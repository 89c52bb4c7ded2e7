use std::fs;
use std::path::PathBuf;

use meanfield_cli::config::{parse_config, ConfigError, Experiment, NonlinearityKind};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

const MINIMAL: &str = "dim = 1\ngrid_points = 256\nbox_length = 128.0\nt_max = 40.0\n";

#[test]
fn shipped_configs_parse() {
    let mut seen = Vec::new();
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = parse_config(&fs::read_to_string(&path).unwrap())
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            let exp = cfg
                .experiment
                .expect("shipped configs name their experiment");
            cfg.for_experiment(exp)
                .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen.push(exp);
        }
    }
    seen.sort();
    assert_eq!(seen, Experiment::ALL);
}

#[test]
fn minimal_dispersive_config() {
    let cfg = parse_config(MINIMAL)
        .unwrap()
        .for_experiment(Experiment::Dispersive)
        .unwrap();
    assert_eq!(
        (cfg.dim, cfg.grid_points, cfg.box_length, cfg.t_max),
        (Some(1), Some(256), Some(128.0), Some(40.0))
    );
    assert_eq!(cfg.nonlinearity, NonlinearityKind::Hartree);
}

#[test]
fn beta_out_of_range_cites_bound() {
    let err =
        parse_config(&format!("{MINIMAL}[coupling]\nlambda = 0.05\nbeta = 0.4\n")).unwrap_err();
    let errors = err.field_errors();
    assert_eq!(errors.len(), 1);
    assert_eq!(errors[0].field, "coupling.beta");
    assert!(
        errors[0].message.contains("beta < 1/3"),
        "{}",
        errors[0].message
    );

    let err = parse_config(&format!("{MINIMAL}[sweep]\nbetas = [0.1, 0.4]\n")).unwrap_err();
    assert_eq!(err.field_errors()[0].field, "sweep.betas[1]");
    assert!(err.to_string().contains("beta < 1/3"));
}

#[test]
fn unknown_keys_are_named() {
    let err = parse_config(&format!(
        "{MINIMAL}[coupling]\nlambda = 0.05\nbetaa = 0.2\n"
    ))
    .unwrap_err();
    assert!(matches!(err, ConfigError::Syntax(_)));
    assert!(err.to_string().contains("betaa"), "{err}");

    let err = parse_config(&format!("{MINIMAL}grid_pionts = 64\n")).unwrap_err();
    assert!(err.to_string().contains("grid_pionts"), "{err}");

    let err = parse_config(&format!(
        "{MINIMAL}[potential]\nfamily = \"gaussian_bump\"\nwidht = 1.0\n"
    ))
    .unwrap_err();
    assert!(err.to_string().contains("widht"), "{err}");
}

#[test]
fn unknown_experiment_is_rejected() {
    let err = parse_config(&format!("experiment = \"dispersion\"\n{MINIMAL}")).unwrap_err();
    assert!(err.to_string().contains("dispersion"), "{err}");
}

#[test]
fn missing_required_fields_are_listed() {
    let err = parse_config("dim = 1\n")
        .unwrap()
        .for_experiment(Experiment::Dispersive)
        .unwrap_err();
    let fields: Vec<&str> = err
        .field_errors()
        .iter()
        .map(|e| e.field.as_str())
        .collect();
    assert_eq!(fields, ["grid_points", "box_length", "t_max"]);

    // bootstrap needs no grid at all
    parse_config("")
        .unwrap()
        .for_experiment(Experiment::Bootstrap)
        .unwrap();
}

#[test]
fn rate_sweep_needs_three_particle_numbers() {
    let cfg = parse_config(&format!("{MINIMAL}[sweep]\nparticles = [16, 64, 64]\n")).unwrap();
    let err = cfg.for_experiment(Experiment::RateSweep).unwrap_err();
    assert_eq!(err.field_errors()[0].field, "sweep.particles");
}

#[test]
fn rollnik_requires_three_dimensions() {
    let err = parse_config(MINIMAL)
        .unwrap()
        .for_experiment(Experiment::Rollnik)
        .unwrap_err();
    assert_eq!(err.field_errors()[0].field, "dim");
}

#[test]
fn hash_ignores_layout_and_comments() {
    let a = parse_config(&format!("{MINIMAL}[coupling]\nlambda = 0.05\n")).unwrap();
    let b = parse_config(
        "box_length=128.0\n\n# grid\ngrid_points = 256   \ndim=1\nt_max = 4e1\n[coupling]\n  lambda   =  5e-2   # tiny\n",
    )
    .unwrap();
    assert_eq!(a.config_hash(), b.config_hash());
    assert_eq!(a.config_hash().len(), 64);
}

#[test]
fn hash_fills_defaults_before_hashing() {
    let a = parse_config(MINIMAL).unwrap();
    let b = parse_config(&format!(
        "{MINIMAL}dt = 0.01\nsnapshot_stride = 10\n[initial]\nsigma = 1.0\n"
    ))
    .unwrap();
    assert_eq!(a.config_hash(), b.config_hash());
}

#[test]
fn hash_tracks_every_semantic_field() {
    let base = parse_config(MINIMAL).unwrap().config_hash();
    for extra in [
        "dt = 0.02\n",
        "seed = 1\n",
        "nonlinearity = \"cubic\"\n",
        "[coupling]\nlambda = 0.1\n",
        "[potential]\nfamily = \"gaussian_bump\"\namplitude = 0.5\n",
        "[interaction]\nfamily = \"gaussian\"\nwidth = 2.0\n",
        "[initial]\nsigma = 2.0\n",
        "[sweep]\nparticles = [2]\n",
    ] {
        let other = parse_config(&format!("{MINIMAL}{extra}"))
            .unwrap()
            .config_hash();
        assert_ne!(base, other, "hash unchanged by {extra:?}");
    }
    let moved = parse_config(&format!("{MINIMAL}output_dir = \"/tmp/elsewhere\"\n"))
        .unwrap()
        .config_hash();
    assert_eq!(base, moved);
}
