//! Experiment orchestration for the `meanfield` solvers.
//!
//! A run reads a TOML config, executes one named pipeline, writes its CSV and
//! JSON artifacts atomically into the output directory and finishes with a
//! [`record::ResultRecord`] describing what was produced.

pub mod config;
pub mod pipelines;
pub mod record;

use std::io;
use std::path::PathBuf;

use config::{ConfigError, Experiment, ExperimentConfig};
use record::{unix_now, ResultRecord, Sink, Status, SOFTWARE_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] meanfield::Error),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("missing payload: {0}")]
    MissingPayload(String),
}

impl RunError {
    /// Process exit status: 2 config, 3 numerical failure, 4 resource
    /// rejection, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Model(e)
                if e.is_numerical() || matches!(e, meanfield::Error::NoBootstrapRoot { .. }) =>
            {
                3
            }
            RunError::Model(e) if e.is_resource() => 4,
            RunError::Model(_) => 2,
            RunError::Io(_) | RunError::MissingPayload(_) => 1,
        }
    }
}

/// Command-line overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    /// Worker threads for sweep cells; `None` lets rayon decide.
    pub workers: Option<usize>,
}

impl RunOptions {
    pub fn apply(&self, mut cfg: ExperimentConfig) -> ExperimentConfig {
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg
    }
}

/// Runs `experiment` and writes `<output_dir>/<experiment>_record.json`.
///
/// On failure the record is still written, with status `failed` and the
/// artifacts flushed so far, next to a `<experiment>_FAILED` marker.
pub fn run_experiment(
    cfg: ExperimentConfig,
    experiment: Experiment,
    opts: &RunOptions,
) -> Result<ResultRecord, RunError> {
    let cfg = opts.apply(cfg).for_experiment(experiment)?;
    let sink = Sink::new(&cfg.output_dir, experiment);
    let marker = sink.path_for("FAILED");
    if marker.exists() {
        std::fs::remove_file(&marker)?;
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = opts.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(io::Error::other)?;

    let started = unix_now();
    log::info!("running {experiment} with config {}", cfg.config_hash());
    let outcome = pool.install(|| pipelines::run(&cfg, experiment, &sink));
    let mut record = ResultRecord {
        config_hash: cfg.config_hash(),
        experiment,
        started,
        finished: unix_now(),
        software_version: SOFTWARE_VERSION.to_string(),
        status: Status::Completed,
        artifacts: Vec::new(),
        summary: serde_json::Value::Null,
        error: None,
    };
    match outcome {
        Ok(summary) => {
            record.summary = summary;
            record.artifacts = sink.artifacts();
            for kind in pipelines::plot_kinds(experiment) {
                let path = record::emit_plotdata(&record, *kind)?;
                record.artifacts.push(record::Artifact {
                    kind: format!("plot_{kind}"),
                    path,
                    label: None,
                });
            }
            let path = sink.path_for("record.json");
            record.artifacts.push(record::Artifact {
                kind: "record".into(),
                path,
                label: None,
            });
            sink.write_json("record", "record.json", None, &record)?;
            Ok(record)
        }
        Err(err) => {
            record.status = Status::Failed;
            record.error = Some(err.to_string());
            record.artifacts = sink.artifacts();
            sink.write_json("record", "record.json", None, &record)?;
            meanfield::io::write_atomic(&marker, format!("{err}\n").as_bytes())?;
            Err(err)
        }
    }
}
