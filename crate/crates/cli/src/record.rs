//! Result records, atomic artifact writes and plot-data export.

use std::fmt;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use meanfield::io::{fmt_f64, write_atomic};
use serde::{Deserialize, Serialize};

use crate::config::Experiment;
use crate::RunError;

pub const SOFTWARE_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Completed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// What the file holds, e.g. `decay` or `rate_fit`.
    pub kind: String,
    pub path: PathBuf,
    /// Particle number or `β` for per-cell artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub config_hash: String,
    pub experiment: Experiment,
    /// Seconds since the Unix epoch.
    pub started: f64,
    pub finished: f64,
    pub software_version: String,
    pub status: Status,
    pub artifacts: Vec<Artifact>,
    pub summary: serde_json::Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ResultRecord {
    pub fn artifacts_of<'a>(&'a self, kind: &'a str) -> impl Iterator<Item = &'a Artifact> + 'a {
        self.artifacts.iter().filter(move |a| a.kind == kind)
    }

    pub fn load(path: &Path) -> Result<ResultRecord, RunError> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| RunError::Io(io::Error::new(io::ErrorKind::InvalidData, e)))
    }
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Collects the files an experiment writes so a failed run can still list them.
pub struct Sink {
    dir: PathBuf,
    prefix: String,
    written: Mutex<Vec<Artifact>>,
}

impl Sink {
    pub fn new(dir: &Path, experiment: Experiment) -> Self {
        Sink {
            dir: dir.to_path_buf(),
            prefix: experiment.name().replace('-', "_"),
            written: Mutex::new(Vec::new()),
        }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}_{suffix}", self.prefix))
    }

    pub fn write(
        &self,
        kind: &str,
        suffix: &str,
        label: Option<String>,
        contents: &[u8],
    ) -> io::Result<PathBuf> {
        let path = self.path_for(suffix);
        write_atomic(&path, contents)?;
        self.written.lock().unwrap().push(Artifact {
            kind: kind.into(),
            path: path.clone(),
            label,
        });
        Ok(path)
    }

    pub fn write_json(
        &self,
        kind: &str,
        suffix: &str,
        label: Option<String>,
        value: &impl Serialize,
    ) -> io::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value).map_err(io::Error::other)?;
        text.push('\n');
        self.write(kind, suffix, label, text.as_bytes())
    }

    /// Written artifacts, in a stable order.
    pub fn artifacts(&self) -> Vec<Artifact> {
        let mut out = self.written.lock().unwrap().clone();
        out.sort_by(|a, b| a.path.cmp(&b.path));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Decay,
    Rate,
    Trace,
}

impl fmt::Display for PlotKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlotKind::Decay => "decay",
            PlotKind::Rate => "rate",
            PlotKind::Trace => "trace",
        })
    }
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), RunError> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .unwrap_or_default()
        .split(',')
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let row: Result<Vec<f64>, _> = line.split(',').map(str::parse).collect();
        rows.push(row.map_err(|e| RunError::Io(io::Error::new(io::ErrorKind::InvalidData, e)))?);
    }
    Ok((header, rows))
}

fn column(header: &[String], name: &str, path: &Path) -> Result<usize, RunError> {
    header.iter().position(|h| h == name).ok_or_else(|| {
        RunError::MissingPayload(format!("{} has no `{name}` column", path.display()))
    })
}

/// Writes a whitespace-separated series for external plotting and returns its path.
///
/// Column names are given on a header line starting with `#`. Multi-series
/// kinds separate their blocks with a blank line and a `# N = ...` or
/// `# beta = ...` label.
pub fn emit_plotdata(record: &ResultRecord, kind: PlotKind) -> Result<PathBuf, RunError> {
    let missing = || RunError::MissingPayload(format!("record has no {kind} payload"));
    let mut out = String::new();
    let anchor = match kind {
        PlotKind::Decay => {
            let art = record.artifacts_of("decay").next().ok_or_else(missing)?;
            let (header, rows) = read_csv(&art.path)?;
            let (t, w) = (
                column(&header, "t", &art.path)?,
                column(&header, "weighted_sup", &art.path)?,
            );
            out.push_str("# t weighted_sup\n");
            for r in &rows {
                out.push_str(&format!("{} {}\n", fmt_f64(r[t]), fmt_f64(r[w])));
            }
            art.path.clone()
        }
        PlotKind::Rate => {
            let fits: Vec<&Artifact> = record.artifacts_of("rate_fit").collect();
            if fits.is_empty() {
                return Err(missing());
            }
            out.push_str("# log10_N log10_error fitted_line\n");
            for (i, art) in fits.iter().enumerate() {
                let fit: RateFitRecord = serde_json::from_str(&fs::read_to_string(&art.path)?)
                    .map_err(|e| RunError::Io(io::Error::new(io::ErrorKind::InvalidData, e)))?;
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&format!("# beta = {}\n", fit.beta));
                for &(n, err) in &fit.samples {
                    let line =
                        fit.fitted_exponent * n.log10() + fit.intercept / std::f64::consts::LN_10;
                    out.push_str(&format!(
                        "{} {} {}\n",
                        fmt_f64(n.log10()),
                        fmt_f64(err.log10()),
                        fmt_f64(line)
                    ));
                }
            }
            fits[0].path.clone()
        }
        PlotKind::Trace => {
            let traces: Vec<&Artifact> = record.artifacts_of("trace").collect();
            if traces.is_empty() {
                return Err(missing());
            }
            out.push_str("# t trace_distance\n");
            for (i, art) in traces.iter().enumerate() {
                let (header, rows) = read_csv(&art.path)?;
                let (t, d) = (
                    column(&header, "t", &art.path)?,
                    column(&header, "trace_distance", &art.path)?,
                );
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&format!("# N = {}\n", art.label.as_deref().unwrap_or("?")));
                for r in &rows {
                    out.push_str(&format!("{} {}\n", fmt_f64(r[t]), fmt_f64(r[d])));
                }
            }
            traces[0].path.clone()
        }
    };
    let dir = anchor.parent().map(Path::to_path_buf).unwrap_or_default();
    let path = dir.join(format!(
        "{}_{kind}.dat",
        record.experiment.name().replace('-', "_")
    ));
    write_atomic(&path, out.as_bytes())?;
    Ok(path)
}

/// Serialized outcome of one `β` column of a rate sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitRecord {
    pub beta: f64,
    /// `-β`, the exponent the one-body comparison is expected to show.
    pub predicted_exponent: f64,
    pub fitted_exponent: f64,
    pub intercept: f64,
    pub residual_rms: f64,
    /// `(N, sup_t ‖u_t - φ_t‖_2)`
    pub samples: Vec<(f64, f64)>,
    /// `-theorem_rate(β)`
    pub theorem_exponent: f64,
    /// `-alternative_rate(β, γ)` for the configured decay exponent, if defined.
    pub alternative_exponent: Option<f64>,
}
