//! Experiment configuration: a TOML document with a fixed set of keys.
//!
//! Every table rejects keys it does not know, so a typo such as `betaa`
//! fails loudly instead of silently falling back to a default.

use std::fmt;
use std::path::PathBuf;

use meanfield::manybody::DEFAULT_AMPLITUDE_BUDGET;
use meanfield::potentials::{
    CouplingConfig, InteractionFamily, InteractionSpec, PotentialSpec, BETA_LIMIT,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Dispersive,
    LinearDecay,
    Rollnik,
    RateSweep,
    ManybodyTrace,
    GroenwallCert,
    Bootstrap,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Dispersive,
        Experiment::LinearDecay,
        Experiment::Rollnik,
        Experiment::RateSweep,
        Experiment::ManybodyTrace,
        Experiment::GroenwallCert,
        Experiment::Bootstrap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Dispersive => "dispersive",
            Experiment::LinearDecay => "linear-decay",
            Experiment::Rollnik => "rollnik",
            Experiment::RateSweep => "rate-sweep",
            Experiment::ManybodyTrace => "manybody-trace",
            Experiment::GroenwallCert => "groenwall-cert",
            Experiment::Bootstrap => "bootstrap",
        }
    }

    fn needs_grid(self) -> bool {
        !matches!(self, Experiment::GroenwallCert | Experiment::Bootstrap)
    }

    fn needs_t_max(self) -> bool {
        matches!(
            self,
            Experiment::Dispersive
                | Experiment::RateSweep
                | Experiment::ManybodyTrace
                | Experiment::GroenwallCert
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `(w * |u|²) u` with the unscaled kernel.
    Hartree,
    /// `(w_N * |u|²) u` with `N` and `β` from `[coupling]`.
    ScaledHartree,
    /// `(∫w) |u|² u`.
    Cubic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Gaussian,
    /// A seeded superposition of four Gaussians with random complex weights.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConfig {
    pub profile: Profile,
    pub sigma: f64,
    pub center: Vec<f64>,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            profile: Profile::Gaussian,
            sigma: 1.0,
            center: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub particles: Vec<u64>,
    pub betas: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BootstrapConfig {
    pub eps: f64,
    pub c: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig { eps: 0.1, c: 8.0 }
    }
}

/// `α(t) = alpha_scale (1+t)^{-alpha_power}`, `ε(t) = eps_scale (1+t)^{-eps_power}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GroenwallConfig {
    pub phi0: f64,
    pub alpha_scale: f64,
    pub alpha_power: f64,
    pub eps_scale: f64,
    pub eps_power: f64,
    pub node_spacing: f64,
}

impl Default for GroenwallConfig {
    fn default() -> Self {
        GroenwallConfig {
            phi0: 0.0,
            alpha_scale: 3.0,
            alpha_power: 3.0,
            eps_scale: 1e-3,
            eps_power: 3.0,
            node_spacing: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinearDecayConfig {
    pub times: Vec<f64>,
}

impl Default for LinearDecayConfig {
    fn default() -> Self {
        LinearDecayConfig {
            times: vec![1.0, 2.0, 4.0, 8.0, 16.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub experiment: Option<Experiment>,
    #[serde(default)]
    pub dim: Option<usize>,
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default)]
    pub box_length: Option<f64>,
    #[serde(default)]
    pub t_max: Option<f64>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: NonlinearityKind,
    #[serde(default = "default_split")]
    pub uniformity_split: f64,
    #[serde(default = "default_budget")]
    pub amplitude_budget: usize,
    #[serde(default = "PotentialSpec::zero")]
    pub potential: PotentialSpec,
    #[serde(default = "default_interaction")]
    pub interaction: InteractionSpec,
    #[serde(default = "default_coupling")]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub bootstrap: BootstrapConfig,
    #[serde(default)]
    pub groenwall: GroenwallConfig,
    #[serde(default)]
    pub linear_decay: LinearDecayConfig,
}

fn default_dt() -> f64 {
    1e-2
}

fn default_stride() -> usize {
    10
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

fn default_nonlinearity() -> NonlinearityKind {
    NonlinearityKind::Hartree
}

fn default_split() -> f64 {
    0.25
}

fn default_budget() -> usize {
    DEFAULT_AMPLITUDE_BUDGET
}

fn default_interaction() -> InteractionSpec {
    InteractionSpec::new(InteractionFamily::Gaussian, 1.0, 1.0)
}

fn default_coupling() -> CouplingConfig {
    CouplingConfig {
        lambda: 0.0,
        beta: 0.0,
        particle_number: 1,
    }
}

/// One offending key and what is wrong with it.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Syntax(String),
    #[error("invalid config:\n{}", render(.0))]
    Invalid(Vec<FieldError>),
}

fn render(errors: &[FieldError]) -> String {
    errors
        .iter()
        .map(|e| format!("  {e}"))
        .collect::<Vec<_>>()
        .join("\n")
}

impl ConfigError {
    pub fn field_errors(&self) -> &[FieldError] {
        match self {
            ConfigError::Invalid(v) => v,
            ConfigError::Syntax(_) => &[],
        }
    }
}

/// Parses and validates a config document.
///
/// ```
/// let cfg = meanfield_cli::config::parse_config(
///     "experiment = \"dispersive\"\ndim = 1\ngrid_points = 256\nbox_length = 128.0\nt_max = 40.0\n",
/// )
/// .unwrap();
/// assert_eq!(cfg.grid_points, Some(256));
/// ```
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig =
        toml::from_str(text).map_err(|e| ConfigError::Syntax(e.to_string()))?;
    let errors = cfg.validate();
    if errors.is_empty() {
        Ok(cfg)
    } else {
        Err(ConfigError::Invalid(errors))
    }
}

struct Errors(Vec<FieldError>);

impl Errors {
    fn push(&mut self, field: impl Into<String>, message: impl Into<String>) {
        self.0.push(FieldError {
            field: field.into(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.push(field, message);
        }
    }
}

fn check_beta(errors: &mut Errors, field: &str, beta: f64) {
    errors.check(
        (0.0..BETA_LIMIT).contains(&beta),
        field,
        format!("out of range: need 0 <= beta < 1/3, got {beta}"),
    );
}

impl ExperimentConfig {
    /// Range checks that do not depend on the experiment.
    pub fn validate(&self) -> Vec<FieldError> {
        let mut e = Errors(Vec::new());
        if let Some(d) = self.dim {
            e.check(
                (1..=3).contains(&d),
                "dim",
                format!("must be 1, 2 or 3, got {d}"),
            );
        }
        if let Some(n) = self.grid_points {
            e.check(
                n >= 8 && n.is_power_of_two(),
                "grid_points",
                format!("must be a power of two >= 8, got {n}"),
            );
        }
        if let Some(l) = self.box_length {
            e.check(
                l.is_finite() && l > 0.0,
                "box_length",
                format!("must be positive, got {l}"),
            );
        }
        if let Some(t) = self.t_max {
            e.check(
                t.is_finite() && t > 0.0,
                "t_max",
                format!("must be positive, got {t}"),
            );
            e.check(
                self.dt <= t,
                "dt",
                format!("must not exceed t_max = {t}, got {}", self.dt),
            );
        }
        e.check(
            self.dt.is_finite() && self.dt > 0.0,
            "dt",
            format!("must be positive, got {}", self.dt),
        );
        e.check(
            self.snapshot_stride >= 1,
            "snapshot_stride",
            "must be at least 1",
        );
        e.check(
            self.uniformity_split > 0.0 && self.uniformity_split < 1.0,
            "uniformity_split",
            format!("must lie in (0, 1), got {}", self.uniformity_split),
        );
        e.check(
            self.amplitude_budget > 0,
            "amplitude_budget",
            "must be positive",
        );

        if let Err(err) = self
            .potential
            .validate(self.dim.unwrap_or(self.potential.center.len().max(1)))
        {
            e.push("potential", strip(&err));
        }
        if let Err(err) = self.interaction.validate() {
            e.push("interaction", strip(&err));
        }
        e.check(
            self.coupling.lambda.is_finite(),
            "coupling.lambda",
            "must be finite",
        );
        check_beta(&mut e, "coupling.beta", self.coupling.beta);
        e.check(
            self.coupling.particle_number > 0,
            "coupling.particle_number",
            "must be positive",
        );

        for (i, &n) in self.sweep.particles.iter().enumerate() {
            e.check(n > 0, &format!("sweep.particles[{i}]"), "must be positive");
        }
        for (i, &b) in self.sweep.betas.iter().enumerate() {
            check_beta(&mut e, &format!("sweep.betas[{i}]"), b);
        }

        let s = &self.initial;
        e.check(
            s.sigma.is_finite() && s.sigma > 0.0,
            "initial.sigma",
            format!("must be positive, got {}", s.sigma),
        );
        if let Some(d) = self.dim {
            e.check(
                s.center.is_empty() || s.center.len() == d,
                "initial.center",
                format!("has {} components, dim is {d}", s.center.len()),
            );
        }

        let b = &self.bootstrap;
        e.check(
            b.eps.is_finite() && b.eps >= 0.0,
            "bootstrap.eps",
            format!("must be nonnegative, got {}", b.eps),
        );
        e.check(
            b.c.is_finite() && b.c > 0.0,
            "bootstrap.c",
            format!("must be positive, got {}", b.c),
        );

        let g = &self.groenwall;
        e.check(
            g.phi0.is_finite() && g.phi0 >= 0.0,
            "groenwall.phi0",
            "must be nonnegative",
        );
        for (name, v) in [("alpha_scale", g.alpha_scale), ("eps_scale", g.eps_scale)] {
            e.check(
                v.is_finite() && v >= 0.0,
                &format!("groenwall.{name}"),
                "must be nonnegative",
            );
        }
        for (name, v) in [("alpha_power", g.alpha_power), ("eps_power", g.eps_power)] {
            e.check(
                v.is_finite(),
                &format!("groenwall.{name}"),
                "must be finite",
            );
        }
        e.check(
            g.node_spacing.is_finite() && g.node_spacing > 0.0,
            "groenwall.node_spacing",
            "must be positive",
        );

        let times = &self.linear_decay.times;
        e.check(!times.is_empty(), "linear_decay.times", "must not be empty");
        e.check(
            times.iter().all(|&t| t.is_finite() && t > 0.0)
                && times.windows(2).all(|w| w[1] > w[0]),
            "linear_decay.times",
            "must be positive and strictly increasing",
        );
        e.0
    }

    /// Fixes the experiment and checks the keys it needs.
    ///
    /// A config naming a different experiment than the one requested is rejected.
    pub fn for_experiment(mut self, experiment: Experiment) -> Result<Self, ConfigError> {
        let mut e = Errors(Vec::new());
        match self.experiment {
            Some(named) if named != experiment => e.push(
                "experiment",
                format!("config is for `{named}`, requested `{experiment}`"),
            ),
            _ => self.experiment = Some(experiment),
        }
        if experiment.needs_grid() {
            for (key, present) in [
                ("dim", self.dim.is_some()),
                ("grid_points", self.grid_points.is_some()),
                ("box_length", self.box_length.is_some()),
            ] {
                e.check(present, key, format!("required by `{experiment}`"));
            }
        }
        if experiment.needs_t_max() {
            e.check(
                self.t_max.is_some(),
                "t_max",
                format!("required by `{experiment}`"),
            );
        }
        match experiment {
            Experiment::Rollnik => {
                e.check(
                    self.dim.is_none_or(|d| d == 3),
                    "dim",
                    "the Rollnik check runs in dimension 3",
                );
            }
            Experiment::RateSweep => {
                let mut distinct = self.sweep.particles.clone();
                distinct.sort_unstable();
                distinct.dedup();
                e.check(
                    distinct.len() >= 3,
                    "sweep.particles",
                    "a rate fit needs at least three distinct N",
                );
            }
            _ => {}
        }
        if e.0.is_empty() {
            Ok(self)
        } else {
            Err(ConfigError::Invalid(e.0))
        }
    }

    /// Particle numbers of a sweep, largest first.
    pub fn particle_schedule(&self) -> Vec<u64> {
        let mut ns = if self.sweep.particles.is_empty() {
            vec![self.coupling.particle_number]
        } else {
            self.sweep.particles.clone()
        };
        ns.sort_unstable_by(|a, b| b.cmp(a));
        ns.dedup();
        ns
    }

    pub fn beta_schedule(&self) -> Vec<f64> {
        if self.sweep.betas.is_empty() {
            vec![self.coupling.beta]
        } else {
            self.sweep.betas.clone()
        }
    }

    /// Hex SHA-256 of the canonical JSON form, excluding `output_dir`.
    ///
    /// Defaults are filled in before hashing, so spelling out a default value
    /// does not change the hash, and neither do whitespace or comments.
    pub fn config_hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("output_dir");
        }
        // serde_json maps are ordered by key, which makes this canonical.
        let canonical = serde_json::to_string(&value).expect("json value serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }
}

fn strip(err: &meanfield::Error) -> String {
    match err {
        meanfield::Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}
