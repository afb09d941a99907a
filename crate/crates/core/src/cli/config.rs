//! Run configuration: a flat `key = value` file merged with command-line
//! flags (flags win).
//!
//! Time-like keys carry the model's time unit in their name:
//! `horizon_over_lambda` for the damped Jaynes-Cummings model,
//! `horizon_over_coupling` for the spin bath, `horizon_over_gamma0` for
//! the semigroup and `horizon_over_unit` for a generator file. A suffix
//! that does not match the model is rejected, as is any unknown key.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use super::CliError;
use crate::state::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    Jc,
    Spinbath,
    Semigroup,
    CustomFile,
}

impl ModelKind {
    /// Name of the quantity whose inverse is the time unit.
    pub fn unit(self) -> &'static str {
        match self {
            ModelKind::Jc => "lambda",
            ModelKind::Spinbath => "coupling",
            ModelKind::Semigroup => "gamma0",
            ModelKind::CustomFile => "unit",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        <Self as ValueEnum>::from_str(s, true).ok()
    }

    fn default_horizon(self) -> f64 {
        match self {
            ModelKind::Jc => 60.0,
            ModelKind::Spinbath => 5.0,
            ModelKind::Semigroup => 5.0,
            ModelKind::CustomFile => 10.0,
        }
    }

    /// 1e-3 of the characteristic time: `1/λ`, `1/(2A)`, `1/γ₀`.
    fn default_step(self) -> f64 {
        match self {
            ModelKind::Spinbath => 5e-4,
            _ => 1e-3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// Flags shared by every subcommand. Each one mirrors a config key.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigFlags {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub model: Option<ModelKind>,
    /// γ₀/λ of the Jaynes-Cummings model.
    #[arg(long, value_name = "RATIO")]
    pub gamma0: Option<f64>,
    /// Detuning Δ/λ.
    #[arg(long, value_name = "RATIO", allow_hyphen_values = true)]
    pub delta: Option<f64>,
    #[arg(long, value_name = "RATIO", allow_hyphen_values = true)]
    pub delta_min: Option<f64>,
    #[arg(long, value_name = "RATIO", allow_hyphen_values = true)]
    pub delta_max: Option<f64>,
    #[arg(long, value_name = "N")]
    pub delta_points: Option<usize>,
    /// Number of bath spins.
    #[arg(long, value_name = "N")]
    pub n_spins: Option<u32>,
    /// Truncation time, in the model's time unit.
    #[arg(long, value_name = "T")]
    pub horizon: Option<f64>,
    /// Integration and sampling step, in the model's time unit.
    #[arg(long, value_name = "H")]
    pub step: Option<f64>,
    /// Length of each divisibility interval, in the model's time unit.
    #[arg(long, value_name = "T")]
    pub interval: Option<f64>,
    /// σ threshold; default is relative to max|σ|.
    #[arg(long, value_name = "EPS")]
    pub threshold: Option<f64>,
    /// Allowed negative Choi eigenvalue.
    #[arg(long, value_name = "TOL")]
    pub cp_tolerance: Option<f64>,
    #[arg(long, value_name = "N")]
    pub n_pairs: Option<usize>,
    #[arg(long, value_name = "SEED")]
    pub seed: Option<u64>,
    /// Output file; standard output when absent.
    #[arg(long, short, value_name = "PATH")]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// `sz`, `sx`, `bloch:x,y,z;x,y,z` or `files:PATH1,PATH2`.
    #[arg(long, value_name = "SPEC")]
    pub pair: Option<String>,
    /// Clamp the Jaynes-Cummings rate at zero.
    #[arg(long, value_name = "BOOL", num_args = 0..=1, default_missing_value = "true")]
    pub clamp_rate: Option<bool>,
    #[arg(long, value_name = "FILE")]
    pub generator_file: Option<PathBuf>,
}

/// A time value with the unit named by its config key, if any.
#[derive(Debug, Clone, PartialEq)]
struct TimeValue {
    value: f64,
    unit: Option<String>,
    key: String,
}

/// Entries read from a config file, before defaults.
#[derive(Debug, Clone, Default, PartialEq)]
struct FileEntries {
    model: Option<ModelKind>,
    gamma0: Option<f64>,
    delta: Option<f64>,
    delta_min: Option<f64>,
    delta_max: Option<f64>,
    delta_points: Option<usize>,
    n_spins: Option<u32>,
    horizon: Option<TimeValue>,
    step: Option<TimeValue>,
    interval: Option<TimeValue>,
    threshold: Option<f64>,
    cp_tolerance: Option<f64>,
    n_pairs: Option<usize>,
    seed: Option<u64>,
    output: Option<PathBuf>,
    format: Option<OutputFormat>,
    pair: Option<String>,
    clamp_rate: Option<bool>,
    generator_file: Option<PathBuf>,
}

fn config_error(path: &Path, line: usize, message: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{}:{line}: {message}", path.display()))
}

fn parse_value<T: std::str::FromStr>(path: &Path, line: usize, key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| config_error(path, line, format!("invalid value `{value}` for `{key}`")))
}

fn parse_file(path: &Path, text: &str) -> Result<FileEntries, CliError> {
    let mut e = FileEntries::default();
    let mut seen = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| config_error(path, line, format!("expected `key = value`, found `{content}`")))?;
        let key = key.trim();
        let value = value.trim().trim_matches('"');
        let timed = ["horizon", "step", "interval"]
            .into_iter()
            .find_map(|base| key.strip_prefix(base).and_then(|r| r.strip_prefix("_over_")).map(|u| (base, u)));
        let slot = timed.map_or(key, |(base, _)| base);
        if let Some(prev) = seen.insert(slot.to_string(), line) {
            return Err(config_error(path, line, format!("`{key}` already set on line {prev}")));
        }
        if let Some((base, unit)) = timed {
            let tv = TimeValue {
                value: parse_value(path, line, key, value)?,
                unit: Some(unit.to_string()),
                key: key.to_string(),
            };
            match base {
                "horizon" => e.horizon = Some(tv),
                "step" => e.step = Some(tv),
                _ => e.interval = Some(tv),
            }
            continue;
        }
        match key {
            "model" => {
                e.model = Some(
                    ModelKind::parse(value)
                        .ok_or_else(|| config_error(path, line, format!("unknown model `{value}`")))?,
                )
            }
            "gamma0_over_lambda" => e.gamma0 = Some(parse_value(path, line, key, value)?),
            "delta_over_lambda" => e.delta = Some(parse_value(path, line, key, value)?),
            "delta_min_over_lambda" => e.delta_min = Some(parse_value(path, line, key, value)?),
            "delta_max_over_lambda" => e.delta_max = Some(parse_value(path, line, key, value)?),
            "delta_points" => e.delta_points = Some(parse_value(path, line, key, value)?),
            "n_spins" => e.n_spins = Some(parse_value(path, line, key, value)?),
            "threshold" => e.threshold = Some(parse_value(path, line, key, value)?),
            "cp_tolerance" => e.cp_tolerance = Some(parse_value(path, line, key, value)?),
            "n_pairs" => e.n_pairs = Some(parse_value(path, line, key, value)?),
            "seed" => e.seed = Some(parse_value(path, line, key, value)?),
            "output" => e.output = Some(PathBuf::from(value)),
            "format" => {
                e.format = Some(
                    <OutputFormat as ValueEnum>::from_str(value, true)
                        .map_err(|_| config_error(path, line, format!("unknown format `{value}`")))?,
                )
            }
            "pair" => e.pair = Some(value.to_string()),
            "clamp_rate" => e.clamp_rate = Some(parse_value(path, line, key, value)?),
            "generator_file" => e.generator_file = Some(PathBuf::from(value)),
            _ => return Err(config_error(path, line, format!("unknown key `{key}`"))),
        }
    }
    Ok(e)
}

/// Fully resolved settings of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub model: ModelKind,
    pub gamma0_over_lambda: f64,
    pub delta_over_lambda: f64,
    pub delta_min_over_lambda: f64,
    pub delta_max_over_lambda: f64,
    pub delta_points: Option<usize>,
    pub n_spins: u32,
    pub horizon: f64,
    pub step: f64,
    pub interval: f64,
    pub threshold: Option<f64>,
    pub cp_tolerance: f64,
    pub n_pairs: usize,
    pub seed: u64,
    #[serde(skip)]
    pub output: Option<PathBuf>,
    #[serde(skip)]
    pub format: Option<OutputFormat>,
    pub pair: String,
    pub clamp_rate: bool,
    pub generator_file: Option<PathBuf>,
}

impl RunConfig {
    pub fn rng_seed(&self) -> RngSeed {
        RngSeed(self.seed)
    }

    /// Delta values of a sweep: `delta_points` evenly spaced values.
    pub fn delta_range(&self) -> Vec<f64> {
        let n = self.delta_points.unwrap_or(21);
        let (a, b) = (self.delta_min_over_lambda, self.delta_max_over_lambda);
        (0..n).map(|k| if k + 1 == n { b } else { a + (b - a) * k as f64 / (n - 1) as f64 }).collect()
    }

    /// Reads the config file named by `flags` (if any) and applies the
    /// flags on top.
    pub fn resolve(flags: &ConfigFlags) -> Result<Self, CliError> {
        let file = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
                parse_file(path, &text)?
            }
            None => FileEntries::default(),
        };
        let model = flags.model.or(file.model).unwrap_or(ModelKind::Jc);
        let unit = model.unit();
        let time = |flag: Option<f64>, entry: &Option<TimeValue>, default: f64| -> Result<f64, CliError> {
            if let Some(v) = flag {
                return Ok(v);
            }
            match entry {
                Some(tv) if tv.unit.as_deref() == Some(unit) => Ok(tv.value),
                Some(tv) => Err(CliError::Config(format!(
                    "`{}` does not match the time unit of model `{}` (expected suffix `_over_{unit}`)",
                    tv.key,
                    model.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
                ))),
                None => Ok(default),
            }
        };
        let cfg = RunConfig {
            model,
            gamma0_over_lambda: flags.gamma0.or(file.gamma0).unwrap_or(0.01),
            delta_over_lambda: flags.delta.or(file.delta).unwrap_or(0.0),
            delta_min_over_lambda: flags.delta_min.or(file.delta_min).unwrap_or(0.0),
            delta_max_over_lambda: flags.delta_max.or(file.delta_max).unwrap_or(10.0),
            delta_points: flags.delta_points.or(file.delta_points),
            n_spins: flags.n_spins.or(file.n_spins).unwrap_or(20),
            horizon: time(flags.horizon, &file.horizon, model.default_horizon())?,
            step: time(flags.step, &file.step, model.default_step())?,
            interval: time(flags.interval, &file.interval, 0.1)?,
            threshold: flags.threshold.or(file.threshold),
            cp_tolerance: flags.cp_tolerance.or(file.cp_tolerance).unwrap_or(crate::dynamics::DEFAULT_CP_TOL),
            n_pairs: flags.n_pairs.or(file.n_pairs).unwrap_or(1000),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            output: flags.output.clone().or(file.output),
            format: flags.format.or(file.format),
            pair: flags.pair.clone().or(file.pair).unwrap_or_else(|| "sz".into()),
            clamp_rate: flags.clamp_rate.or(file.clamp_rate).unwrap_or(false),
            generator_file: flags.generator_file.clone().or(file.generator_file),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let positive = [
            ("gamma0_over_lambda", self.gamma0_over_lambda),
            ("horizon", self.horizon),
            ("step", self.step),
            ("interval", self.interval),
            ("cp_tolerance", self.cp_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(CliError::Config(format!("`{name}` must be positive and finite, got {v}")));
            }
        }
        for (name, v) in [
            ("delta_over_lambda", self.delta_over_lambda),
            ("delta_min_over_lambda", self.delta_min_over_lambda),
            ("delta_max_over_lambda", self.delta_max_over_lambda),
        ] {
            if !v.is_finite() {
                return Err(CliError::Config(format!("`{name}` must be finite")));
            }
        }
        if self.delta_min_over_lambda > self.delta_max_over_lambda {
            return Err(CliError::Config("`delta_min_over_lambda` exceeds `delta_max_over_lambda`".into()));
        }
        if matches!(self.delta_points, Some(n) if n < 2) {
            return Err(CliError::Config("`delta_points` must be at least 2".into()));
        }
        if let Some(eps) = self.threshold {
            if !(eps >= 0.0 && eps.is_finite()) {
                return Err(CliError::Config(format!("`threshold` must be non-negative, got {eps}")));
            }
        }
        if self.n_spins == 0 {
            return Err(CliError::Config("`n_spins` must be at least 1".into()));
        }
        if self.n_pairs == 0 {
            return Err(CliError::Config("`n_pairs` must be at least 1".into()));
        }
        if self.step > self.horizon {
            return Err(CliError::Config("`step` exceeds `horizon`".into()));
        }
        if self.model == ModelKind::CustomFile && self.generator_file.is_none() {
            return Err(CliError::Config("model `custom-file` needs `generator_file`".into()));
        }
        Ok(())
    }
}
