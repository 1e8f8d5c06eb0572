//! Run configuration: a sectioned TOML file plus `section.key=value` overrides.
//!
//! ```toml
//! seed = 7
//!
//! [synthetic]          # or: [data] returns = "...", states = "..."
//! months = 396
//!
//! [schedule]
//! train_len = 156
//! test_len = 60
//!
//! [ratio]
//! kinds = ["sharpe", "cvar"]
//!
//! [network]
//! mode = "lagrangian"
//!
//! [train]
//! gamma0 = 0.5
//!
//! [benchmarks]
//! methods = ["var", "factor", "parametric", "static:0.60"]
//!
//! [interpret]
//! method = "pi"
//!
//! [output]
//! dir = "out"
//! ```
//!
//! The top-level `seed` drives every random stream: it replaces
//! `train.seed`, seeds the synthetic generator, the benchmark simulations and
//! the permutation shuffles.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::backtest::{DEFAULT_TEST_LEN, DEFAULT_TRAIN_LEN};
use crate::benchmarks::{BenchmarkMethod, BenchmarkOptions};
use crate::data::{align_months, load_returns_csv, load_states_csv, AlignedDataset};
use crate::error::{Error, Result};
use crate::interpret::DEFAULT_REPETITIONS;
use crate::network::OutputMode;
use crate::ratios::{RatioKind, RatioSpec, DEFAULT_ALPHA, DEFAULT_BETA};
use crate::synthetic::{generate_synthetic, SyntheticConfig};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataPaths {
    pub returns: PathBuf,
    pub states: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub train_len: usize,
    pub test_len: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            train_len: DEFAULT_TRAIN_LEN,
            test_len: DEFAULT_TEST_LEN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatioConfig {
    pub kinds: Vec<RatioKind>,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RatioConfig {
    fn default() -> Self {
        Self {
            kinds: vec![RatioKind::Sharpe],
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub mode: OutputMode,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            mode: OutputMode::Lagrangian,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarksConfig {
    pub methods: Vec<BenchmarkMethod>,
    pub sim_days: usize,
    pub sim_paths: usize,
    pub gamma: f64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl BenchmarksConfig {
    pub fn options(&self) -> BenchmarkOptions {
        BenchmarkOptions {
            sim_days: self.sim_days,
            sim_paths: self.sim_paths,
            gamma: self.gamma,
            restarts: self.restarts,
            max_iters: self.max_iters,
        }
    }
}

impl Default for BenchmarksConfig {
    fn default() -> Self {
        let o = BenchmarkOptions::default();
        Self {
            methods: vec![
                BenchmarkMethod::Var,
                BenchmarkMethod::Factor,
                BenchmarkMethod::Parametric,
                BenchmarkMethod::Static(0.2),
                BenchmarkMethod::Static(0.6),
                BenchmarkMethod::Static(0.8),
            ],
            sim_days: o.sim_days,
            sim_paths: o.sim_paths,
            gamma: o.gamma,
            restarts: o.restarts,
            max_iters: o.max_iters,
        }
    }
}

/// Interpretability procedure selector: `cw`, `pi` or `perturb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpretMethod {
    ConnectionWeights,
    Permutation,
    Perturb,
}

impl fmt::Display for InterpretMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InterpretMethod::ConnectionWeights => "cw",
            InterpretMethod::Permutation => "pi",
            InterpretMethod::Perturb => "perturb",
        })
    }
}

impl FromStr for InterpretMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "cw" | "connection_weights" => Ok(InterpretMethod::ConnectionWeights),
            "pi" | "permutation" => Ok(InterpretMethod::Permutation),
            "perturb" => Ok(InterpretMethod::Perturb),
            other => Err(Error::Config(format!(
                "unknown interpretation method {other:?} (expected cw, pi or perturb)"
            ))),
        }
    }
}

impl Serialize for InterpretMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for InterpretMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InterpretConfig {
    pub method: InterpretMethod,
    pub repetitions: usize,
}

impl Default for InterpretConfig {
    fn default() -> Self {
        Self {
            method: InterpretMethod::Permutation,
            repetitions: DEFAULT_REPETITIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: "out".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: Option<DataPaths>,
    pub synthetic: Option<SyntheticConfig>,
    pub schedule: ScheduleConfig,
    pub ratio: RatioConfig,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub benchmarks: BenchmarksConfig,
    pub interpret: InterpretConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            data: None,
            synthetic: None,
            schedule: ScheduleConfig::default(),
            ratio: RatioConfig::default(),
            network: NetworkConfig::default(),
            train: TrainConfig::default(),
            benchmarks: BenchmarksConfig::default(),
            interpret: InterpretConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

/// Parse `key=value` with a dotted key.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override {s:?} is not key=value")))?;
    let k = k.trim();
    if k.is_empty() || k.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("bad override key in {s:?}")));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

/// A TOML literal if `raw` parses as one, otherwise a string.
fn override_value(raw: &str) -> toml::Value {
    #[derive(Deserialize)]
    struct Probe {
        v: toml::Value,
    }
    toml::from_str::<Probe>(&format!("v = {raw}"))
        .map(|p| p.v)
        .unwrap_or_else(|_| toml::Value::String(raw.to_string()))
}

fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> Result<()> {
    let mut parts: Vec<&str> = key.split('.').collect();
    let last = parts.pop().expect("non-empty key");
    let mut cur = table;
    for p in parts {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("{key}: {p} is not a section")))?;
    }
    cur.insert(last.to_string(), override_value(raw));
    Ok(())
}

impl RunConfig {
    /// Parse TOML text, apply overrides, resolve data paths against `base_dir`.
    pub fn from_toml_str(text: &str, overrides: &[(String, String)], base_dir: &Path) -> Result<Self> {
        let mut table: toml::Table =
            toml::from_str(text).map_err(|e| Error::Config(format!("config: {}", e.message())))?;
        for (k, v) in overrides {
            apply_override(&mut table, k, v)?;
        }
        let mut cfg: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {}", e.message())))?;
        if let Some(d) = cfg.data.as_mut() {
            d.returns = base_dir.join(&d.returns);
            d.states = base_dir.join(&d.states);
        }
        cfg.train.seed = cfg.seed;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Load `path` (or start from defaults when `None`) and apply overrides.
    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    Error::Config(format!("cannot read config {}: {e}", p.display()))
                })?;
                let base = p.parent().unwrap_or_else(|| Path::new("."));
                Self::from_toml_str(&text, overrides, base)
            }
            None => Self::from_toml_str("", overrides, Path::new(".")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.data, &self.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("give either [data] or [synthetic], not both".into()))
            }
            (None, None) => return Err(Error::Config("one of [data] or [synthetic] is required".into())),
            (None, Some(s)) => s.validate()?,
            _ => {}
        }
        if self.schedule.train_len == 0 || self.schedule.test_len == 0 {
            return Err(Error::Config("schedule lengths must be positive".into()));
        }
        if self.ratio.kinds.is_empty() {
            return Err(Error::Config("ratio.kinds must not be empty".into()));
        }
        self.ratio_specs()?;
        self.train.validate()?;
        let b = self.benchmarks.options();
        if b.sim_days == 0 || b.sim_paths == 0 || b.restarts == 0 || b.max_iters == 0 {
            return Err(Error::Config("benchmark simulation sizes and iterations must be positive".into()));
        }
        if self.interpret.repetitions == 0 {
            return Err(Error::Config("interpret.repetitions must be positive".into()));
        }
        Ok(())
    }

    pub fn ratio_specs(&self) -> Result<Vec<RatioSpec>> {
        self.ratio
            .kinds
            .iter()
            .map(|&k| RatioSpec::with_levels(k, self.ratio.alpha, self.ratio.beta))
            .collect()
    }

    /// The aligned dataset from CSV files or the synthetic generator.
    pub fn load_dataset(&self) -> Result<AlignedDataset> {
        match (&self.data, &self.synthetic) {
            (Some(d), _) => align_months(&load_returns_csv(&d.returns)?, &load_states_csv(&d.states)?),
            (None, Some(s)) => {
                let (panel, states) = generate_synthetic(s, self.seed)?;
                align_months(&panel, &states)
            }
            (None, None) => Err(Error::Config("no data source configured".into())),
        }
    }
}
