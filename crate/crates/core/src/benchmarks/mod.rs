//! Benchmark allocators: AR(1) moment forecasts, state-regression moment
//! forecasts, a CRRA parametric policy and static mixes.

pub mod grid;
pub mod moments;
pub mod parametric;
pub mod simulate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use grid::optimize_weights_grid;
pub use moments::{
    fit_ar1, fit_moment_factor_model, monthly_moments, predict_ar1, repair_covariance, Ar1Fit, FactorFit,
    MomentSeries,
};
pub use parametric::{
    apply_parametric_policy, crra_utility, fit_parametric_policy, static_weights, ParametricFitOptions,
    ParametricPolicy,
};
pub use simulate::simulate_returns;

/// Benchmark selector, written as `var`, `factor`, `parametric` or `static:<fraction>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BenchmarkMethod {
    Var,
    Factor,
    Parametric,
    Static(f64),
}

impl BenchmarkMethod {
    pub fn token(&self) -> String {
        match self {
            BenchmarkMethod::Var => "var".into(),
            BenchmarkMethod::Factor => "factor".into(),
            BenchmarkMethod::Parametric => "parametric".into(),
            BenchmarkMethod::Static(p) => format!("static:{p:.2}"),
        }
    }
}

impl fmt::Display for BenchmarkMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl FromStr for BenchmarkMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "var" => Ok(BenchmarkMethod::Var),
            "factor" => Ok(BenchmarkMethod::Factor),
            "parametric" => Ok(BenchmarkMethod::Parametric),
            _ => {
                let pct = s
                    .strip_prefix("static:")
                    .ok_or_else(|| Error::Config(format!("unknown benchmark {s:?}")))?;
                let v: f64 = pct
                    .parse()
                    .map_err(|_| Error::Config(format!("bad static weight in {s:?}")))?;
                static_weights(v)?;
                Ok(BenchmarkMethod::Static(v))
            }
        }
    }
}

impl Serialize for BenchmarkMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BenchmarkMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// Knobs shared by the benchmark pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkOptions {
    /// Simulated trading days per month.
    pub sim_days: usize,
    /// Simulated months pooled before the ratio sweep.
    pub sim_paths: usize,
    /// CRRA risk aversion of the parametric policy.
    pub gamma: f64,
    pub restarts: usize,
    pub max_iters: usize,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            sim_days: 21,
            sim_paths: 200,
            gamma: parametric::DEFAULT_GAMMA,
            restarts: 10,
            max_iters: 500,
        }
    }
}
