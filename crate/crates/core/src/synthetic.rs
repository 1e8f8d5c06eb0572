//! Planted-regime two-asset datasets for validation runs.
//!
//! Every random draw comes from [`rng`], a ChaCha8 stream keyed by a 64-bit
//! seed, so a seed reproduces the same panel on every platform.

use chrono::Duration;
use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::calendar::YearMonth;
use crate::data::{ReturnPanel, StateSeries};
use crate::error::{Error, Result};

/// The generator used for all seeded randomness in the crate.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Seed offset between cross-validation folds.
pub const FOLD_SEED_STRIDE: u64 = 10_007;

/// Seed for fold `fold` and hidden-size grid point `grid` of a run seeded `seed`.
pub fn derive_seed(seed: u64, fold: usize, grid: usize) -> u64 {
    seed.wrapping_add((fold as u64).wrapping_mul(FOLD_SEED_STRIDE))
        .wrapping_add(grid as u64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    /// Number of (state month, return month) pairs.
    pub months: usize,
    pub days_per_month: usize,
    /// Independent N(0,1) state variables after the signal variable.
    pub noise_vars: usize,
    /// Daily mean shared by both assets before the regime shift.
    pub base_mean: f64,
    /// Daily mean of the favoured asset minus that of the other one.
    pub mean_gap: f64,
    /// Daily volatility of each asset.
    pub vols: [f64; 2],
    /// Correlation of the two assets' daily shocks.
    pub correlation: f64,
    /// Asymmetry of the signal variable: with `g ~ N(0,1)` the signal is `g`
    /// for `g <= 0` and `(1 + signal_skew) g` otherwise, so both regimes stay
    /// equally likely while the mean sits above the median.
    pub signal_skew: f64,
    /// First state month.
    pub start: YearMonth,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            months: 396,
            days_per_month: 21,
            noise_vars: 3,
            base_mean: 0.0,
            mean_gap: 0.02,
            vols: [0.01, 0.01],
            correlation: 0.0,
            signal_skew: 1.0,
            start: YearMonth { year: 1985, month: 12 },
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.months == 0 {
            return Err(Error::Config("synthetic.months must be positive".into()));
        }
        if !(2..=28).contains(&self.days_per_month) {
            return Err(Error::Config("synthetic.days_per_month must be in 2..=28".into()));
        }
        if self.vols.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::Config("synthetic.vols must be finite and non-negative".into()));
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return Err(Error::Config("synthetic.correlation must be in [-1, 1]".into()));
        }
        if !self.mean_gap.is_finite() || !self.base_mean.is_finite() || !(self.signal_skew >= 0.0) {
            return Err(Error::Config("synthetic means and skew must be finite".into()));
        }
        Ok(())
    }

    /// Daily means of the two assets given the signal observed the month before.
    pub fn regime_means(&self, signal: f64) -> [f64; 2] {
        let hi = self.base_mean + 0.5 * self.mean_gap;
        let lo = self.base_mean - 0.5 * self.mean_gap;
        if signal > 0.0 {
            [hi, lo]
        } else {
            [lo, hi]
        }
    }
}

/// Two-asset panel whose better asset in month t+1 is chosen by the sign of
/// state variable 1 in month t; the other state variables are pure noise.
///
/// States cover `months` months from `config.start`; returns cover the
/// `months` following months, `days_per_month` rows each.
pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<(ReturnPanel, StateSeries)> {
    config.validate()?;
    let mut rng = rng(seed);
    let m = 1 + config.noise_vars;
    let t_len = config.months;
    let days = config.days_per_month;

    let s = config.signal_skew;
    let mut states = DMatrix::zeros(t_len, m);
    for t in 0..t_len {
        let g: f64 = rng.sample(StandardNormal);
        states[(t, 0)] = if g > 0.0 { (1.0 + s) * g } else { g };
        for j in 1..m {
            states[(t, j)] = rng.sample(StandardNormal);
        }
    }

    let rho = config.correlation;
    let rho_c = (1.0 - rho * rho).max(0.0).sqrt();
    let mut dates = Vec::with_capacity(t_len * days);
    let mut returns = DMatrix::zeros(t_len * days, 2);
    let mut months = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let state_month = config.start.add_months(t);
        months.push(state_month);
        let means = config.regime_means(states[(t, 0)]);
        let first = state_month.next().first_day();
        for d in 0..days {
            let row = t * days + d;
            dates.push(first + Duration::days(d as i64));
            let e1: f64 = rng.sample(StandardNormal);
            let e2: f64 = rng.sample(StandardNormal);
            let shocks = [e1, rho * e1 + rho_c * e2];
            for a in 0..2 {
                returns[(row, a)] = (means[a] + config.vols[a] * shocks[a]).max(-0.99);
            }
        }
    }

    let mut names = vec!["signal".to_string()];
    names.extend((1..m).map(|j| format!("noise{j}")));
    let panel = ReturnPanel::new(dates, vec!["asset1".into(), "asset2".into()], returns)?;
    let states = StateSeries::new(months, names, states)?;
    Ok((panel, states))
}
