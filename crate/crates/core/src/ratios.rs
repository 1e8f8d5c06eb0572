//! Reward-to-risk performance ratios on a vector of portfolio returns, with
//! (sub)gradients with respect to those returns.
//!
//! All moments are population moments. Tail sets have a fixed size
//! `ceil(level * D)` (at least one element), taken in order-statistic position
//! so ties are split by index rather than included wholesale.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioKind {
    Sharpe,
    Mad,
    MiniMax,
    Gini,
    Cvar,
    Rachev,
}

impl RatioKind {
    /// Canonical order, also used to break ties between ratios.
    pub const ALL: [RatioKind; 6] = [
        RatioKind::Sharpe,
        RatioKind::Mad,
        RatioKind::MiniMax,
        RatioKind::Gini,
        RatioKind::Cvar,
        RatioKind::Rachev,
    ];

    pub fn token(self) -> &'static str {
        match self {
            RatioKind::Sharpe => "sharpe",
            RatioKind::Mad => "mad",
            RatioKind::MiniMax => "minimax",
            RatioKind::Gini => "gini",
            RatioKind::Cvar => "cvar",
            RatioKind::Rachev => "rachev",
        }
    }

    pub fn canonical_index(self) -> usize {
        Self::ALL.iter().position(|k| *k == self).unwrap()
    }
}

impl fmt::Display for RatioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for RatioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RatioKind::ALL
            .into_iter()
            .find(|k| k.token() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown ratio {s:?}")))
    }
}

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.99;

/// Which ratio to evaluate, with its tail levels.
///
/// `alpha` is the lower-tail level used by CVaR and Rachev, `beta` the
/// upper-tail level used by Rachev; both are ignored by the other kinds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioSpec {
    pub kind: RatioKind,
    pub alpha: f64,
    pub beta: f64,
}

impl RatioSpec {
    pub fn new(kind: RatioKind) -> Self {
        Self {
            kind,
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
        }
    }

    pub fn with_levels(kind: RatioKind, alpha: f64, beta: f64) -> Result<Self> {
        let spec = Self { kind, alpha, beta };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let open = |v: f64| v > 0.0 && v < 1.0;
        if !open(self.alpha) || !open(self.beta) {
            return Err(Error::Config(format!(
                "tail levels must lie in (0,1): alpha={}, beta={}",
                self.alpha, self.beta
            )));
        }
        Ok(())
    }

    pub fn sharpe() -> Self {
        Self::new(RatioKind::Sharpe)
    }
}

/// A ratio value with its reward and risk parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioValue {
    pub value: f64,
    pub reward: f64,
    pub risk: f64,
    /// Risk came out negative (e.g. an all-positive month under CVaR); the
    /// raw signed quotient is still returned.
    pub degenerate: bool,
}

/// Number of elements in a tail at `level` of `d` observations.
pub fn tail_size(level: f64, d: usize) -> usize {
    // The epsilon absorbs representation error such as 0.07 * 100 = 7.000000000000001.
    let k = (level * d as f64 - 1e-9).ceil();
    (k.max(1.0) as usize).min(d)
}

/// Indices of `r` sorted ascending by value, ties by index.
fn ascending_order(r: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..r.len()).collect();
    idx.sort_by(|&a, &b| r[a].partial_cmp(&r[b]).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    idx
}

fn check_nonempty(r: &[f64]) -> Result<()> {
    if r.is_empty() {
        return Err(Error::InsufficientData("empty return vector".into()));
    }
    Ok(())
}

/// Empirical value-at-risk: minus the `ceil(level * D)`-th smallest return.
pub fn empirical_var(r: &[f64], level: f64) -> Result<f64> {
    check_nonempty(r)?;
    let order = ascending_order(r);
    Ok(-r[order[tail_size(level, r.len()) - 1]])
}

/// Mean loss over the worst `ceil(level * D)` observations.
pub fn expected_tail_loss(r: &[f64], level: f64) -> Result<f64> {
    check_nonempty(r)?;
    let order = ascending_order(r);
    let k = tail_size(level, r.len());
    Ok(-order[..k].iter().map(|&i| r[i]).sum::<f64>() / k as f64)
}

/// Mean of the best `max(1, ceil((1 - level) * D))` observations.
pub fn upper_tail_mean(r: &[f64], level: f64) -> Result<f64> {
    check_nonempty(r)?;
    let order = ascending_order(r);
    let k = tail_size(1.0 - level, r.len());
    Ok(order[r.len() - k..].iter().map(|&i| r[i]).sum::<f64>() / k as f64)
}

struct Parts {
    reward: f64,
    risk: f64,
    d_reward: Vec<f64>,
    d_risk: Vec<f64>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn parts(spec: &RatioSpec, r: &[f64], want_grad: bool) -> Result<Parts> {
    let d = r.len();
    if d < 2 {
        return Err(Error::InsufficientData(format!(
            "ratio needs at least 2 returns, got {d}"
        )));
    }
    if let Some(v) = r.iter().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(format!("portfolio return {v}")));
    }
    if r.iter().all(|&v| v == r[0]) {
        return Err(Error::DegenerateRisk(format!(
            "{} undefined on a constant return vector",
            spec.kind
        )));
    }
    let n = d as f64;
    let mean = r.iter().sum::<f64>() / n;
    let mean_grad = || if want_grad { vec![1.0 / n; d] } else { Vec::new() };
    let zeros = || if want_grad { vec![0.0; d] } else { Vec::new() };

    let p = match spec.kind {
        RatioKind::Sharpe => {
            let var = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            let d_risk = if want_grad && sd > 0.0 {
                r.iter().map(|v| (v - mean) / (n * sd)).collect()
            } else {
                zeros()
            };
            Parts {
                reward: mean,
                risk: sd,
                d_reward: mean_grad(),
                d_risk,
            }
        }
        RatioKind::Mad => {
            let risk = r.iter().map(|v| (v - mean).abs()).sum::<f64>() / n;
            let d_risk = if want_grad {
                let signs: Vec<f64> = r.iter().map(|v| sign(v - mean)).collect();
                let avg = signs.iter().sum::<f64>() / n;
                signs.iter().map(|s| (s - avg) / n).collect()
            } else {
                Vec::new()
            };
            Parts {
                reward: mean,
                risk,
                d_reward: mean_grad(),
                d_risk,
            }
        }
        RatioKind::MiniMax => {
            let mut arg = 0;
            for (i, &v) in r.iter().enumerate() {
                if v < r[arg] {
                    arg = i;
                }
            }
            let mut d_risk = zeros();
            if want_grad {
                d_risk[arg] = -1.0;
            }
            Parts {
                reward: mean,
                risk: -r[arg],
                d_reward: mean_grad(),
                d_risk,
            }
        }
        RatioKind::Gini => {
            let order = ascending_order(r);
            // sum_{i != j} |r_i - r_j| = 2 sum_i (2i - D - 1) r_(i), i 1-based
            let pair_sum: f64 = order
                .iter()
                .enumerate()
                .map(|(i, &k)| (2.0 * (i + 1) as f64 - n - 1.0) * r[k])
                .sum::<f64>()
                * 2.0;
            let scale = 1.0 / (n * (n - 1.0));
            let risk = 0.5 * pair_sum * scale;
            let mut d_risk = zeros();
            if want_grad {
                // d risk / d r_k = scale * (#{j: r_j < r_k} - #{j: r_j > r_k})
                let mut i = 0;
                while i < d {
                    let mut j = i;
                    while j + 1 < d && r[order[j + 1]] == r[order[i]] {
                        j += 1;
                    }
                    let less = i as f64;
                    let greater = (d - 1 - j) as f64;
                    for &k in &order[i..=j] {
                        d_risk[k] = scale * (less - greater);
                    }
                    i = j + 1;
                }
            }
            Parts {
                reward: mean,
                risk,
                d_reward: mean_grad(),
                d_risk,
            }
        }
        RatioKind::Cvar | RatioKind::Rachev => {
            let order = ascending_order(r);
            let k = tail_size(spec.alpha, d);
            let risk = -order[..k].iter().map(|&i| r[i]).sum::<f64>() / k as f64;
            let mut d_risk = zeros();
            if want_grad {
                for &i in &order[..k] {
                    d_risk[i] = -1.0 / k as f64;
                }
            }
            if spec.kind == RatioKind::Cvar {
                Parts {
                    reward: mean,
                    risk,
                    d_reward: mean_grad(),
                    d_risk,
                }
            } else {
                let u = tail_size(1.0 - spec.beta, d);
                let reward = order[d - u..].iter().map(|&i| r[i]).sum::<f64>() / u as f64;
                let mut d_reward = zeros();
                if want_grad {
                    for &i in &order[d - u..] {
                        d_reward[i] = 1.0 / u as f64;
                    }
                }
                Parts {
                    reward,
                    risk,
                    d_reward,
                    d_risk,
                }
            }
        }
    };
    if p.risk == 0.0 {
        return Err(Error::DegenerateRisk(format!(
            "{} risk is exactly zero",
            spec.kind
        )));
    }
    Ok(p)
}

/// Evaluate `spec` on the return vector `r` (at least two entries).
pub fn evaluate(spec: &RatioSpec, r: &[f64]) -> Result<RatioValue> {
    let p = parts(spec, r, false)?;
    Ok(RatioValue {
        value: p.reward / p.risk,
        reward: p.reward,
        risk: p.risk,
        degenerate: p.risk < 0.0,
    })
}

/// Value and gradient `d psi / d r` in one pass.
pub fn evaluate_with_gradient(spec: &RatioSpec, r: &[f64]) -> Result<(RatioValue, Vec<f64>)> {
    let p = parts(spec, r, true)?;
    let value = p.reward / p.risk;
    let grad = p
        .d_reward
        .iter()
        .zip(&p.d_risk)
        .map(|(dr, dk)| (dr - value * dk) / p.risk)
        .collect();
    Ok((
        RatioValue {
            value,
            reward: p.reward,
            risk: p.risk,
            degenerate: p.risk < 0.0,
        },
        grad,
    ))
}

/// Subgradient of the ratio with respect to each return.
///
/// Tail membership and the MiniMax argmin (first index on ties) are frozen at
/// `r`; `sign(0) = 0` for MAD and Gini.
pub fn gradient_wrt_returns(spec: &RatioSpec, r: &[f64]) -> Result<Vec<f64>> {
    evaluate_with_gradient(spec, r).map(|(_, g)| g)
}
