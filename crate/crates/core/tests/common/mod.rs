//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use condalloc::ratios::RatioKind;

/// Tail level as an exact fraction `num / 1000`.
#[derive(Debug, Clone, Copy)]
pub struct Level(pub u64);

impl Level {
    pub fn as_f64(self) -> f64 {
        self.0 as f64 / 1000.0
    }

    /// `ceil(level * d)` in integer arithmetic.
    pub fn tail(self, d: usize) -> usize {
        ((self.0 * d as u64).div_ceil(1000)) as usize
    }

    /// `max(1, ceil((1 - level) * d))`.
    pub fn upper_tail(self, d: usize) -> usize {
        (((1000 - self.0) * d as u64).div_ceil(1000) as usize).max(1)
    }
}

/// Selection sort, ascending.
pub fn naive_sorted(r: &[f64]) -> Vec<f64> {
    let mut v = r.to_vec();
    for i in 0..v.len() {
        let mut m = i;
        for j in i + 1..v.len() {
            if v[j] < v[m] {
                m = j;
            }
        }
        v.swap(i, m);
    }
    v
}

fn mean(r: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in r {
        s += x;
    }
    s / r.len() as f64
}

/// Reward and risk by explicit loops; `None` when the risk is exactly zero.
pub fn brute_force_ratio(kind: RatioKind, alpha: Level, beta: Level, r: &[f64]) -> Option<f64> {
    let d = r.len();
    let m = mean(r);
    let sorted = naive_sorted(r);
    let etl = || {
        let k = alpha.tail(d);
        let mut s = 0.0;
        for x in &sorted[..k] {
            s -= x;
        }
        s / k as f64
    };
    let (reward, risk) = match kind {
        RatioKind::Sharpe => {
            let mut s = 0.0;
            for x in r {
                s += (x - m) * (x - m);
            }
            (m, (s / d as f64).sqrt())
        }
        RatioKind::Mad => {
            let mut s = 0.0;
            for x in r {
                s += (x - m).abs();
            }
            (m, s / d as f64)
        }
        RatioKind::Gini => {
            let mut s = 0.0;
            for i in 0..d {
                for j in 0..d {
                    if i != j {
                        s += (r[i] - r[j]).abs();
                    }
                }
            }
            (m, 0.5 * s / (d * (d - 1)) as f64)
        }
        RatioKind::MiniMax => {
            let mut lo = r[0];
            for &x in r {
                if x < lo {
                    lo = x;
                }
            }
            (m, -lo)
        }
        RatioKind::Cvar => (m, etl()),
        RatioKind::Rachev => {
            let k = beta.upper_tail(d);
            let mut s = 0.0;
            for x in &sorted[d - k..] {
                s += x;
            }
            (s / k as f64, etl())
        }
    };
    (risk != 0.0).then(|| reward / risk)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

/// `||a - b||_2 / ||b||_2`.
pub fn vector_relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    if num == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Central differences of `f` at `x` with step `1e-6 * max(1, |x_i|)`.
pub fn central_differences(x: &[f64], mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

use condalloc::calendar::YearMonth;
use condalloc::data::{AlignedDataset, MonthPair};
use condalloc::network::NetworkParams;
use condalloc::ratios::{tail_size, RatioSpec};
use condalloc::synthetic::rng;
use condalloc::training::{evaluate_objective, portfolio_returns};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

/// Standard-normal states and `N(0.0005, 0.01^2)` daily returns.
pub fn toy_dataset(seed: u64, months: usize, days: usize, vars: usize, assets: usize) -> AlignedDataset {
    let mut g = rng(seed);
    let start = YearMonth { year: 2000, month: 1 };
    let pairs = (0..months)
        .map(|t| MonthPair {
            state_month: start.add_months(t),
            state: DVector::from_fn(vars, |_, _| g.sample(StandardNormal)),
            returns: DMatrix::from_fn(days, assets, |_, _| 0.0005 + 0.01 * g.sample::<f64, _>(StandardNormal)),
        })
        .collect();
    AlignedDataset {
        pairs,
        variable_names: (0..vars).map(|i| format!("z{i}")).collect(),
        asset_names: (0..assets).map(|j| format!("a{j}")).collect(),
    }
}

/// Which returns sit in each tail (and which is the minimum) for every month.
fn tail_signature(params: &NetworkParams, data: &AlignedDataset, spec: &RatioSpec) -> Vec<(Vec<usize>, Vec<usize>, usize)> {
    data.pairs
        .iter()
        .map(|p| {
            let r = portfolio_returns(&p.returns, &params.forward(p.state.as_slice()));
            let mut idx: Vec<usize> = (0..r.len()).collect();
            idx.sort_by(|&a, &b| r[a].total_cmp(&r[b]));
            let k = tail_size(spec.alpha, r.len());
            let k_up = tail_size(1.0 - spec.beta, r.len());
            let mut lower = idx[..k].to_vec();
            let mut upper = idx[r.len() - k_up..].to_vec();
            lower.sort_unstable();
            upper.sort_unstable();
            (lower, upper, idx[0])
        })
        .collect()
}

/// True when no difference step in any single parameter changes a tail set
/// or the minimum of any month.
pub fn is_strict_point(params: &NetworkParams, data: &AlignedDataset, spec: &RatioSpec) -> bool {
    let base = tail_signature(params, data, spec);
    let x = params.flat();
    let mut p = params.clone();
    for i in 0..x.len() {
        for sign in [-1.0, 1.0] {
            let mut y = x.clone();
            y[i] += sign * 1e-6 * x[i].abs().max(1.0);
            p.set_flat(&y);
            if tail_signature(&p, data, spec) != base {
                return false;
            }
        }
    }
    true
}

/// Relative error of the analytic objective gradient against central differences.
pub fn objective_gradient_error(params: &NetworkParams, data: &AlignedDataset, spec: &RatioSpec) -> f64 {
    let g = evaluate_objective(params, data, spec, true).unwrap().gradient.unwrap().flat();
    let mut p = params.clone();
    let fd = central_differences(&params.flat(), |x| {
        p.set_flat(x);
        evaluate_objective(&p, data, spec, false).unwrap().value
    });
    vector_relative_error(&g, &fd)
}

/// `(1/T) sum_t (x_t'e - 1)` from forward passes.
pub fn mean_budget_residual(params: &NetworkParams, data: &AlignedDataset) -> f64 {
    data.pairs
        .iter()
        .map(|p| params.forward(p.state.as_slice()).iter().sum::<f64>() - 1.0)
        .sum::<f64>()
        / data.len() as f64
}
