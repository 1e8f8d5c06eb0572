//! CRRA utility and the linear-in-states parametric policy for two assets.

use rand::Rng;

use crate::data::AlignedDataset;
use crate::error::{Error, Result};
use crate::synthetic::rng;

pub const DEFAULT_GAMMA: f64 = 5.0;

/// `(1 + r)^(1 - gamma) / (1 - gamma)`.
pub fn crra_utility(r: f64, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    if !(r > -1.0) || !r.is_finite() {
        return Err(Error::NonFiniteInput(format!("CRRA utility undefined at return {r}")));
    }
    Ok((1.0 + r).powf(1.0 - gamma) / (1.0 - gamma))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma > 0.0) || gamma == 1.0 || !gamma.is_finite() {
        return Err(Error::Config(format!(
            "CRRA risk aversion must be positive and not 1, got {gamma}"
        )));
    }
    Ok(())
}

/// Weight on the first asset is `clip(theta0 + theta'z, 0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParametricPolicy {
    pub theta0: f64,
    pub theta: Vec<f64>,
    pub gamma: f64,
}

impl ParametricPolicy {
    pub fn linear(&self, z: &[f64]) -> f64 {
        self.theta0 + self.theta.iter().zip(z).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn first_weight(&self, z: &[f64]) -> f64 {
        self.linear(z).clamp(0.0, 1.0)
    }
}

/// `[x, 1 - x]` for standardized state `z`.
pub fn apply_parametric_policy(policy: &ParametricPolicy, z: &[f64]) -> Vec<f64> {
    let x = policy.first_weight(z);
    vec![x, 1.0 - x]
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParametricFitOptions {
    pub restarts: usize,
    pub max_iters: usize,
    pub seed: u64,
    /// Fit the state slopes; when false only the intercept moves.
    pub fit_slopes: bool,
}

impl Default for ParametricFitOptions {
    fn default() -> Self {
        Self {
            restarts: 10,
            max_iters: 500,
            seed: 0,
            fit_slopes: true,
        }
    }
}

/// Mean over months of the mean daily CRRA utility, and its gradient.
fn utility_and_grad(data: &AlignedDataset, policy: &ParametricPolicy) -> Result<(f64, Vec<f64>)> {
    let m = policy.theta.len();
    let t_len = data.len() as f64;
    let mut total = 0.0;
    let mut grad = vec![0.0; m + 1];
    for pair in &data.pairs {
        let z = pair.state.as_slice();
        let lin = policy.linear(z);
        let x = lin.clamp(0.0, 1.0);
        let days = pair.returns.nrows() as f64;
        let mut u = 0.0;
        let mut du_dx = 0.0;
        for d in 0..pair.returns.nrows() {
            let (a, b) = (pair.returns[(d, 0)], pair.returns[(d, 1)]);
            let r = x * a + (1.0 - x) * b;
            u += crra_utility(r, policy.gamma)?;
            du_dx += (1.0 + r).powf(-policy.gamma) * (a - b);
        }
        total += u / days;
        if lin > 0.0 && lin < 1.0 {
            let g = du_dx / days / t_len;
            grad[0] += g;
            for j in 0..m {
                grad[j + 1] += g * z[j];
            }
        }
    }
    let value = total / t_len;
    if !value.is_finite() {
        return Err(Error::NonFiniteInput("parametric policy utility".into()));
    }
    Ok((value, grad))
}

/// In-sample mean utility of a policy.
pub fn mean_utility(data: &AlignedDataset, policy: &ParametricPolicy) -> Result<f64> {
    utility_and_grad(data, policy).map(|(v, _)| v)
}

fn ascend(data: &AlignedDataset, mut p: ParametricPolicy, opts: &ParametricFitOptions) -> Result<(f64, ParametricPolicy)> {
    let (mut value, mut grad) = utility_and_grad(data, &p)?;
    if !opts.fit_slopes {
        grad[1..].iter_mut().for_each(|g| *g = 0.0);
    }
    let mut step = 1.0;
    for _ in 0..opts.max_iters {
        let norm2: f64 = grad.iter().map(|g| g * g).sum();
        if norm2 == 0.0 {
            break;
        }
        let norm = norm2.sqrt();
        // Armijo backtracking along the normalized gradient.
        let mut accepted = false;
        while step > 1e-10 {
            let mut q = p.clone();
            q.theta0 += step * grad[0] / norm;
            for j in 0..q.theta.len() {
                q.theta[j] += step * grad[j + 1] / norm;
            }
            let (v, g) = utility_and_grad(data, &q)?;
            if v >= value + 1e-4 * step * norm {
                p = q;
                value = v;
                grad = g;
                if !opts.fit_slopes {
                    grad[1..].iter_mut().for_each(|g| *g = 0.0);
                }
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        step = (step * 2.0).min(10.0);
    }
    Ok((value, p))
}

/// Fit `theta0, theta` by gradient ascent from several seeded starting points.
///
/// `data` must carry two assets and standardized states.
pub fn fit_parametric_policy(data: &AlignedDataset, gamma: f64, opts: &ParametricFitOptions) -> Result<ParametricPolicy> {
    check_gamma(gamma)?;
    if data.n_assets() != 2 {
        return Err(Error::Config(format!(
            "parametric policy needs exactly 2 assets, got {}",
            data.n_assets()
        )));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("parametric policy fit over zero months".into()));
    }
    let m = data.n_vars();
    let mut rng = rng(opts.seed);
    let mut best: Option<(f64, ParametricPolicy)> = None;
    for k in 0..opts.restarts.max(1) {
        let start = if k == 0 {
            ParametricPolicy {
                theta0: 0.5,
                theta: vec![0.0; m],
                gamma,
            }
        } else {
            ParametricPolicy {
                theta0: rng.random_range(0.0..1.0),
                theta: (0..m)
                    .map(|_| if opts.fit_slopes { rng.random_range(-1.0..1.0) } else { 0.0 })
                    .collect(),
                gamma,
            }
        };
        let (v, p) = ascend(data, start, opts)?;
        if best.as_ref().is_none_or(|(bv, _)| v > *bv) {
            best = Some((v, p));
        }
    }
    Ok(best.unwrap().1)
}

/// Constant `[stock_pct, 1 - stock_pct]`.
pub fn static_weights(stock_pct: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&stock_pct) {
        return Err(Error::Config(format!("static weight {stock_pct} outside [0, 1]")));
    }
    Ok(vec![stock_pct, 1.0 - stock_pct])
}

/// The three static mixes used as reference portfolios.
pub const STATIC_PRESETS: [f64; 3] = [0.2, 0.6, 0.8];
