//! Gradient ascent on the month-averaged Lagrangian
//! `(1/T) sum_t [ psi(x_t' R_{t+1}) + mu (x_t' e - 1) ]` with `x_t = net(z_t)`.

use serde::{Deserialize, Serialize};

use crate::data::{AlignedDataset, StandardizationStats};
use crate::error::{Error, Result};
use crate::network::{NetworkParams, NetworkShape, OutputMode, ParamGradients};
use crate::ratios::{self, RatioSpec};
use crate::synthetic::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub gamma0: f64,
    pub max_iters: usize,
    /// Iterations without an improvement above `improvement_tol` before stopping.
    pub patience: usize,
    pub improvement_tol: f64,
    pub seed: u64,
    pub hidden_grid: Vec<usize>,
    pub cv_folds: usize,
    /// Bound on the mean budget residual `|x'e - 1|` for `converged`.
    pub constraint_tol: f64,
    /// Independent initializations per fit; the one ending with the highest
    /// objective is kept.
    pub restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            gamma0: 0.5,
            max_iters: 5_000,
            patience: 200,
            improvement_tol: 1e-8,
            seed: 0,
            hidden_grid: vec![2, 4, 8],
            cv_folds: 3,
            constraint_tol: 0.01,
            restarts: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma0 > 0.0) || !self.gamma0.is_finite() {
            return Err(Error::Config(format!("gamma0 must be positive, got {}", self.gamma0)));
        }
        if self.max_iters == 0 || self.patience == 0 || self.restarts == 0 {
            return Err(Error::Config("max_iters, patience and restarts must be positive".into()));
        }
        if !(self.improvement_tol > 0.0) || !(self.constraint_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if self.hidden_grid.is_empty() || self.hidden_grid.contains(&0) {
            return Err(Error::Config("hidden_grid must list positive sizes".into()));
        }
        if self.hidden_grid.len() > 1 && self.cv_folds < 2 {
            return Err(Error::Config("cv_folds must be at least 2 to choose among hidden sizes".into()));
        }
        Ok(())
    }
}

/// Step size of iteration `i` (0-based): `gamma0 / (1 + i)`.
pub fn learning_rate(iteration: usize, gamma0: f64) -> f64 {
    gamma0 / (1.0 + iteration as f64)
}

/// Objective value plus diagnostics at one parameter point.
#[derive(Debug, Clone)]
pub struct ObjectiveEval {
    pub value: f64,
    /// Mean of `x_t'e - 1` over months, which is also `dL/dmu`.
    pub mean_residual: f64,
    pub mean_abs_residual: f64,
    pub gradient: Option<ParamGradients>,
}

/// Daily portfolio returns `R x` for one month.
pub fn portfolio_returns(returns: &nalgebra::DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    (0..returns.nrows())
        .map(|d| (0..x.len()).map(|j| returns[(d, j)] * x[j]).sum())
        .collect()
}

/// Evaluate the averaged Lagrangian on standardized `data`, optionally with
/// its gradient with respect to every parameter including `mu`.
pub fn evaluate_objective(
    params: &NetworkParams,
    data: &AlignedDataset,
    spec: &RatioSpec,
    want_grad: bool,
) -> Result<ObjectiveEval> {
    if data.is_empty() {
        return Err(Error::InsufficientData("objective over zero months".into()));
    }
    let t_len = data.len() as f64;
    let n = params.shape.assets;
    let mut value = 0.0;
    let mut resid_sum = 0.0;
    let mut abs_resid = 0.0;
    let mut grad = want_grad.then(|| ParamGradients::zeros_like(params));
    for pair in &data.pairs {
        let z = pair.state.as_slice();
        let act = params.forward_activations(z);
        let x = &act.weights;
        let r = portfolio_returns(&pair.returns, x);
        let resid = x.iter().sum::<f64>() - 1.0;
        let psi = if let Some(g) = grad.as_mut() {
            let (v, dr) = ratios::evaluate_with_gradient(spec, &r).map_err(|e| month_err(e, pair))?;
            let upstream: Vec<f64> = (0..n)
                .map(|j| {
                    let d_psi: f64 = (0..r.len()).map(|d| pair.returns[(d, j)] * dr[d]).sum();
                    d_psi + params.mu
                })
                .collect();
            params.backward_into(z, &act, &upstream, 1.0 / t_len, g);
            v.value
        } else {
            ratios::evaluate(spec, &r).map_err(|e| month_err(e, pair))?.value
        };
        value += psi + params.mu * resid;
        resid_sum += resid;
        abs_resid += resid.abs();
    }
    let mean_residual = resid_sum / t_len;
    if let Some(g) = grad.as_mut() {
        g.mu = mean_residual;
    }
    Ok(ObjectiveEval {
        value: value / t_len,
        mean_residual,
        mean_abs_residual: abs_resid / t_len,
        gradient: grad,
    })
}

fn month_err(e: Error, pair: &crate::data::MonthPair) -> Error {
    match e {
        Error::DegenerateRisk(m) => Error::DegenerateRisk(format!("{}: {m}", pair.return_month())),
        other => other,
    }
}

/// The averaged Lagrangian value.
pub fn lagrangian_objective(params: &NetworkParams, data: &AlignedDataset, spec: &RatioSpec) -> Result<f64> {
    evaluate_objective(params, data, spec, false).map(|e| e.value)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub params: NetworkParams,
    pub spec: RatioSpec,
    pub stats: StandardizationStats,
    pub config: TrainConfig,
    /// Seed that initialised the kept restart.
    pub seed: u64,
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    /// Mean `|x_t'e - 1|` over the training months at the returned parameters.
    pub mean_abs_budget_residual: f64,
    pub variable_names: Vec<String>,
    pub asset_names: Vec<String>,
}

impl TrainedModel {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: TrainedModel =
            serde_json::from_str(s).map_err(|e| Error::Config(format!("model JSON: {e}")))?;
        m.params.validate()?;
        if m.stats.means.len() != m.params.shape.inputs || m.stats.stddevs.len() != m.params.shape.inputs {
            return Err(Error::Config("model stats do not match its input count".into()));
        }
        if m.stats.stddevs.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("model stats contain a non-positive stddev".into()));
        }
        Ok(m)
    }
}

/// Run gradient ascent from `NetworkParams::init` on standardized data, once
/// per restart, seeding restart `r` with [`restart_seed`]`(seed, r)`.
pub fn train_with_seed(
    data: &AlignedDataset,
    spec: &RatioSpec,
    shape: NetworkShape,
    config: &TrainConfig,
    stats: &StandardizationStats,
    seed: u64,
) -> Result<TrainedModel> {
    config.validate()?;
    shape.validate()?;
    spec.validate()?;
    if data.len() < 12 {
        return Err(Error::InsufficientData(format!(
            "training needs at least 12 months, got {}",
            data.len()
        )));
    }
    if data.n_vars() != shape.inputs || data.n_assets() != shape.assets {
        return Err(Error::Config(format!(
            "network expects {} states and {} assets, data has {} and {}",
            shape.inputs,
            shape.assets,
            data.n_vars(),
            data.n_assets()
        )));
    }
    let mut best: Option<(f64, u64, NetworkParams, Vec<f64>)> = None;
    for r in 0..config.restarts {
        let init_seed = restart_seed(seed, r);
        let (params, trace) = ascend(NetworkParams::init(shape, init_seed), data, spec, config)?;
        let value = lagrangian_objective(&params, data, spec)?;
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, init_seed, params, trace));
        }
    }
    let (_, init_seed, params, trace) = best.expect("at least one restart");
    let last = evaluate_objective(&params, data, spec, false)?;
    Ok(TrainedModel {
        params,
        spec: *spec,
        stats: stats.clone(),
        config: config.clone(),
        seed: init_seed,
        objective_trace: trace,
        converged: last.mean_abs_residual <= config.constraint_tol,
        mean_abs_budget_residual: last.mean_abs_residual,
        variable_names: data.variable_names.clone(),
        asset_names: data.asset_names.clone(),
    })
}

/// Seed offset between restarts of one fit.
pub const RESTART_SEED_STRIDE: u64 = 1_000_003;

/// Initialization seed of restart `r`; restart 0 uses `seed` itself.
pub fn restart_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add((r as u64).wrapping_mul(RESTART_SEED_STRIDE))
}

/// Plain gradient ascent with the harmonic step schedule and patience stop.
fn ascend(
    mut params: NetworkParams,
    data: &AlignedDataset,
    spec: &RatioSpec,
    config: &TrainConfig,
) -> Result<(NetworkParams, Vec<f64>)> {
    let mut trace = Vec::new();
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    for i in 0..config.max_iters {
        let eval = evaluate_objective(&params, data, spec, true)?;
        if !eval.value.is_finite() {
            return Err(Error::NonFiniteInput(format!(
                "objective diverged at iteration {i}"
            )));
        }
        trace.push(eval.value);
        if eval.value > best + config.improvement_tol {
            best = eval.value;
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.patience {
                break;
            }
        }
        let grad = eval.gradient.expect("gradient requested");
        params.add_scaled(&grad, learning_rate(i, config.gamma0));
        if !params.is_finite() {
            return Err(Error::NonFiniteInput(format!(
                "parameters diverged at iteration {i}"
            )));
        }
    }
    Ok((params, trace))
}

/// Train with `config.seed` on standardized data.
pub fn train(
    data: &AlignedDataset,
    spec: &RatioSpec,
    shape: NetworkShape,
    config: &TrainConfig,
    stats: &StandardizationStats,
) -> Result<TrainedModel> {
    train_with_seed(data, spec, shape, config, stats, config.seed)
}

/// Mean monthly ratio of the network's portfolios over `data`.
pub fn mean_monthly_ratio(params: &NetworkParams, data: &AlignedDataset, spec: &RatioSpec) -> Result<f64> {
    let mut total = 0.0;
    for pair in &data.pairs {
        let x = params.forward(pair.state.as_slice());
        total += ratios::evaluate(spec, &portfolio_returns(&pair.returns, &x))?.value;
    }
    Ok(total / data.len() as f64)
}

/// Contiguous fold boundaries splitting `t` months into `k` blocks.
pub fn fold_ranges(t: usize, k: usize) -> Vec<std::ops::Range<usize>> {
    (0..k).map(|f| (f * t / k)..((f + 1) * t / k)).collect()
}

/// Held-out score of each hidden size in `config.hidden_grid`, in grid order.
pub fn cv_scores(
    data: &AlignedDataset,
    spec: &RatioSpec,
    shape: NetworkShape,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let k = config.cv_folds;
    let folds = fold_ranges(data.len(), k);
    if folds.iter().any(|f| f.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "{} months are too few for {k} folds",
            data.len()
        )));
    }
    let mut scores = Vec::with_capacity(config.hidden_grid.len());
    for (g, &hidden) in config.hidden_grid.iter().enumerate() {
        let mut total = 0.0;
        for (f, held) in folds.iter().enumerate() {
            let train_idx: Vec<usize> = (0..data.len()).filter(|i| !held.contains(i)).collect();
            let train_set = data.select(&train_idx);
            let held_set = data.slice(held.clone());
            let model = train_with_seed(
                &train_set,
                spec,
                shape.with_hidden(hidden),
                config,
                &StandardizationStats {
                    means: vec![0.0; data.n_vars()],
                    stddevs: vec![1.0; data.n_vars()],
                },
                derive_seed(config.seed, f, g),
            )?;
            total += mean_monthly_ratio(&model.params, &held_set, spec)?;
        }
        scores.push(total / k as f64);
    }
    Ok(scores)
}

/// Index of the best score; exact ties go to the smaller hidden size.
pub fn pick_hidden(grid: &[usize], scores: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..grid.len() {
        if scores[i] > scores[best] || (scores[i] == scores[best] && grid[i] < grid[best]) {
            best = i;
        }
    }
    grid[best]
}

/// Choose the hidden size by contiguous-block cross-validation.
pub fn cross_validate(
    data: &AlignedDataset,
    spec: &RatioSpec,
    shape: NetworkShape,
    config: &TrainConfig,
) -> Result<usize> {
    config.validate()?;
    if config.hidden_grid.len() == 1 {
        return Ok(config.hidden_grid[0]);
    }
    let scores = cv_scores(data, spec, shape, config)?;
    Ok(pick_hidden(&config.hidden_grid, &scores))
}

/// Standardize a raw training window, choose the hidden size and train.
///
/// `shape.hidden` is overwritten by the cross-validated choice.
pub fn fit_window(
    raw: &AlignedDataset,
    spec: &RatioSpec,
    shape: NetworkShape,
    config: &TrainConfig,
) -> Result<TrainedModel> {
    let stats = StandardizationStats::from_columns(&raw.states(), &raw.variable_names)?;
    let data = raw.standardized(&stats)?;
    let hidden = cross_validate(&data, spec, shape, config)?;
    train(&data, spec, shape.with_hidden(hidden), config, &stats)
}

/// Weights produced by a trained model for one month.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub weights: Vec<f64>,
    /// Lagrangian-mode weights whose sum missed 1 by more than the
    /// constraint tolerance and were rescaled to sum to 1.
    pub renormalized: bool,
    pub raw_sum: f64,
}

/// Portfolio weights for a raw (unstandardized) state vector.
pub fn predict_weights(model: &TrainedModel, z_raw: &[f64]) -> Prediction {
    let z = model.stats.apply_slice(z_raw);
    let mut weights = model.params.forward(z.as_slice());
    let raw_sum: f64 = weights.iter().sum();
    let mut renormalized = false;
    if model.params.shape.mode == OutputMode::Lagrangian && (raw_sum - 1.0).abs() > model.config.constraint_tol {
        weights.iter_mut().for_each(|w| *w /= raw_sum);
        renormalized = true;
    }
    Prediction {
        weights,
        renormalized,
        raw_sum,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::YearMonth;
    use crate::data::MonthPair;
    use crate::network::OutputMode;
    use crate::ratios::RatioKind;
    use approx::assert_relative_eq;
    use nalgebra::{DMatrix, DVector};
    use rand::Rng;

    pub(crate) fn toy_dataset(t: usize, seed: u64) -> AlignedDataset {
        let mut r = crate::synthetic::rng(seed);
        let pairs = (0..t)
            .map(|i| MonthPair {
                state_month: YearMonth { year: 2000, month: 1 }.add_months(i),
                state: DVector::from_fn(2, |_, _| r.random_range(-1.5..1.5)),
                returns: DMatrix::from_fn(21, 2, |_, _| r.random_range(-0.02..0.022)),
            })
            .collect();
        AlignedDataset {
            pairs,
            variable_names: vec!["a".into(), "b".into()],
            asset_names: vec!["x".into(), "y".into()],
        }
    }

    #[test]
    fn learning_rate_schedule() {
        assert_eq!(learning_rate(0, 0.1), 0.1);
        assert_eq!(learning_rate(1, 0.1), 0.05);
        assert_relative_eq!(learning_rate(9, 0.1), 0.01, max_relative = 1e-15);
    }

    #[test]
    fn mu_term_vanishes_when_mu_is_zero_or_complement() {
        let data = toy_dataset(6, 1);
        let spec = RatioSpec::sharpe();
        let p = NetworkParams::init(NetworkShape::new(2, 3, 2, OutputMode::Lagrangian).unwrap(), 4);
        let obj = lagrangian_objective(&p, &data, &spec).unwrap();
        assert_relative_eq!(obj, mean_monthly_ratio(&p, &data, &spec).unwrap(), max_relative = 1e-12);

        let mut c = NetworkParams::init(NetworkShape::new(2, 3, 2, OutputMode::Complement).unwrap(), 4);
        c.mu = 3.7;
        let e = evaluate_objective(&c, &data, &spec, true).unwrap();
        assert_eq!(e.mean_residual, 0.0);
        assert_eq!(e.value, mean_monthly_ratio(&c, &data, &spec).unwrap());
    }

    #[test]
    fn saturated_single_month_equals_asset_sharpe() {
        let data = toy_dataset(1, 2);
        let spec = RatioSpec::sharpe();
        let mut p = NetworkParams::zeros(NetworkShape::new(2, 1, 2, OutputMode::Complement).unwrap());
        p.b_out[0] = 40.0;
        let col: Vec<f64> = data.pairs[0].returns.column(0).iter().copied().collect();
        let expected = ratios::evaluate(&spec, &col).unwrap().value;
        assert_relative_eq!(lagrangian_objective(&p, &data, &spec).unwrap(), expected, max_relative = 1e-12);
    }

    #[test]
    fn mu_gradient_is_mean_residual() {
        let data = toy_dataset(6, 3);
        let mut p = NetworkParams::init(NetworkShape::new(2, 3, 2, OutputMode::Lagrangian).unwrap(), 9);
        p.b_out = vec![0.8, 0.3];
        p.mu = -0.4;
        let e = evaluate_objective(&p, &data, &RatioSpec::new(RatioKind::Gini), true).unwrap();
        let closed: f64 = data
            .pairs
            .iter()
            .map(|q| p.forward(q.state.as_slice()).iter().sum::<f64>() - 1.0)
            .sum::<f64>()
            / 6.0;
        assert!((e.gradient.unwrap().mu - closed).abs() <= 1e-12);
    }

    #[test]
    fn training_is_deterministic() {
        let data = toy_dataset(24, 5);
        let stats = StandardizationStats {
            means: vec![0.0; 2],
            stddevs: vec![1.0; 2],
        };
        let cfg = TrainConfig {
            max_iters: 50,
            ..Default::default()
        };
        let shape = NetworkShape::new(2, 3, 2, OutputMode::Lagrangian).unwrap();
        let a = train(&data, &RatioSpec::sharpe(), shape, &cfg, &stats).unwrap();
        let b = train(&data, &RatioSpec::sharpe(), shape, &cfg, &stats).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        assert!(!a.objective_trace.is_empty());
        let back = TrainedModel::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }

    #[test]
    fn training_rejects_short_windows() {
        let data = toy_dataset(11, 5);
        let stats = StandardizationStats {
            means: vec![0.0; 2],
            stddevs: vec![1.0; 2],
        };
        let shape = NetworkShape::new(2, 3, 2, OutputMode::Lagrangian).unwrap();
        let r = train(&data, &RatioSpec::sharpe(), shape, &TrainConfig::default(), &stats);
        assert!(matches!(r, Err(Error::InsufficientData(_))));
    }

    #[test]
    fn singleton_grid_skips_cv() {
        let data = toy_dataset(3, 5);
        let cfg = TrainConfig {
            hidden_grid: vec![4],
            ..Default::default()
        };
        let shape = NetworkShape::new(2, 1, 2, OutputMode::Lagrangian).unwrap();
        assert_eq!(cross_validate(&data, &RatioSpec::sharpe(), shape, &cfg).unwrap(), 4);
    }

    #[test]
    fn hidden_ties_pick_smaller() {
        assert_eq!(pick_hidden(&[8, 4], &[1.0, 1.0]), 4);
        assert_eq!(pick_hidden(&[2, 4, 8], &[0.1, 0.3, 0.2]), 4);
        assert_eq!(pick_hidden(&[2, 4], &[0.5, 0.5]), 2);
    }

    #[test]
    fn folds_tile_the_window() {
        let f = fold_ranges(10, 3);
        assert_eq!(f, vec![0..3, 3..6, 6..10]);
    }

    #[test]
    fn predict_renormalizes_lagrangian_weights() {
        let shape = NetworkShape::new(1, 1, 2, OutputMode::Lagrangian).unwrap();
        let mut params = NetworkParams::zeros(shape);
        params.b_out = vec![3.0, 3.0];
        let model = TrainedModel {
            params,
            spec: RatioSpec::sharpe(),
            stats: StandardizationStats {
                means: vec![1.0],
                stddevs: vec![2.0],
            },
            config: TrainConfig::default(),
            seed: 0,
            objective_trace: vec![0.0],
            converged: false,
            mean_abs_budget_residual: 0.9,
            variable_names: vec!["z".into()],
            asset_names: vec!["a".into(), "b".into()],
        };
        let p = predict_weights(&model, &[1.0]);
        assert!(p.renormalized);
        assert_relative_eq!(p.weights[0] + p.weights[1], 1.0, max_relative = 1e-15);
        assert_eq!(p.weights[0], 0.5);
    }
}
