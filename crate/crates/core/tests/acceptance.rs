//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 1 8`.

mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use common::{
    brute_force_ratio, is_strict_point, mean_budget_residual, objective_gradient_error, relative_error,
    toy_dataset, Level,
};
use condalloc::backtest::{
    build_schedule, evaluate_models, mean_difference_test, paired_ratio_values, rank_from_statistics,
    run_benchmark, BacktestReport,
};
use condalloc::benchmarks::grid::two_asset_grid;
use condalloc::benchmarks::parametric::crra_utility;
use condalloc::benchmarks::simulate::simulate_paths;
use condalloc::benchmarks::{optimize_weights_grid, BenchmarkMethod, BenchmarkOptions};
use condalloc::calendar::YearMonth;
use condalloc::data::{align_months, AlignedDataset};
use condalloc::interpret::{
    connection_weights, perturb_sensitivity, permutation_importance, DEFAULT_REPETITIONS,
};
use condalloc::network::{NetworkParams, NetworkShape, OutputMode};
use condalloc::ratios::{self, RatioKind, RatioSpec};
use condalloc::synthetic::{generate_synthetic, rng, SyntheticConfig};
use condalloc::training::{
    fit_window, learning_rate, portfolio_returns, predict_weights, TrainConfig, TrainedModel,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

// ---- pinned tolerances -------------------------------------------------------

const RATIO_REL_TOL: f64 = 1e-10;
const RATIO_VECTORS: usize = 1_000;
const RATIO_MAX_LEN: usize = 500;
const RATIO_TIME_LIMIT_S: f64 = 10.0;

const GRADIENT_REL_TOL: f64 = 1e-4;
const GRADIENT_POINTS: usize = 20;
const MU_GRADIENT_TOL: f64 = 1e-12;

const BUDGET_TOL: f64 = 0.01;
const CONSTRAINT_SEEDS: u64 = 10;

const PLANTED_SEEDS: u64 = 100;
const ORACLE_FRACTION: f64 = 0.9;
const RECOVERY_WINS: usize = 90;
const SEED_TIME_LIMIT_S: f64 = 300.0;
const STATIC_PRESETS: [f64; 3] = [0.2, 0.6, 0.8];

const ORDERING_SEEDS: u64 = 4;
const ORDERING_P: f64 = 0.05;

const GRID_PANELS: usize = 100;
const GRID_TOL: f64 = 0.001;

const PI_WINS: usize = 95;
const CW_WINS: usize = 90;

const RANK_CORRELATION: (f64, f64) = (0.31, 0.005);
const RANK_P: (f64, f64) = (0.54, 0.02);

// ---- planted dataset ---------------------------------------------------------

const TRAIN_MONTHS: usize = 216;
const TEST_MONTHS: usize = 60;

fn planted_config() -> SyntheticConfig {
    SyntheticConfig {
        months: TRAIN_MONTHS + TEST_MONTHS,
        days_per_month: 21,
        ..SyntheticConfig::default()
    }
}

fn planted_train_config(seed: u64) -> TrainConfig {
    TrainConfig {
        seed,
        gamma0: 35.0,
        max_iters: 10_000,
        hidden_grid: vec![2],
        restarts: 20,
        ..TrainConfig::default()
    }
}

fn planted_data(seed: u64) -> AlignedDataset {
    let (panel, states) = generate_synthetic(&planted_config(), seed).unwrap();
    align_months(&panel, &states).unwrap()
}

struct PlantedRun {
    data: AlignedDataset,
    model: TrainedModel,
    seconds: f64,
}

impl PlantedRun {
    fn test(&self) -> AlignedDataset {
        self.data.slice(TRAIN_MONTHS..TRAIN_MONTHS + TEST_MONTHS)
    }
}

fn fit_planted(data: &AlignedDataset, spec: &RatioSpec, mode: OutputMode, seed: u64) -> TrainedModel {
    let shape = NetworkShape::new(data.n_vars(), 2, data.n_assets(), mode).unwrap();
    fit_window(&data.slice(0..TRAIN_MONTHS), spec, shape, &planted_train_config(seed)).unwrap()
}

/// Complement-mode Sharpe networks on the planted data, shared by several criteria.
#[derive(Default)]
struct Shared {
    planted: Vec<PlantedRun>,
}

impl Shared {
    fn planted(&mut self) -> &[PlantedRun] {
        if self.planted.is_empty() {
            for seed in 0..PLANTED_SEEDS {
                let data = planted_data(seed);
                let t0 = Instant::now();
                let model = fit_planted(&data, &RatioSpec::sharpe(), OutputMode::Complement, seed);
                let seconds = t0.elapsed().as_secs_f64();
                self.planted.push(PlantedRun { data, model, seconds });
            }
        }
        &self.planted
    }
}

fn mean_monthly_sharpe(data: &AlignedDataset, weights: impl Fn(usize) -> Vec<f64>) -> f64 {
    let spec = RatioSpec::sharpe();
    let total: f64 = data
        .pairs
        .iter()
        .enumerate()
        .map(|(t, p)| ratios::evaluate(&spec, &portfolio_returns(&p.returns, &weights(t))).unwrap().value)
        .sum();
    total / data.len() as f64
}

// ---- criteria ----------------------------------------------------------------

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

/// 1. Ratio values against an O(D^2) brute force.
fn ratio_oracle(_: &mut Shared) -> Outcome {
    let t0 = Instant::now();
    let mut g = rng(2024);
    let mut worst: f64 = 0.0;
    let mut mismatches = 0;
    for _ in 0..RATIO_VECTORS {
        let d = g.random_range(2..=RATIO_MAX_LEN);
        let drift = g.random_range(-0.005..0.005);
        let r: Vec<f64> = (0..d).map(|_| drift + g.random_range(-0.03..0.03)).collect();
        let (a, b) = (Level(g.random_range(1..1000)), Level(g.random_range(1..1000)));
        for kind in RatioKind::ALL {
            let spec = RatioSpec::with_levels(kind, a.as_f64(), b.as_f64()).unwrap();
            match (ratios::evaluate(&spec, &r), brute_force_ratio(kind, a, b, &r)) {
                (Ok(v), Some(o)) => worst = worst.max(relative_error(v.value, o)),
                (Err(_), None) => {}
                _ => mismatches += 1,
            }
        }
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(
        worst <= RATIO_REL_TOL && mismatches == 0 && secs < RATIO_TIME_LIMIT_S,
        format!("max relative error {worst:.2e} (tol {RATIO_REL_TOL:.0e}), {mismatches} definedness mismatches, {secs:.2}s (limit {RATIO_TIME_LIMIT_S}s)"),
    )
}

/// 2. Assembled objective gradient against central differences.
fn gradient_fidelity(_: &mut Shared) -> Outcome {
    let data = toy_dataset(17, 6, 21, 3, 2);
    let shape = NetworkShape::new(3, 4, 2, OutputMode::Lagrangian).unwrap();
    let mut g = rng(99);
    let mut worst: f64 = 0.0;
    let mut worst_mu: f64 = 0.0;
    let mut short = Vec::new();
    for kind in RatioKind::ALL {
        let spec = RatioSpec::new(kind);
        let needs_strict = matches!(kind, RatioKind::MiniMax | RatioKind::Cvar | RatioKind::Rachev);
        let mut checked = 0;
        let mut draws = 0;
        while checked < GRADIENT_POINTS && draws < 2_000 {
            draws += 1;
            let mut p = NetworkParams::zeros(shape);
            let mut flat = p.flat();
            flat.iter_mut().for_each(|v| *v = g.random_range(-1.5..1.5));
            p.set_flat(&flat);
            if needs_strict && !is_strict_point(&p, &data, &spec) {
                continue;
            }
            worst = worst.max(objective_gradient_error(&p, &data, &spec));
            let e = condalloc::training::evaluate_objective(&p, &data, &spec, true).unwrap();
            worst_mu = worst_mu.max((e.gradient.unwrap().mu - mean_budget_residual(&p, &data)).abs());
            checked += 1;
        }
        if checked < GRADIENT_POINTS {
            short.push(kind.to_string());
        }
    }
    outcome(
        worst <= GRADIENT_REL_TOL && worst_mu <= MU_GRADIENT_TOL && short.is_empty(),
        format!(
            "max relative error {worst:.2e} (tol {GRADIENT_REL_TOL:.0e}) over {GRADIENT_POINTS} points x 6 ratios; dL/dmu error {worst_mu:.1e} (tol {MU_GRADIENT_TOL:.0e}){}",
            if short.is_empty() { String::new() } else { format!("; too few strict points for {short:?}") }
        ),
    )
}

/// 3. Budget constraint after convergent Lagrangian training.
///
/// "Convergent" means the patience rule stopped the ascent before the
/// iteration cap; runs that hit the cap are reported but not judged.
fn constraint_satisfaction(shared: &mut Shared) -> Outcome {
    let mut stopped = Vec::new();
    let mut capped = Vec::new();
    for seed in 0..CONSTRAINT_SEEDS {
        let data = planted_data(seed);
        let m = fit_planted(&data, &RatioSpec::sharpe(), OutputMode::Lagrangian, seed);
        let residual = m.mean_abs_budget_residual;
        if m.objective_trace.len() < m.config.max_iters {
            stopped.push(residual);
        } else {
            capped.push(residual);
        }
    }
    let lagrangian_ok = !stopped.is_empty() && stopped.iter().all(|r| *r <= BUDGET_TOL);
    let complement_exact = shared.planted().iter().take(10).all(|run| {
        run.test()
            .pairs
            .iter()
            .all(|p| predict_weights(&run.model, p.state.as_slice()).weights.iter().sum::<f64>() == 1.0)
    });
    let fmt = |v: &[f64]| v.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>().join(",");
    outcome(
        lagrangian_ok && complement_exact,
        format!(
            "lagrangian: {} of {CONSTRAINT_SEEDS} runs stopped before the cap, residuals [{}] (tol {BUDGET_TOL}); capped runs' residuals [{}]; complement sums exactly 1: {complement_exact}",
            stopped.len(),
            fmt(&stopped),
            fmt(&capped)
        ),
    )
}

/// 4. Planted-signal recovery against the switching oracle and static mixes.
fn planted_recovery(shared: &mut Shared) -> Outcome {
    let runs = shared.planted();
    let mut wins = 0;
    let mut ratio_sum = 0.0;
    let mut slowest: f64 = 0.0;
    for run in runs {
        let test = run.test();
        let ann = mean_monthly_sharpe(&test, |t| predict_weights(&run.model, test.pairs[t].state.as_slice()).weights);
        let oracle = mean_monthly_sharpe(&test, |t| {
            if test.pairs[t].state[0] > 0.0 {
                vec![1.0, 0.0]
            } else {
                vec![0.0, 1.0]
            }
        });
        let beats_static = STATIC_PRESETS
            .iter()
            .all(|&w| ann > mean_monthly_sharpe(&test, |_| vec![w, 1.0 - w]));
        wins += (ann >= ORACLE_FRACTION * oracle && beats_static) as usize;
        ratio_sum += ann / oracle;
        slowest = slowest.max(run.seconds);
    }
    outcome(
        wins >= RECOVERY_WINS && slowest < SEED_TIME_LIMIT_S,
        format!(
            "{wins}/{} seeds reach {ORACLE_FRACTION} x oracle and beat every static preset (need {RECOVERY_WINS}); mean ann/oracle {:.3}; slowest seed {slowest:.1}s (limit {SEED_TIME_LIMIT_S}s)",
            runs.len(),
            ratio_sum / runs.len() as f64
        ),
    )
}

/// 5. Network against benchmarks (1)-(3), pooled over seeds.
fn benchmark_ordering(shared: &mut Shared) -> Outcome {
    let opts = BenchmarkOptions::default();
    let methods = [BenchmarkMethod::Var, BenchmarkMethod::Factor, BenchmarkMethod::Parametric];
    let mut pass = true;
    let mut parts = Vec::new();
    for kind in [RatioKind::Sharpe, RatioKind::Cvar] {
        let spec = RatioSpec::new(kind);
        let mut ann_all: Vec<f64> = Vec::new();
        let mut bench_all: Vec<Vec<f64>> = vec![Vec::new(); methods.len()];
        let mut degenerate = 0;
        let mut months = 0;
        for seed in 0..ORDERING_SEEDS {
            let (data, model) = if kind == RatioKind::Sharpe {
                let run = &shared.planted()[seed as usize];
                (run.data.clone(), run.model.clone())
            } else {
                let data = planted_data(seed);
                let model = fit_planted(&data, &spec, OutputMode::Complement, seed);
                (data, model)
            };
            let schedule = build_schedule(&data.return_months(), TRAIN_MONTHS, TEST_MONTHS).unwrap();
            let ann: BacktestReport = evaluate_models(&schedule, &data, &[model]).unwrap();
            degenerate += ann.degenerate.iter().filter(|d| **d).count();
            months += ann.len();
            for (i, &m) in methods.iter().enumerate() {
                let b = run_benchmark(&schedule, &data, &spec, m, &opts, seed).unwrap();
                let (x, y) = paired_ratio_values(&ann, &b).unwrap();
                if i == 0 {
                    ann_all.extend(&x);
                }
                bench_all[i].extend(y);
            }
        }
        for (i, m) in methods.iter().enumerate() {
            let t = mean_difference_test(&ann_all, &bench_all[i]).unwrap();
            let ok = t.mean_difference >= 0.0 && t.p_value < ORDERING_P;
            pass &= ok;
            parts.push(format!(
                "{kind}/{m}: diff {:+.4} p {:.4} {}",
                t.mean_difference,
                t.p_value,
                if ok { "ok" } else { "NOT MET" }
            ));
        }
        parts.push(format!("{kind}: {months} months, {degenerate} with non-positive network risk"));
    }
    outcome(pass, parts.join("; "))
}

/// 6. Two-asset grid optimizer against a ten times finer exhaustive sweep.
fn grid_correctness(_: &mut Shared) -> Outcome {
    let fine = two_asset_grid(10_000);
    let mut worst: f64 = 0.0;
    let mut g = rng(606);
    for i in 0..GRID_PANELS {
        let kind = RatioKind::ALL[i % RatioKind::ALL.len()];
        let spec = RatioSpec::new(kind);
        let mean = DVector::from_fn(2, |_, _| g.random_range(-0.01..0.03));
        let vols = [g.random_range(0.02..0.08), g.random_range(0.02..0.08)];
        let rho: f64 = g.random_range(-0.8..0.8);
        let cov = DMatrix::from_fn(2, 2, |a, b| if a == b { vols[a] * vols[a] } else { rho * vols[0] * vols[1] });
        let sim = simulate_paths(&mean, &cov, 21, 100, i as u64).unwrap();
        let coarse = optimize_weights_grid(&spec, &sim).unwrap();
        // independent exhaustive sweep: first strict maximum over the fine grid
        let mut best = (f64::NEG_INFINITY, 0.0);
        for w in &fine {
            let r: Vec<f64> = (0..sim.nrows()).map(|d| w[0] * sim[(d, 0)] + w[1] * sim[(d, 1)]).collect();
            if let Ok(v) = ratios::evaluate(&spec, &r) {
                if !v.degenerate && v.value > best.0 {
                    best = (v.value, w[0]);
                }
            }
        }
        worst = worst.max((coarse[0] - best.1).abs());
    }
    outcome(
        worst <= GRID_TOL + 1e-12,
        format!("largest weight gap {worst:.4} over {GRID_PANELS} panels (tol {GRID_TOL})"),
    )
}

/// 7. Interpretability on the planted networks.
fn interpretability(shared: &mut Shared) -> Outcome {
    let runs = shared.planted();
    let mut pi_wins = 0;
    let mut cw_wins = 0;
    for (seed, run) in runs.iter().enumerate() {
        let test = run.test();
        let pi = permutation_importance(&run.model, &test, DEFAULT_REPETITIONS, seed as u64).unwrap();
        let signal_first = (1..pi.ri.len()).all(|j| pi.ri[0] > pi.ri[j]);
        pi_wins += signal_first as usize;
        let cw = connection_weights(&run.model.params, &test.variable_names);
        cw_wins += (cw.ranking[0] == 0 && pi.ranking[0] == 0) as usize;
    }

    // zero every weight leaving the last input
    let run = &runs[0];
    let mut model = run.model.clone();
    let m = model.params.shape.inputs;
    let dead = m - 1;
    for h in 0..model.params.shape.hidden {
        model.params.w_in[h * m + dead] = 0.0;
    }
    let test = run.test();
    let cw = connection_weights(&model.params, &test.variable_names);
    let pi = permutation_importance(&model, &test, 10, 0).unwrap();
    let curve = perturb_sensitivity(&model, &test, dead).unwrap();
    let dead_exact = cw.ri[dead] == 0.0 && pi.ri[dead] == 0.0 && curve.pct_change.iter().all(|v| *v == 0.0);

    outcome(
        pi_wins >= PI_WINS && cw_wins >= CW_WINS && dead_exact,
        format!(
            "permutation ranks the signal first in {pi_wins}/{} (need {PI_WINS}); connection weights and permutation both put the signal first in {cw_wins}/{} (need {CW_WINS}); zero-weight input gives RI 0 and a flat curve: {dead_exact}",
            runs.len(),
            runs.len()
        ),
    )
}

/// 8. Exact published values.
fn pinned_values(_: &mut Shared) -> Outcome {
    let months: Vec<YearMonth> = (0..396).map(|t| YearMonth { year: 1986, month: 1 }.add_months(t)).collect();
    let schedule = build_schedule(&months, 156, 60).unwrap();
    let starts: Vec<String> = schedule.windows.iter().map(|w| w.test_start.to_string()).collect();
    let schedule_ok = starts == ["1999-01", "2004-01", "2009-01", "2014-01"];

    use RatioKind::*;
    let ranking = rank_from_statistics(&[
        (Rachev, 1.08, 40),
        (MiniMax, 1.02, 67),
        (Cvar, 0.95, 27),
        (Mad, 0.89, 41),
        (Gini, 0.85, 42),
        (Sharpe, 0.85, 23),
    ])
    .unwrap();
    let rank_ok = (ranking.correlation - RANK_CORRELATION.0).abs() <= RANK_CORRELATION.1
        && (ranking.p_value - RANK_P.0).abs() <= RANK_P.1;

    let lr_ok = [(0usize, 0.5), (1, 0.5), (9, 0.1), (4_999, 35.0)]
        .iter()
        .all(|&(i, g0)| learning_rate(i, g0) == g0 / (1.0 + i as f64))
        && learning_rate(1, 0.1) == 0.05
        && learning_rate(9, 0.1) == 0.01;

    let crra = crra_utility(0.0, 5.0).unwrap();
    let crra_ok = crra == -0.25;

    outcome(
        schedule_ok && rank_ok && lr_ok && crra_ok,
        format!(
            "test starts {starts:?}; rank correlation {:.4} p {:.4}; learning rate exact: {lr_ok}; crra(0, 5) = {crra}",
            ranking.correlation, ranking.p_value
        ),
    )
}

const CLI_CONFIG: &str = r#"
seed = 11
[synthetic]
months = 70
[schedule]
train_len = 48
test_len = 11
[ratio]
kinds = ["sharpe", "cvar", "mad"]
[network]
mode = "complement"
[train]
gamma0 = 35
max_iters = 200
hidden_grid = [2, 4]
cv_folds = 2
[benchmarks]
methods = ["var", "factor", "parametric", "static:0.60"]
sim_paths = 30
max_iters = 100
[interpret]
repetitions = 10
"#;

fn run_all_commands(config: &Path, out: &Path) -> bool {
    let exe = env!("CARGO_BIN_EXE_condalloc");
    let mut ok = true;
    for args in [
        vec!["train"],
        vec!["backtest"],
        vec!["interpret", "--method", "pi"],
        vec!["interpret", "--method", "cw"],
        vec!["interpret", "--method", "perturb"],
        vec!["report"],
    ] {
        let status = Command::new(exe)
            .args(&args)
            .args(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .output()
            .unwrap()
            .status;
        ok &= status.success();
    }
    ok
}

fn file_tree(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// 9. Byte-identical outputs across runs with the same seed.
fn determinism(_: &mut Shared) -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    fs::write(&config, CLI_CONFIG).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let ran = run_all_commands(&config, &a) && run_all_commands(&config, &b);
    let (ta, tb) = (file_tree(&a), file_tree(&b));
    let differing: Vec<String> = ta
        .iter()
        .zip(&tb)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.display().to_string())
        .collect();
    let same = ta.len() == tb.len() && differing.is_empty();
    outcome(
        ran && same && !ta.is_empty(),
        format!(
            "all commands succeeded: {ran}; {} files compared, differing: {differing:?}",
            ta.len()
        ),
    )
}

type Criterion = fn(&mut Shared) -> Outcome;

fn main() {
    let criteria: [(u32, &str, Criterion); 9] = [
        (1, "ratio oracle equivalence", ratio_oracle),
        (2, "gradient fidelity", gradient_fidelity),
        (3, "constraint satisfaction", constraint_satisfaction),
        (4, "planted-signal recovery", planted_recovery),
        (5, "ordering against benchmarks", benchmark_ordering),
        (6, "grid optimizer correctness", grid_correctness),
        (7, "interpretability sanity", interpretability),
        (8, "pinned exact values", pinned_values),
        (9, "determinism", determinism),
    ];
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut shared = Shared::default();
    let mut failed = 0;
    for (n, name, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let t0 = Instant::now();
        let o = f(&mut shared);
        failed += !o.pass as usize;
        println!(
            "criterion {n} ({name}): {} — {} [{:.1}s]",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail,
            t0.elapsed().as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
