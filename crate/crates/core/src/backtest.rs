//! Walk-forward evaluation: rolling train/test windows, per-month portfolio
//! returns and ratio values, summary statistics, paired significance tests
//! and cross-ratio rankings.

use std::io::Write;
use std::ops::Range;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::benchmarks::moments::{
    block_moments, fit_moment_ar1, fit_moment_factor_model, monthly_moments, MomentSeries,
};
use crate::benchmarks::simulate::simulate_paths;
use crate::benchmarks::{
    apply_parametric_policy, fit_parametric_policy, optimize_weights_grid, repair_covariance,
    static_weights, BenchmarkMethod, BenchmarkOptions, ParametricFitOptions,
};
use crate::calendar::YearMonth;
use crate::data::{AlignedDataset, StandardizationStats};
use crate::error::{Error, Result};
use crate::network::NetworkShape;
use crate::ratios::{self, RatioKind, RatioSpec};
use crate::training::{fit_window, portfolio_returns, predict_weights, TrainConfig, TrainedModel};

pub const DEFAULT_TRAIN_LEN: usize = 156;
pub const DEFAULT_TEST_LEN: usize = 60;

/// Seed offset between rolling windows.
pub const WINDOW_SEED_STRIDE: u64 = 100_003;

/// Training seed for window `w`.
pub fn window_seed(seed: u64, w: usize) -> u64 {
    seed.wrapping_add((w as u64).wrapping_mul(WINDOW_SEED_STRIDE))
}

/// One train/test split. Month keys are inclusive; ranges index the dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub train_start: YearMonth,
    pub train_end: YearMonth,
    pub test_start: YearMonth,
    pub test_end: YearMonth,
    pub train: Range<usize>,
    pub test: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingSchedule {
    pub windows: Vec<Window>,
    pub train_len: usize,
    pub test_len: usize,
}

impl RollingSchedule {
    /// Dataset indices of every test month, in order.
    pub fn test_indices(&self) -> Vec<usize> {
        self.windows.iter().flat_map(|w| w.test.clone()).collect()
    }
}

/// Windows that start at the first month and roll forward by `test_len`;
/// a trailing test period shorter than `test_len` is dropped.
pub fn build_schedule(months: &[YearMonth], train_len: usize, test_len: usize) -> Result<RollingSchedule> {
    if train_len == 0 || test_len == 0 {
        return Err(Error::Config("train_len and test_len must be positive".into()));
    }
    if months.len() < train_len + test_len {
        return Err(Error::InsufficientData(format!(
            "{} months cannot hold a {train_len}-month training and {test_len}-month test window",
            months.len()
        )));
    }
    let mut windows = Vec::new();
    let mut start = 0;
    while start + train_len + test_len <= months.len() {
        let train = start..start + train_len;
        let test = train.end..train.end + test_len;
        windows.push(Window {
            train_start: months[train.start],
            train_end: months[train.end - 1],
            test_start: months[test.start],
            test_end: months[test.end - 1],
            train,
            test,
        });
        start += test_len;
    }
    Ok(RollingSchedule {
        windows,
        train_len,
        test_len,
    })
}

/// Out-of-sample record of one allocation method under one ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub method: String,
    pub spec: RatioSpec,
    /// Return months.
    pub months: Vec<YearMonth>,
    pub weights: Vec<Vec<f64>>,
    /// Months whose network weights were rescaled to sum to one.
    pub renormalized: Vec<bool>,
    pub daily_returns: Vec<Vec<f64>>,
    /// Mean daily portfolio return of each month.
    pub monthly_returns: Vec<f64>,
    /// Compounded portfolio return of each month.
    pub compounded_returns: Vec<f64>,
    /// `None` when the month's risk is exactly zero.
    pub ratio_values: Vec<Option<f64>>,
    pub degenerate: Vec<bool>,
}

impl BacktestReport {
    fn new(method: String, spec: RatioSpec) -> Self {
        Self {
            method,
            spec,
            months: Vec::new(),
            weights: Vec::new(),
            renormalized: Vec::new(),
            daily_returns: Vec::new(),
            monthly_returns: Vec::new(),
            compounded_returns: Vec::new(),
            ratio_values: Vec::new(),
            degenerate: Vec::new(),
        }
    }

    /// Evaluate `weights` against the realized returns of one month.
    fn push(&mut self, month: YearMonth, returns: &DMatrix<f64>, weights: Vec<f64>, renormalized: bool) -> Result<()> {
        let r = portfolio_returns(returns, &weights);
        let (value, degenerate) = match ratios::evaluate(&self.spec, &r) {
            Ok(v) => (Some(v.value), v.degenerate),
            Err(Error::DegenerateRisk(_)) => (None, true),
            Err(e) => return Err(e),
        };
        self.monthly_returns.push(r.iter().sum::<f64>() / r.len() as f64);
        self.compounded_returns.push(r.iter().map(|x| 1.0 + x).product::<f64>() - 1.0);
        self.months.push(month);
        self.weights.push(weights);
        self.renormalized.push(renormalized);
        self.daily_returns.push(r);
        self.ratio_values.push(value);
        self.degenerate.push(degenerate);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    /// Defined ratio values in `[from, to]` (inclusive, either end optional).
    pub fn ratio_series(&self, from: Option<YearMonth>, to: Option<YearMonth>) -> Vec<f64> {
        self.months
            .iter()
            .zip(&self.ratio_values)
            .filter(|(m, _)| from.is_none_or(|f| **m >= f) && to.is_none_or(|t| **m <= t))
            .filter_map(|(_, v)| *v)
            .collect()
    }

    /// Summary of the monthly ratio values in `[from, to]`.
    pub fn summarize(&self, from: Option<YearMonth>, to: Option<YearMonth>) -> Result<SummaryStats> {
        let mut s = summarize(&self.ratio_series(from, to))?;
        s.degenerate_months = self
            .months
            .iter()
            .zip(&self.degenerate)
            .filter(|(m, d)| **d && from.is_none_or(|f| **m >= f) && to.is_none_or(|t| **m <= t))
            .count();
        Ok(s)
    }

    pub fn mean_ratio(&self) -> f64 {
        let v = self.ratio_series(None, None);
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Train a network on each window and evaluate it on the window's test months.
///
/// `data` holds raw states; each window is standardized with its own training
/// statistics. Window `w` trains with seed [`window_seed`]`(config.seed, w)`.
pub fn run_ann(
    schedule: &RollingSchedule,
    data: &AlignedDataset,
    spec: &RatioSpec,
    shape: NetworkShape,
    config: &TrainConfig,
) -> Result<(BacktestReport, Vec<TrainedModel>)> {
    check_schedule(schedule, data)?;
    let models = schedule
        .windows
        .iter()
        .enumerate()
        .map(|(w, window)| {
            let cfg = TrainConfig {
                seed: window_seed(config.seed, w),
                ..config.clone()
            };
            fit_window(&data.slice(window.train.clone()), spec, shape, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let report = evaluate_models(schedule, data, &models)?;
    Ok((report, models))
}

/// Out-of-sample report of one trained model per window.
pub fn evaluate_models(
    schedule: &RollingSchedule,
    data: &AlignedDataset,
    models: &[TrainedModel],
) -> Result<BacktestReport> {
    check_schedule(schedule, data)?;
    if models.len() != schedule.windows.len() {
        return Err(Error::Config(format!(
            "{} models for {} windows",
            models.len(),
            schedule.windows.len()
        )));
    }
    let spec = models
        .first()
        .map(|m| m.spec)
        .ok_or_else(|| Error::InsufficientData("empty schedule".into()))?;
    if models.iter().any(|m| m.spec != spec) {
        return Err(Error::Config("models were trained for different ratios".into()));
    }
    let mut report = BacktestReport::new("ann".into(), spec);
    for (window, model) in schedule.windows.iter().zip(models) {
        for t in window.test.clone() {
            let pair = &data.pairs[t];
            let p = predict_weights(model, pair.state.as_slice());
            report.push(pair.return_month(), &pair.returns, p.weights, p.renormalized)?;
        }
    }
    Ok(report)
}

fn check_schedule(schedule: &RollingSchedule, data: &AlignedDataset) -> Result<()> {
    if schedule.windows.iter().any(|w| w.test.end > data.len()) {
        return Err(Error::InsufficientData("schedule runs past the end of the data".into()));
    }
    Ok(())
}

/// Fit a benchmark on each window's training months and evaluate it on the
/// test months. Simulation for month index `t` is seeded `seed + t`.
pub fn run_benchmark(
    schedule: &RollingSchedule,
    data: &AlignedDataset,
    spec: &RatioSpec,
    method: BenchmarkMethod,
    opts: &BenchmarkOptions,
    seed: u64,
) -> Result<BacktestReport> {
    check_schedule(schedule, data)?;
    let mut report = BacktestReport::new(method.token(), *spec);
    for window in &schedule.windows {
        let train = data.slice(window.train.clone());
        let weights = match method {
            BenchmarkMethod::Static(p) => {
                let w = static_weights(p)?;
                if data.n_assets() != 2 {
                    return Err(Error::Config("static mixes need exactly 2 assets".into()));
                }
                vec![w; window.test.len()]
            }
            BenchmarkMethod::Var => var_weights(data, &train, window, spec, opts, seed)?,
            BenchmarkMethod::Factor => factor_weights(data, &train, window, spec, opts, seed)?,
            BenchmarkMethod::Parametric => parametric_weights(data, &train, window, opts, seed)?,
        };
        for (t, w) in window.test.clone().zip(weights) {
            let pair = &data.pairs[t];
            report.push(pair.return_month(), &pair.returns, w, false)?;
        }
    }
    Ok(report)
}

/// Grid-optimal weights for one month's forecast of daily-scale moments.
fn weights_from_moments(
    spec: &RatioSpec,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    opts: &BenchmarkOptions,
    seed: u64,
) -> Result<Vec<f64>> {
    // Forecasts are per day; the simulator takes monthly moments.
    let days = opts.sim_days as f64;
    let cov = repair_covariance(cov).cov * days;
    let sim = simulate_paths(&(mean * days), &cov, opts.sim_days, opts.sim_paths, seed)?;
    optimize_weights_grid(spec, &sim)
}

fn var_weights(
    data: &AlignedDataset,
    train: &AlignedDataset,
    window: &Window,
    spec: &RatioSpec,
    opts: &BenchmarkOptions,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let fit = fit_moment_ar1(&monthly_moments(train)?)?;
    window
        .test
        .clone()
        .map(|t| {
            let (last_mean, last_cov) = block_moments(&data.pairs[t - 1].returns)?;
            let (mean, cov) = fit.predict(&last_mean, &last_cov);
            weights_from_moments(spec, &mean, &cov, opts, seed.wrapping_add(t as u64))
        })
        .collect()
}

fn factor_weights(
    data: &AlignedDataset,
    train: &AlignedDataset,
    window: &Window,
    spec: &RatioSpec,
    opts: &BenchmarkOptions,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let moments: MomentSeries = monthly_moments(train)?;
    let fit = fit_moment_factor_model(&moments, &train.states())?;
    window
        .test
        .clone()
        .map(|t| {
            let (mean, cov) = fit.predict(data.pairs[t].state.as_slice());
            weights_from_moments(spec, &mean, &cov, opts, seed.wrapping_add(t as u64))
        })
        .collect()
}

fn parametric_weights(
    data: &AlignedDataset,
    train: &AlignedDataset,
    window: &Window,
    opts: &BenchmarkOptions,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let stats = StandardizationStats::from_columns(&train.states(), &train.variable_names)?;
    let policy = fit_parametric_policy(
        &train.standardized(&stats)?,
        opts.gamma,
        &ParametricFitOptions {
            restarts: opts.restarts,
            max_iters: opts.max_iters,
            seed: seed.wrapping_add(window.train.start as u64),
            fit_slopes: true,
        },
    )?;
    Ok(window
        .test
        .clone()
        .map(|t| apply_parametric_policy(&policy, stats.apply(&data.pairs[t].state).as_slice()))
        .collect())
}

/// Mean, population moments and raw kurtosis of a series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub n: usize,
    pub mean: f64,
    pub stddev: f64,
    /// `None` when the standard deviation is zero.
    pub skewness: Option<f64>,
    pub kurtosis: Option<f64>,
    /// Months whose ratio denominator was not positive.
    pub degenerate_months: usize,
}

pub fn summarize(values: &[f64]) -> Result<SummaryStats> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "summary needs at least 2 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let central = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let m2 = central(2);
    let stddev = m2.sqrt();
    let (skewness, kurtosis) = if m2 > 0.0 {
        (Some(central(3) / m2.powf(1.5)), Some(central(4) / (m2 * m2)))
    } else {
        (None, None)
    };
    Ok(SummaryStats {
        n: values.len(),
        mean,
        stddev,
        skewness,
        kurtosis,
        degenerate_months: 0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanDifferenceTest {
    pub mean_difference: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub stars: String,
}

/// `***`, `**`, `*` at the 1%, 5% and 10% levels.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Ratio values of two reports over the months where both are defined.
pub fn paired_ratio_values(a: &BacktestReport, b: &BacktestReport) -> Result<(Vec<f64>, Vec<f64>)> {
    if a.months != b.months {
        return Err(Error::MisalignedDates(format!("{} and {} cover different months", a.method, b.method)));
    }
    Ok(a.ratio_values
        .iter()
        .zip(&b.ratio_values)
        .filter_map(|(x, y)| Some(((*x)?, (*y)?)))
        .unzip())
}

/// Two-sided paired t-test of `mean(a - b) = 0`.
pub fn mean_difference_test(a: &[f64], b: &[f64]) -> Result<MeanDifferenceTest> {
    if a.len() != b.len() {
        return Err(Error::InsufficientData(format!(
            "paired test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.len() < 3 {
        return Err(Error::InsufficientData("paired test needs at least 3 pairs".into()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var == 0.0 {
        if mean == 0.0 {
            return Ok(MeanDifferenceTest {
                mean_difference: 0.0,
                t_stat: 0.0,
                p_value: 1.0,
                stars: String::new(),
            });
        }
        return Err(Error::DegenerateInput("differences have zero variance".into()));
    }
    let t = mean / (var / n).sqrt();
    let p = two_sided_p(t, n - 1.0);
    Ok(MeanDifferenceTest {
        mean_difference: mean,
        t_stat: t,
        p_value: p,
        stars: significance_stars(p).into(),
    })
}

fn two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

/// Index of the largest value; exact ties go to the earliest index.
fn first_argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Per-month ratio with the highest compounded portfolio return; ties go to
/// the earlier ratio in canonical order.
pub fn best_ratio_timeline(reports: &[BacktestReport]) -> Result<Vec<(YearMonth, RatioKind)>> {
    let order = canonical_order(reports)?;
    let months = &reports[0].months;
    Ok((0..months.len())
        .map(|t| {
            let i = first_argmax(order.iter().map(|&r| reports[r].compounded_returns[t]));
            (months[t], reports[order[i]].spec.kind)
        })
        .collect())
}

/// Report indices sorted by canonical ratio order, after checking alignment.
fn canonical_order(reports: &[BacktestReport]) -> Result<Vec<usize>> {
    if reports.is_empty() || reports[0].is_empty() {
        return Err(Error::InsufficientData("no reports to rank".into()));
    }
    if reports.iter().any(|r| r.months != reports[0].months) {
        return Err(Error::MisalignedDates("reports cover different months".into()));
    }
    let mut order: Vec<usize> = (0..reports.len()).collect();
    order.sort_by_key(|&i| reports[i].spec.kind.canonical_index());
    if order.windows(2).any(|w| reports[w[0]].spec.kind == reports[w[1]].spec.kind) {
        return Err(Error::Config("each ratio may appear only once in a ranking".into()));
    }
    Ok(order)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub kind: RatioKind,
    /// Mean monthly compounded return.
    pub mean_return: f64,
    /// Months in which this ratio's portfolio earned the most.
    pub wins: usize,
    /// 1-based rank by mean return.
    pub return_rank: usize,
    /// 1-based rank by wins.
    pub frequency_rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    /// In canonical ratio order.
    pub entries: Vec<RankEntry>,
    pub months: usize,
    /// Pearson correlation of the two rank vectors.
    pub correlation: f64,
    pub p_value: f64,
}

/// Rank ratios by mean monthly compounded return and by monthly win count.
pub fn rank_ratios(reports: &[BacktestReport]) -> Result<RankingReport> {
    let order = canonical_order(reports)?;
    let months = reports[0].len();
    let mut wins = vec![0usize; order.len()];
    for t in 0..months {
        wins[first_argmax(order.iter().map(|&r| reports[r].compounded_returns[t]))] += 1;
    }
    let stats: Vec<(RatioKind, f64, usize)> = order
        .iter()
        .zip(wins)
        .map(|(&r, w)| {
            let c = &reports[r].compounded_returns;
            (reports[r].spec.kind, c.iter().sum::<f64>() / c.len() as f64, w)
        })
        .collect();
    let mut out = rank_from_statistics(&stats)?;
    out.months = months;
    Ok(out)
}

/// Ranking from precomputed mean returns and win counts.
///
/// Mean-return ties are broken by more wins, win ties by the higher mean
/// return, and remaining ties by canonical ratio order.
pub fn rank_from_statistics(stats: &[(RatioKind, f64, usize)]) -> Result<RankingReport> {
    if stats.len() < 3 {
        return Err(Error::InsufficientData("ranking needs at least 3 ratios".into()));
    }
    let mut stats = stats.to_vec();
    stats.sort_by_key(|s| s.0.canonical_index());
    let k = stats.len();
    let mut by_return: Vec<usize> = (0..k).collect();
    by_return.sort_by(|&a, &b| {
        stats[b]
            .1
            .total_cmp(&stats[a].1)
            .then(stats[b].2.cmp(&stats[a].2))
            .then(a.cmp(&b))
    });
    let mut by_wins: Vec<usize> = (0..k).collect();
    by_wins.sort_by(|&a, &b| {
        stats[b]
            .2
            .cmp(&stats[a].2)
            .then(stats[b].1.total_cmp(&stats[a].1))
            .then(a.cmp(&b))
    });
    let mut return_rank = vec![0; k];
    let mut frequency_rank = vec![0; k];
    for (pos, &i) in by_return.iter().enumerate() {
        return_rank[i] = pos + 1;
    }
    for (pos, &i) in by_wins.iter().enumerate() {
        frequency_rank[i] = pos + 1;
    }
    let a: Vec<f64> = return_rank.iter().map(|&r| r as f64).collect();
    let b: Vec<f64> = frequency_rank.iter().map(|&r| r as f64).collect();
    let r = pearson(&a, &b);
    let df = k as f64 - 2.0;
    let p_value = if r.abs() >= 1.0 {
        0.0
    } else {
        two_sided_p(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(RankingReport {
        entries: (0..k)
            .map(|i| RankEntry {
                kind: stats[i].0,
                mean_return: stats[i].1,
                wins: stats[i].2,
                return_rank: return_rank[i],
                frequency_rank: frequency_rank[i],
            })
            .collect(),
        months: stats.iter().map(|s| s.2).sum(),
        correlation: r,
        p_value,
    })
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

/// Full-period and per-window summaries attached to a written report.
#[derive(Debug, Clone, Serialize)]
pub struct SubperiodSummary {
    pub from: YearMonth,
    pub to: YearMonth,
    pub summary: Option<SummaryStats>,
}

#[derive(Serialize)]
struct ReportDocument<'a> {
    #[serde(flatten)]
    report: &'a BacktestReport,
    summary: Option<SummaryStats>,
    subperiods: Vec<SubperiodSummary>,
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Write a report as JSON, with its overall and per-window summaries.
pub fn write_report_json(report: &BacktestReport, schedule: &RollingSchedule, path: &Path) -> Result<()> {
    let doc = ReportDocument {
        report,
        summary: report.summarize(None, None).ok(),
        subperiods: schedule
            .windows
            .iter()
            .map(|w| SubperiodSummary {
                from: w.test_start,
                to: w.test_end,
                summary: report.summarize(Some(w.test_start), Some(w.test_end)).ok(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&doc).expect("report serializes");
    std::fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| io_err(path, e))?);
    for l in lines {
        writeln!(f, "{l}").map_err(|e| io_err(path, e))?;
    }
    f.flush().map_err(|e| io_err(path, e))
}

fn column_label(r: &BacktestReport) -> String {
    format!("{}:{}", r.method, r.spec.kind)
}

/// `month,<method:ratio>...` with one ratio value per report (blank if undefined).
pub fn write_ratio_timeseries(reports: &[BacktestReport], path: &Path) -> Result<()> {
    if reports.iter().any(|r| r.months != reports[0].months) {
        return Err(Error::MisalignedDates("reports cover different months".into()));
    }
    let mut lines = vec![std::iter::once("month".to_string())
        .chain(reports.iter().map(column_label))
        .collect::<Vec<_>>()
        .join(",")];
    if let Some(first) = reports.first() {
        for (t, m) in first.months.iter().enumerate() {
            let mut row = vec![m.to_string()];
            row.extend(
                reports
                    .iter()
                    .map(|r| r.ratio_values[t].map(|v| v.to_string()).unwrap_or_default()),
            );
            lines.push(row.join(","));
        }
    }
    write_lines(path, &lines)
}

/// Long format: `month,method,ratio,<asset>...`.
pub fn write_weights_timeseries(reports: &[BacktestReport], asset_names: &[String], path: &Path) -> Result<()> {
    let mut lines = vec![["month", "method", "ratio"]
        .iter()
        .map(|s| s.to_string())
        .chain(asset_names.iter().cloned())
        .collect::<Vec<_>>()
        .join(",")];
    for r in reports {
        for (m, w) in r.months.iter().zip(&r.weights) {
            let mut row = vec![m.to_string(), r.method.clone(), r.spec.kind.to_string()];
            row.extend(w.iter().map(|v| v.to_string()));
            lines.push(row.join(","));
        }
    }
    write_lines(path, &lines)
}

/// `month,best_ratio`.
pub fn write_best_ratio(timeline: &[(YearMonth, RatioKind)], path: &Path) -> Result<()> {
    let mut lines = vec!["month,best_ratio".to_string()];
    lines.extend(timeline.iter().map(|(m, k)| format!("{m},{k}")));
    write_lines(path, &lines)
}
