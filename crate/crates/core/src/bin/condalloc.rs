//! `condalloc` — train, backtest and interpret ratio-maximizing allocation networks.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use condalloc::backtest::{
    best_ratio_timeline, build_schedule, evaluate_models, mean_difference_test, paired_ratio_values, rank_ratios,
    run_benchmark, window_seed, write_best_ratio, write_ratio_timeseries, write_report_json,
    write_weights_timeseries, BacktestReport, RollingSchedule,
};
use condalloc::benchmarks::BenchmarkMethod;
use condalloc::config::{parse_override, InterpretMethod, RunConfig};
use condalloc::data::AlignedDataset;
use condalloc::error::{Error, ErrorClass};
use condalloc::interpret::{
    average_importance, connection_weights, perturb_sensitivity, permutation_importance, write_importance_csv,
    write_sensitivity_csv, SensitivityCurve,
};
use condalloc::network::NetworkShape;
use condalloc::ratios::{RatioKind, RatioSpec};
use condalloc::training::{fit_window, TrainConfig, TrainedModel};

#[derive(Parser)]
#[command(name = "condalloc", version, about = "State-conditional allocation by performance-ratio maximization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one network per rolling window and ratio; writes models and objective traces.
    Train(Common),
    /// Out-of-sample evaluation of the networks and the selected benchmarks.
    Backtest(Common),
    /// Input importance (cw, pi) or perturbation curves (perturb) per window.
    Interpret(Common),
    /// Rebuild the summary table and ratio ranking from written reports.
    Report(Common),
}

#[derive(Args, Debug)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Comma-separated ratios (sharpe, mad, gini, minimax, cvar, rachev).
    #[arg(long, value_name = "LIST")]
    ratio: Option<String>,
    /// Global seed.
    #[arg(long, value_name = "INT")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Comma-separated benchmarks: var, factor, parametric, static:<p>. Empty for none.
    #[arg(long, value_name = "LIST")]
    benchmarks: Option<String>,
    /// Interpretation method: cw, pi or perturb.
    #[arg(long, value_name = "NAME")]
    method: Option<String>,
    /// Override any config key, e.g. `--set train.gamma0=35` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn toml_string(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn toml_list(list: &str) -> String {
    let items: Vec<String> = list
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(toml_string)
        .collect();
    format!("[{}]", items.join(", "))
}

impl Common {
    /// `--set` pairs first, then the dedicated flags, so the flags win.
    fn load(&self) -> Result<RunConfig> {
        let mut overrides = self
            .set
            .iter()
            .map(|s| parse_override(s))
            .collect::<condalloc::error::Result<Vec<_>>>()?;
        if let Some(r) = &self.ratio {
            overrides.push(("ratio.kinds".into(), toml_list(r)));
        }
        if let Some(s) = self.seed {
            overrides.push(("seed".into(), s.to_string()));
        }
        if let Some(o) = &self.out {
            overrides.push(("output.dir".into(), toml_string(&o.to_string_lossy())));
        }
        if let Some(b) = &self.benchmarks {
            overrides.push(("benchmarks.methods".into(), toml_list(b)));
        }
        if let Some(m) = &self.method {
            m.parse::<InterpretMethod>()?;
            overrides.push(("interpret.method".into(), toml_string(m)));
        }
        Ok(RunConfig::load(self.config.as_deref(), &overrides)?)
    }
}

/// Loaded configuration, data and schedule shared by the commands.
struct Run {
    cfg: RunConfig,
    data: AlignedDataset,
    schedule: RollingSchedule,
    out: PathBuf,
}

impl Run {
    fn open(common: &Common) -> Result<Self> {
        let cfg = common.load()?;
        let data = cfg.load_dataset()?;
        let schedule = build_schedule(&data.return_months(), cfg.schedule.train_len, cfg.schedule.test_len)?;
        let out = cfg.output.dir.clone();
        Ok(Self { cfg, data, schedule, out })
    }

    fn shape(&self) -> Result<NetworkShape> {
        Ok(NetworkShape::new(
            self.data.n_vars(),
            self.cfg.train.hidden_grid[0],
            self.data.n_assets(),
            self.cfg.network.mode,
        )?)
    }

    fn window_config(&self, w: usize) -> TrainConfig {
        TrainConfig {
            seed: window_seed(self.cfg.seed, w),
            ..self.cfg.train.clone()
        }
    }

    fn model_path(&self, kind: RatioKind, w: usize) -> PathBuf {
        self.out.join("models").join(kind.to_string()).join(format!("window_{w:02}.json"))
    }

    fn fit(&self, spec: &RatioSpec, w: usize) -> Result<TrainedModel> {
        let window = &self.schedule.windows[w];
        eprintln!("training {} window {} ({}..{})", spec.kind, w, window.train_start, window.train_end);
        Ok(fit_window(&self.data.slice(window.train.clone()), spec, self.shape()?, &self.window_config(w))?)
    }

    fn save(&self, model: &TrainedModel, w: usize) -> Result<()> {
        let path = self.model_path(model.spec.kind, w);
        write_file(&path, &(model.to_json() + "\n"))?;
        let mut trace = String::from("iteration,objective\n");
        for (i, v) in model.objective_trace.iter().enumerate() {
            trace.push_str(&format!("{i},{v}\n"));
        }
        write_file(&path.with_file_name(format!("window_{w:02}_trace.csv")), &trace)
    }

    /// Models written by `train` when they match the current configuration,
    /// otherwise freshly trained (and written).
    fn models(&self, spec: &RatioSpec) -> Result<Vec<TrainedModel>> {
        (0..self.schedule.windows.len())
            .map(|w| {
                let path = self.model_path(spec.kind, w);
                if let Ok(text) = fs::read_to_string(&path) {
                    let m = TrainedModel::from_json(&text).with_context(|| format!("{}", path.display()))?;
                    if m.spec == *spec
                        && m.config == self.window_config(w)
                        && m.variable_names == self.data.variable_names
                        && m.asset_names == self.data.asset_names
                        && m.params.shape.mode == self.cfg.network.mode
                    {
                        return Ok(m);
                    }
                }
                let m = self.fit(spec, w)?;
                self.save(&m, w)?;
                Ok(m)
            })
            .collect()
    }
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    create_parent(path)?;
    fs::write(path, text).map_err(|e| io_error(path, e))?;
    Ok(())
}

fn report_file_name(report: &BacktestReport) -> String {
    format!("{}_{}.json", report.method.replace(':', "_"), report.spec.kind)
}

fn cmd_train(common: &Common) -> Result<()> {
    let run = Run::open(common)?;
    for spec in run.cfg.ratio_specs()? {
        for w in 0..run.schedule.windows.len() {
            let m = run.fit(&spec, w)?;
            run.save(&m, w)?;
        }
    }
    Ok(())
}

fn cmd_backtest(common: &Common) -> Result<()> {
    let run = Run::open(common)?;
    let opts = run.cfg.benchmarks.options();
    let mut reports = Vec::new();
    for spec in run.cfg.ratio_specs()? {
        reports.push(evaluate_models(&run.schedule, &run.data, &run.models(&spec)?)?);
        for &method in &run.cfg.benchmarks.methods {
            eprintln!("benchmark {method} under {}", spec.kind);
            reports.push(run_benchmark(&run.schedule, &run.data, &spec, method, &opts, run.cfg.seed)?);
        }
    }
    let dir = run.out.join("reports");
    fs::create_dir_all(&dir).map_err(|e| io_error(&dir, e))?;
    for r in &reports {
        write_report_json(r, &run.schedule, &dir.join(report_file_name(r)))?;
    }
    write_ratio_timeseries(&reports, &run.out.join("ratio_timeseries.csv"))?;
    write_weights_timeseries(&reports, &run.data.asset_names, &run.out.join("weights_timeseries.csv"))?;
    write_summaries(&reports, &run.out)
}

fn cmd_interpret(common: &Common) -> Result<()> {
    let run = Run::open(common)?;
    let method = run.cfg.interpret.method;
    for spec in run.cfg.ratio_specs()? {
        let models = run.models(&spec)?;
        let path = run.out.join("interpret").join(format!("{}_{method}.csv", spec.kind));
        create_parent(&path)?;
        let labels: Vec<String> = run.schedule.windows.iter().map(|w| w.test_start.to_string()).collect();
        match method {
            InterpretMethod::ConnectionWeights | InterpretMethod::Permutation => {
                let mut rows = Vec::new();
                for (w, (window, model)) in run.schedule.windows.iter().zip(&models).enumerate() {
                    let report = match method {
                        InterpretMethod::ConnectionWeights => {
                            connection_weights(&model.params, &run.data.variable_names)
                        }
                        _ => permutation_importance(
                            model,
                            &run.data.slice(window.test.clone()),
                            run.cfg.interpret.repetitions,
                            window_seed(run.cfg.seed, w),
                        )?,
                    };
                    rows.push((labels[w].clone(), report));
                }
                let avg = average_importance(&rows.iter().map(|r| r.1.clone()).collect::<Vec<_>>())?;
                rows.push(("average".into(), avg));
                write_importance_csv(&rows, &path)?;
            }
            InterpretMethod::Perturb => {
                let mut rows: Vec<(String, SensitivityCurve)> = Vec::new();
                for (w, (window, model)) in run.schedule.windows.iter().zip(&models).enumerate() {
                    let oos = run.data.slice(window.test.clone());
                    for v in 0..run.data.n_vars() {
                        rows.push((labels[w].clone(), perturb_sensitivity(model, &oos, v)?));
                    }
                }
                let k = models.len() as f64;
                let averages: Vec<SensitivityCurve> = (0..run.data.n_vars())
                    .map(|v| {
                        let curves: Vec<&SensitivityCurve> =
                            rows.iter().map(|r| &r.1).filter(|c| c.variable == v).collect();
                        let mut avg = curves[0].clone();
                        for (s, p) in avg.pct_change.iter_mut().enumerate() {
                            *p = curves.iter().map(|c| c.pct_change[s]).sum::<f64>() / k;
                        }
                        avg
                    })
                    .collect();
                rows.extend(averages.into_iter().map(|c| ("average".to_string(), c)));
                write_sensitivity_csv(&rows, &path)?;
            }
        }
    }
    Ok(())
}

fn cmd_report(common: &Common) -> Result<()> {
    let cfg = common.load()?;
    let dir = cfg.output.dir.join("reports");
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .map_err(|e| io_error(&dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InsufficientData(format!("no reports in {}", dir.display())).into());
    }
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| io_error(p, e))?;
            serde_json::from_str::<BacktestReport>(&text).map_err(|e| {
                Error::Parse {
                    path: p.clone(),
                    message: e.to_string(),
                }
                .into()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_summaries(&reports, &cfg.output.dir)
}

/// Sort key: the network first, then benchmarks in a fixed order.
fn method_key(token: &str) -> (u8, u64) {
    match token.parse::<BenchmarkMethod>() {
        _ if token == "ann" => (0, 0),
        Ok(BenchmarkMethod::Var) => (1, 0),
        Ok(BenchmarkMethod::Factor) => (2, 0),
        Ok(BenchmarkMethod::Parametric) => (3, 0),
        Ok(BenchmarkMethod::Static(p)) => (4, p.to_bits()),
        Err(_) => (5, 0),
    }
}

/// Summary table with paired tests against the network, plus the ratio
/// ranking and best-ratio timeline when the network ran under several ratios.
fn write_summaries(reports: &[BacktestReport], out: &Path) -> Result<()> {
    let mut order: Vec<&BacktestReport> = reports.iter().collect();
    order.sort_by_key(|r| (r.spec.kind.canonical_index(), method_key(&r.method)));

    let mut csv = String::from("ratio,method,n,mean,stddev,skewness,kurtosis,degenerate_months,ann_minus_method,t_stat,p_value,stars\n");
    let mut table = format!(
        "{:<8} {:<12} {:>5} {:>12} {:>12} {:>12} {:>8}\n",
        "ratio", "method", "n", "mean", "stddev", "ann-method", "p"
    );
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in &order {
        let s = r.summarize(None, None)?;
        let ann = order.iter().find(|a| a.method == "ann" && a.spec == r.spec);
        let test = match ann {
            Some(a) if r.method != "ann" => {
                let (x, y) = paired_ratio_values(a, r)?;
                Some(mean_difference_test(&x, &y)?)
            }
            _ => None,
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.spec.kind,
            r.method,
            s.n,
            s.mean,
            s.stddev,
            opt(s.skewness),
            opt(s.kurtosis),
            s.degenerate_months,
            opt(test.as_ref().map(|t| t.mean_difference)),
            opt(test.as_ref().map(|t| t.t_stat)),
            opt(test.as_ref().map(|t| t.p_value)),
            test.as_ref().map(|t| t.stars.as_str()).unwrap_or(""),
        ));
        let (diff, p) = match &test {
            Some(t) => (format!("{:.4}{}", t.mean_difference, t.stars), format!("{:.4}", t.p_value)),
            None => (String::new(), String::new()),
        };
        table.push_str(&format!(
            "{:<8} {:<12} {:>5} {:>12.4} {:>12.4} {:>12} {:>8}\n",
            r.spec.kind.to_string(),
            r.method,
            s.n,
            s.mean,
            s.stddev,
            diff,
            p
        ));
    }
    table.push_str("*** p<0.01, ** p<0.05, * p<0.1 (paired t-test of monthly ratio values)\n");

    let ann: Vec<BacktestReport> = order.iter().filter(|r| r.method == "ann").map(|r| (*r).clone()).collect();
    if ann.len() >= 2 {
        write_best_ratio(&best_ratio_timeline(&ann)?, &out.join("best_ratio.csv"))?;
    }
    if ann.len() >= 3 {
        let ranking = rank_ratios(&ann)?;
        table.push_str(&format!(
            "\n{:<8} {:>14} {:>6} {:>11} {:>9}\n",
            "ratio", "mean_return_%", "wins", "return_rank", "win_rank"
        ));
        for e in &ranking.entries {
            table.push_str(&format!(
                "{:<8} {:>14.4} {:>6} {:>11} {:>9}\n",
                e.kind.to_string(),
                100.0 * e.mean_return,
                e.wins,
                e.return_rank,
                e.frequency_rank
            ));
        }
        table.push_str(&format!(
            "rank correlation {:.4} (p = {:.4}) over {} months\n",
            ranking.correlation, ranking.p_value, ranking.months
        ));
        write_file(
            &out.join("ranking.json"),
            &(serde_json::to_string_pretty(&ranking).expect("ranking serializes") + "\n"),
        )?;
    }
    write_file(&out.join("summary.csv"), &csv)?;
    write_file(&out.join("summary.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<Error>()).map(Error::class) {
        Some(ErrorClass::Config) => 2,
        Some(ErrorClass::Data) => 3,
        Some(ErrorClass::Numeric) => 4,
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Train(c) => cmd_train(c),
        Command::Backtest(c) => cmd_backtest(c),
        Command::Interpret(c) => cmd_interpret(c),
        Command::Report(c) => cmd_report(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
