//! Return panels, state-variable series, month alignment and standardization.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::calendar::YearMonth;
use crate::error::{Error, Result};

/// Dated daily simple returns for `N` assets.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    pub dates: Vec<NaiveDate>,
    pub asset_names: Vec<String>,
    /// D×N, one row per trading day.
    pub returns: DMatrix<f64>,
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, asset_names: Vec<String>, returns: DMatrix<f64>) -> Result<Self> {
        if asset_names.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "return panel needs at least 2 assets, got {}",
                asset_names.len()
            )));
        }
        if dates.is_empty() {
            return Err(Error::InsufficientData("return panel has no rows".into()));
        }
        if returns.nrows() != dates.len() || returns.ncols() != asset_names.len() {
            return Err(Error::InsufficientData(format!(
                "return matrix is {}x{}, expected {}x{}",
                returns.nrows(),
                returns.ncols(),
                dates.len(),
                asset_names.len()
            )));
        }
        for w in dates.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::MisalignedDates(format!(
                    "date {} does not follow {}",
                    w[1], w[0]
                )));
            }
        }
        for (i, r) in returns.iter().enumerate() {
            if !r.is_finite() || *r <= -1.0 {
                let row = i % returns.nrows();
                return Err(Error::NonFiniteInput(format!(
                    "return {r} on {} is not a finite value above -1",
                    dates[row]
                )));
            }
        }
        Ok(Self {
            dates,
            asset_names,
            returns,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.asset_names.len()
    }
}

/// Monthly observations of `M` state variables.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSeries {
    pub months: Vec<YearMonth>,
    pub variable_names: Vec<String>,
    /// T×M
    pub values: DMatrix<f64>,
}

impl StateSeries {
    pub fn new(months: Vec<YearMonth>, variable_names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        if variable_names.is_empty() {
            return Err(Error::InsufficientData("state series has no variables".into()));
        }
        if values.nrows() != months.len() || values.ncols() != variable_names.len() {
            return Err(Error::InsufficientData(format!(
                "state matrix is {}x{}, expected {}x{}",
                values.nrows(),
                values.ncols(),
                months.len(),
                variable_names.len()
            )));
        }
        for w in months.windows(2) {
            if w[1] != w[0].next() {
                return Err(Error::MisalignedDates(format!(
                    "month {} does not immediately follow {}",
                    w[1], w[0]
                )));
            }
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() {
                let row = i % values.nrows().max(1);
                return Err(Error::NonFiniteInput(format!(
                    "state value {v} in {}",
                    months[row]
                )));
            }
        }
        Ok(Self {
            months,
            variable_names,
            values,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }
}

/// One observation pair: the state at the end of `state_month` and the daily
/// returns of the following calendar month.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthPair {
    pub state_month: YearMonth,
    pub state: DVector<f64>,
    /// D_{t+1}×N
    pub returns: DMatrix<f64>,
}

impl MonthPair {
    pub fn return_month(&self) -> YearMonth {
        self.state_month.next()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlignedDataset {
    pub pairs: Vec<MonthPair>,
    pub variable_names: Vec<String>,
    pub asset_names: Vec<String>,
}

impl AlignedDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_assets(&self) -> usize {
        self.asset_names.len()
    }

    pub fn n_vars(&self) -> usize {
        self.variable_names.len()
    }

    pub fn state_months(&self) -> Vec<YearMonth> {
        self.pairs.iter().map(|p| p.state_month).collect()
    }

    pub fn return_months(&self) -> Vec<YearMonth> {
        self.pairs.iter().map(MonthPair::return_month).collect()
    }

    /// Contiguous sub-range of pairs.
    pub fn slice(&self, range: std::ops::Range<usize>) -> AlignedDataset {
        AlignedDataset {
            pairs: self.pairs[range].to_vec(),
            variable_names: self.variable_names.clone(),
            asset_names: self.asset_names.clone(),
        }
    }

    /// Pairs selected by index, in the given order.
    pub fn select(&self, idx: &[usize]) -> AlignedDataset {
        AlignedDataset {
            pairs: idx.iter().map(|&i| self.pairs[i].clone()).collect(),
            variable_names: self.variable_names.clone(),
            asset_names: self.asset_names.clone(),
        }
    }

    /// States as a T×M series keyed by state month.
    pub fn states(&self) -> DMatrix<f64> {
        let m = self.n_vars();
        DMatrix::from_fn(self.len(), m, |t, j| self.pairs[t].state[j])
    }

    /// Copy with every state vector passed through `stats`.
    pub fn standardized(&self, stats: &StandardizationStats) -> Result<AlignedDataset> {
        if stats.means.len() != self.n_vars() {
            return Err(Error::DegenerateInput(format!(
                "standardization stats have {} variables, data has {}",
                stats.means.len(),
                self.n_vars()
            )));
        }
        let mut out = self.clone();
        for p in &mut out.pairs {
            p.state = stats.apply(&p.state);
        }
        Ok(out)
    }
}

/// Column means and population standard deviations of a training window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationStats {
    pub means: Vec<f64>,
    pub stddevs: Vec<f64>,
}

impl StandardizationStats {
    /// Population statistics of each column; zero-variance columns are rejected.
    pub fn from_columns(values: &DMatrix<f64>, names: &[String]) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InsufficientData("no rows to standardize".into()));
        }
        let n = values.nrows() as f64;
        let mut means = Vec::with_capacity(values.ncols());
        let mut stddevs = Vec::with_capacity(values.ncols());
        for (j, col) in values.column_iter().enumerate() {
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let sd = var.sqrt();
            if !(sd > 0.0) {
                let name = names.get(j).map(String::as_str).unwrap_or("?");
                return Err(Error::DegenerateInput(format!(
                    "state variable {name} has zero variance"
                )));
            }
            means.push(mean);
            stddevs.push(sd);
        }
        Ok(Self { means, stddevs })
    }

    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(z.len(), |j, _| (z[j] - self.means[j]) / self.stddevs[j])
    }

    pub fn apply_slice(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_fn(z.len(), |j, _| (z[j] - self.means[j]) / self.stddevs[j])
    }
}

/// Standardize each column as `(value - mean) / stddev`.
///
/// With `stats = None` the statistics are computed from `states` itself and
/// returned so the same transform can be reused on later windows.
pub fn standardize_states(
    states: &StateSeries,
    stats: Option<&StandardizationStats>,
) -> Result<(StateSeries, StandardizationStats)> {
    let stats = match stats {
        Some(s) => {
            if s.means.len() != states.n_vars() || s.stddevs.len() != states.n_vars() {
                return Err(Error::DegenerateInput(format!(
                    "standardization stats have {} variables, series has {}",
                    s.means.len(),
                    states.n_vars()
                )));
            }
            s.clone()
        }
        None => StandardizationStats::from_columns(&states.values, &states.variable_names)?,
    };
    let values = DMatrix::from_fn(states.values.nrows(), states.values.ncols(), |t, j| {
        (states.values[(t, j)] - stats.means[j]) / stats.stddevs[j]
    });
    let out = StateSeries {
        months: states.months.clone(),
        variable_names: states.variable_names.clone(),
        values,
    };
    Ok((out, stats))
}

/// Pair every state month with the daily returns of the following month.
///
/// Months whose following month has fewer than two return rows are skipped.
pub fn align_months(panel: &ReturnPanel, states: &StateSeries) -> Result<AlignedDataset> {
    let mut by_month: BTreeMap<YearMonth, Vec<usize>> = BTreeMap::new();
    for (i, d) in panel.dates.iter().enumerate() {
        by_month.entry(YearMonth::of_date(*d)).or_default().push(i);
    }
    let n = panel.n_assets();
    let mut pairs = Vec::new();
    for (t, &month) in states.months.iter().enumerate() {
        let Some(rows) = by_month.get(&month.next()) else {
            continue;
        };
        if rows.len() < 2 {
            continue;
        }
        let returns = DMatrix::from_fn(rows.len(), n, |d, j| panel.returns[(rows[d], j)]);
        let state = DVector::from_iterator(states.n_vars(), states.values.row(t).iter().copied());
        pairs.push(MonthPair {
            state_month: month,
            state,
            returns,
        });
    }
    if pairs.is_empty() {
        return Err(Error::InsufficientData(
            "no state month has a following month with at least 2 trading days".into(),
        ));
    }
    Ok(AlignedDataset {
        pairs,
        variable_names: states.variable_names.clone(),
        asset_names: panel.asset_names.clone(),
    })
}

/// Monthly Treasury and corporate yields used to build the spread variables.
#[derive(Debug, Clone)]
pub struct YieldSeries {
    pub baa: Vec<f64>,
    pub aaa: Vec<f64>,
    pub ten_year: Vec<f64>,
    pub one_year: Vec<f64>,
}

pub const STATE_VARIABLE_NAMES: [&str; 4] =
    ["default_spread", "dividend_yield", "term_spread", "trend"];

/// Build the four market-state variables from monthly raw series.
///
/// All inputs share `months`. Output starts at the 13th month, since the trend
/// needs the previous 12 index levels. `dividends12m` is the trailing-12-month
/// dividend sum; the dividend yield is `ln(100 * D/P)`, i.e. the log of the
/// percent yield.
pub fn compute_state_variables(
    months: &[YearMonth],
    index_levels: &[f64],
    dividends12m: &[f64],
    yields: &YieldSeries,
) -> Result<StateSeries> {
    let n = months.len();
    let lens = [
        index_levels.len(),
        dividends12m.len(),
        yields.baa.len(),
        yields.aaa.len(),
        yields.ten_year.len(),
        yields.one_year.len(),
    ];
    if lens.iter().any(|&l| l != n) {
        return Err(Error::MisalignedDates(format!(
            "raw series lengths {lens:?} differ from {n} months"
        )));
    }
    if n <= 12 {
        return Err(Error::InsufficientData(format!(
            "need more than 12 months of history, got {n}"
        )));
    }
    let all = index_levels
        .iter()
        .chain(dividends12m)
        .chain(&yields.baa)
        .chain(&yields.aaa)
        .chain(&yields.ten_year)
        .chain(&yields.one_year);
    if let Some(v) = all.clone().find(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(format!("raw state input {v}")));
    }
    if let Some(p) = index_levels.iter().find(|p| **p <= 0.0) {
        return Err(Error::NonFiniteInput(format!("index level {p} must be positive")));
    }
    let rows = n - 12;
    let mut values = DMatrix::zeros(rows, 4);
    for (r, t) in (12..n).enumerate() {
        let p = index_levels[t];
        let dp = 100.0 * dividends12m[t] / p;
        if !(dp > 0.0) {
            return Err(Error::NonFiniteInput(format!(
                "dividend yield {dp} in {} has no logarithm",
                months[t]
            )));
        }
        let trailing = index_levels[t - 12..t].iter().sum::<f64>() / 12.0;
        values[(r, 0)] = yields.baa[t] - yields.aaa[t];
        values[(r, 1)] = dp.ln();
        values[(r, 2)] = yields.ten_year[t] - yields.one_year[t];
        values[(r, 3)] = (p / trailing).ln();
    }
    StateSeries::new(
        months[12..].to_vec(),
        STATE_VARIABLE_NAMES.iter().map(|s| s.to_string()).collect(),
        values,
    )
}

fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<csv::StringRecord>)> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let parse_err = |e: csv::Error| Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let header = rdr
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(str::to_string)
        .collect();
    let records = rdr.records().collect::<std::result::Result<Vec<_>, _>>().map_err(parse_err)?;
    Ok((header, records))
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    let v: f64 = s
        .parse()
        .map_err(|_| Error::NonFiniteInput(format!("{what}: cannot parse {s:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::NonFiniteInput(format!("{what}: {s}")));
    }
    Ok(v)
}

/// Load `date,<asset1>,...` daily returns with ISO dates.
///
/// Rows must already be in strictly increasing date order.
pub fn load_returns_csv(path: &Path) -> Result<ReturnPanel> {
    let (header, records) = read_csv(path)?;
    if header.first().map(String::as_str) != Some("date") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "header must start with `date`".into(),
        });
    }
    let assets: Vec<String> = header[1..].to_vec();
    if assets.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{}: need at least 2 asset columns",
            path.display()
        )));
    }
    let mut dates = Vec::with_capacity(records.len());
    let mut flat = Vec::with_capacity(records.len() * assets.len());
    for rec in &records {
        if rec.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("row {:?} has {} fields", rec.get(0), rec.len()),
            });
        }
        let date = NaiveDate::parse_from_str(&rec[0], "%Y-%m-%d").map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            message: format!("bad date {:?}", &rec[0]),
        })?;
        dates.push(date);
        for j in 0..assets.len() {
            flat.push(parse_f64(&rec[j + 1], &format!("{} {}", &rec[0], assets[j]))?);
        }
    }
    let returns = DMatrix::from_row_slice(dates.len(), assets.len(), &flat);
    ReturnPanel::new(dates, assets, returns)
}

/// Load `month,<var1>,...` monthly state values with `YYYY-MM` keys.
pub fn load_states_csv(path: &Path) -> Result<StateSeries> {
    let (header, records) = read_csv(path)?;
    if header.first().map(String::as_str) != Some("month") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "header must start with `month`".into(),
        });
    }
    let vars: Vec<String> = header[1..].to_vec();
    let mut months = Vec::with_capacity(records.len());
    let mut flat = Vec::with_capacity(records.len() * vars.len());
    for rec in &records {
        if rec.len() != header.len() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                message: format!("row {:?} has {} fields", rec.get(0), rec.len()),
            });
        }
        let month: YearMonth = rec[0].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            message: format!("bad month {:?}", &rec[0]),
        })?;
        months.push(month);
        for j in 0..vars.len() {
            flat.push(parse_f64(&rec[j + 1], &format!("{} {}", &rec[0], vars[j]))?);
        }
    }
    let values = DMatrix::from_row_slice(months.len(), vars.len(), &flat);
    StateSeries::new(months, vars, values)
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_returns_csv(panel: &ReturnPanel, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    let mut line = String::from("date");
    for a in &panel.asset_names {
        line.push(',');
        line.push_str(a);
    }
    writeln!(out, "{line}").map_err(io_err(path))?;
    for (i, d) in panel.dates.iter().enumerate() {
        let mut line = d.format("%Y-%m-%d").to_string();
        for j in 0..panel.n_assets() {
            line.push(',');
            line.push_str(&panel.returns[(i, j)].to_string());
        }
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}

pub fn write_states_csv(states: &StateSeries, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(io_err(path))?);
    let mut line = String::from("month");
    for v in &states.variable_names {
        line.push(',');
        line.push_str(v);
    }
    writeln!(out, "{line}").map_err(io_err(path))?;
    for (t, m) in states.months.iter().enumerate() {
        let mut line = m.to_string();
        for j in 0..states.n_vars() {
            line.push(',');
            line.push_str(&states.values[(t, j)].to_string());
        }
        writeln!(out, "{line}").map_err(io_err(path))?;
    }
    out.flush().map_err(io_err(path))
}
