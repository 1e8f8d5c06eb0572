//! Input-importance and sensitivity procedures for trained networks.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::AlignedDataset;
use crate::error::{Error, Result};
use crate::network::NetworkParams;
use crate::ratios::{self, RatioSpec};
use crate::synthetic::rng;
use crate::training::{portfolio_returns, predict_weights, TrainedModel};

pub const DEFAULT_REPETITIONS: usize = 100;

/// Shifts, in standard deviations, applied by [`perturb_sensitivity`].
pub const SHIFTS: [f64; 7] = [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0];

/// Seed offset between variables in [`permutation_importance`].
pub const VARIABLE_SEED_STRIDE: u64 = 1_009;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceMethod {
    ConnectionWeights,
    Permutation,
}

impl ImportanceMethod {
    pub fn token(self) -> &'static str {
        match self {
            ImportanceMethod::ConnectionWeights => "connection_weights",
            ImportanceMethod::Permutation => "permutation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub method: ImportanceMethod,
    pub variables: Vec<String>,
    /// Signed relative importance of each input.
    pub ri: Vec<f64>,
    /// Standard error of each `ri` over repetitions (zero when deterministic).
    pub stderr: Vec<f64>,
    /// Input indices by descending `|ri|`; ties keep input order.
    pub ranking: Vec<usize>,
}

impl ImportanceReport {
    fn new(method: ImportanceMethod, variables: Vec<String>, ri: Vec<f64>, stderr: Vec<f64>) -> Self {
        let ranking = rank_by_magnitude(&ri);
        Self {
            method,
            variables,
            ri,
            stderr,
            ranking,
        }
    }

    /// 1-based rank of input `i`.
    pub fn rank_of(&self, i: usize) -> usize {
        self.ranking.iter().position(|&j| j == i).expect("index in range") + 1
    }
}

fn rank_by_magnitude(ri: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..ri.len()).collect();
    idx.sort_by(|&a, &b| ri[b].abs().total_cmp(&ri[a].abs()).then(a.cmp(&b)));
    idx
}

/// `RI_i = sum_h w_in[h, i] * w_out[0, h]`, taken against the first output node.
pub fn connection_weights(params: &NetworkParams, variables: &[String]) -> ImportanceReport {
    let s = params.shape;
    let ri = (0..s.inputs)
        .map(|i| (0..s.hidden).map(|h| params.w_in[h * s.inputs + i] * params.w_out[h]).sum())
        .collect();
    ImportanceReport::new(
        ImportanceMethod::ConnectionWeights,
        variables.to_vec(),
        ri,
        vec![0.0; s.inputs],
    )
}

/// Mean monthly Sharpe ratio of the model's portfolios for raw states
/// `states[t]` against the realized returns of `oos`.
fn mean_sharpe(model: &TrainedModel, oos: &AlignedDataset, states: &[Vec<f64>]) -> Result<f64> {
    let spec = RatioSpec::sharpe();
    let mut total = 0.0;
    let mut n = 0usize;
    for (pair, z) in oos.pairs.iter().zip(states) {
        let w = predict_weights(model, z).weights;
        match ratios::evaluate(&spec, &portfolio_returns(&pair.returns, &w)) {
            Ok(v) => {
                total += v.value;
                n += 1;
            }
            Err(Error::DegenerateRisk(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if n == 0 {
        return Err(Error::DegenerateRisk("no month has a defined Sharpe ratio".into()));
    }
    Ok(total / n as f64)
}

fn raw_states(oos: &AlignedDataset) -> Vec<Vec<f64>> {
    oos.pairs.iter().map(|p| p.state.as_slice().to_vec()).collect()
}

fn check_oos(model: &TrainedModel, oos: &AlignedDataset) -> Result<()> {
    if oos.is_empty() {
        return Err(Error::InsufficientData("interpretation needs out-of-sample months".into()));
    }
    if oos.n_vars() != model.params.shape.inputs || oos.n_assets() != model.params.shape.assets {
        return Err(Error::Config("out-of-sample data does not match the model's shape".into()));
    }
    Ok(())
}

/// Permutation importance with a caller-supplied shuffle.
///
/// `shuffle(i, k, perm)` must permute `perm` in place for variable `i` and
/// repetition `k`.
pub fn permutation_importance_with<F>(
    model: &TrainedModel,
    oos: &AlignedDataset,
    repetitions: usize,
    mut shuffle: F,
) -> Result<ImportanceReport>
where
    F: FnMut(usize, usize, &mut [usize]),
{
    check_oos(model, oos)?;
    if repetitions == 0 {
        return Err(Error::Config("permutation importance needs at least one repetition".into()));
    }
    let base = raw_states(oos);
    let reference = mean_sharpe(model, oos, &base)?;
    let m = oos.n_vars();
    let t_len = oos.len();
    let mut ri = Vec::with_capacity(m);
    let mut stderr = Vec::with_capacity(m);
    for i in 0..m {
        let mut drops = Vec::with_capacity(repetitions);
        for k in 0..repetitions {
            let mut perm: Vec<usize> = (0..t_len).collect();
            shuffle(i, k, &mut perm);
            let mut states = base.clone();
            for (t, &src) in perm.iter().enumerate() {
                states[t][i] = base[src][i];
            }
            drops.push(reference - mean_sharpe(model, oos, &states)?);
        }
        let n = drops.len() as f64;
        let mean = drops.iter().sum::<f64>() / n;
        let se = if drops.len() > 1 {
            (drops.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        ri.push(mean);
        stderr.push(se);
    }
    Ok(ImportanceReport::new(
        ImportanceMethod::Permutation,
        oos.variable_names.clone(),
        ri,
        stderr,
    ))
}

/// `RI_i = s - mean_k s_{k,i}` where `s` is the mean monthly Sharpe ratio over
/// `oos` and `s_{k,i}` the same score with variable `i` shuffled across
/// months. Variable `i` draws its permutations from the stream seeded
/// `seed + i * VARIABLE_SEED_STRIDE`.
pub fn permutation_importance(
    model: &TrainedModel,
    oos: &AlignedDataset,
    repetitions: usize,
    seed: u64,
) -> Result<ImportanceReport> {
    let mut streams: Vec<_> = (0..oos.n_vars())
        .map(|i| rng(seed.wrapping_add(i as u64 * VARIABLE_SEED_STRIDE)))
        .collect();
    permutation_importance_with(model, oos, repetitions, |i, _, perm| perm.shuffle(&mut streams[i]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCurve {
    pub variable: usize,
    pub name: String,
    pub shifts: Vec<f64>,
    /// Percent change of the mean monthly Sharpe ratio relative to no shift.
    pub pct_change: Vec<f64>,
}

impl SensitivityCurve {
    pub fn max_abs_change(&self) -> f64 {
        self.pct_change.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Shift one raw state variable by multiples of its out-of-sample standard
/// deviation and record the change in mean monthly Sharpe ratio.
pub fn perturb_sensitivity(model: &TrainedModel, oos: &AlignedDataset, variable: usize) -> Result<SensitivityCurve> {
    check_oos(model, oos)?;
    if variable >= oos.n_vars() {
        return Err(Error::Config(format!("variable index {variable} out of range")));
    }
    let base = raw_states(oos);
    let n = base.len() as f64;
    let mean = base.iter().map(|z| z[variable]).sum::<f64>() / n;
    let sigma = (base.iter().map(|z| (z[variable] - mean).powi(2)).sum::<f64>() / n).sqrt();
    if sigma == 0.0 {
        return Err(Error::DegenerateInput(format!(
            "variable {} is constant out of sample",
            oos.variable_names[variable]
        )));
    }
    let reference = mean_sharpe(model, oos, &base)?;
    if reference == 0.0 {
        return Err(Error::DegenerateInput("reference Sharpe score is zero".into()));
    }
    let mut pct_change = Vec::with_capacity(SHIFTS.len());
    for &shift in &SHIFTS {
        if shift == 0.0 {
            pct_change.push(0.0);
            continue;
        }
        let mut states = base.clone();
        for z in &mut states {
            z[variable] += shift * sigma;
        }
        let score = mean_sharpe(model, oos, &states)?;
        pct_change.push(100.0 * (score - reference) / reference.abs());
    }
    Ok(SensitivityCurve {
        variable,
        name: oos.variable_names[variable].clone(),
        shifts: SHIFTS.to_vec(),
        pct_change,
    })
}

/// Element-wise mean of several reports of the same method, re-ranked.
pub fn average_importance(reports: &[ImportanceReport]) -> Result<ImportanceReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::InsufficientData("nothing to average".into()))?;
    if reports
        .iter()
        .any(|r| r.method != first.method || r.variables != first.variables)
    {
        return Err(Error::Config("importance reports differ in method or variables".into()));
    }
    let k = reports.len() as f64;
    let m = first.ri.len();
    let ri = (0..m).map(|i| reports.iter().map(|r| r.ri[i]).sum::<f64>() / k).collect();
    let stderr = (0..m)
        .map(|i| (reports.iter().map(|r| r.stderr[i].powi(2)).sum::<f64>()).sqrt() / k)
        .collect();
    Ok(ImportanceReport::new(first.method, first.variables.clone(), ri, stderr))
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// `window,method,variable,ri,rank` for labelled reports.
pub fn write_importance_csv(rows: &[(String, ImportanceReport)], path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| io_err(path, e))?);
    let mut out = String::from("window,method,variable,ri,rank\n");
    for (label, r) in rows {
        for (i, name) in r.variables.iter().enumerate() {
            out.push_str(&format!(
                "{label},{},{name},{},{}\n",
                r.method.token(),
                r.ri[i],
                r.rank_of(i)
            ));
        }
    }
    f.write_all(out.as_bytes()).map_err(|e| io_err(path, e))?;
    f.flush().map_err(|e| io_err(path, e))
}

/// `window,variable,shift_multiplier,pct_change` for labelled curves.
pub fn write_sensitivity_csv(rows: &[(String, SensitivityCurve)], path: &Path) -> Result<()> {
    let mut out = String::from("window,variable,shift_multiplier,pct_change\n");
    for (label, c) in rows {
        for (s, p) in c.shifts.iter().zip(&c.pct_change) {
            out.push_str(&format!("{label},{},{s},{p}\n", c.name));
        }
    }
    std::fs::write(path, out).map_err(|e| io_err(path, e))
}
