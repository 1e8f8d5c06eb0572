//! Ratio maximization over long-only weights by exhaustive sweep.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ratios::{self, RatioSpec};

use super::moments::block_moments;

/// Grid step for two-asset portfolios.
pub const GRID_STEP: f64 = 0.001;
/// Number of target returns swept along the long-only frontier.
pub const FRONTIER_POINTS: usize = 1001;
/// Largest asset count handled by the exact frontier solver.
pub const MAX_FRONTIER_ASSETS: usize = 12;

fn portfolio(sim: &DMatrix<f64>, w: &[f64]) -> Vec<f64> {
    (0..sim.nrows())
        .map(|d| w.iter().enumerate().map(|(j, x)| sim[(d, j)] * x).sum())
        .collect()
}

/// Pick the candidate with the largest ratio on `sim`.
///
/// Values within 1e-12 (relative) count as ties; ties go to the candidate
/// closest to equal weights, then to the earliest candidate. Candidates whose
/// ratio is undefined or has a non-positive risk are skipped.
pub fn best_candidate(spec: &RatioSpec, sim: &DMatrix<f64>, candidates: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = sim.ncols();
    let eq = 1.0 / n as f64;
    let dist = |w: &[f64]| w.iter().map(|x| (x - eq).powi(2)).sum::<f64>();
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, w) in candidates.iter().enumerate() {
        let v = match ratios::evaluate(spec, &portfolio(sim, w)) {
            Ok(v) if !v.degenerate => v.value,
            _ => continue,
        };
        let d = dist(w);
        best = match best {
            None => Some((i, v, d)),
            Some((bi, bv, bd)) => {
                let tie = (v - bv).abs() <= 1e-12 * v.abs().max(bv.abs());
                if (!tie && v > bv) || (tie && d < bd) {
                    Some((i, v, d))
                } else {
                    Some((bi, bv, bd))
                }
            }
        };
    }
    best.map(|(i, _, _)| candidates[i].clone())
        .ok_or_else(|| Error::DegenerateRisk(format!("no candidate portfolio has a defined {} ratio", spec.kind)))
}

/// Two-asset weights `[x, 1-x]` for `x` on a grid of `steps + 1` points.
pub fn two_asset_grid(steps: usize) -> Vec<Vec<f64>> {
    (0..=steps)
        .map(|i| {
            let x = i as f64 / steps as f64;
            vec![x, 1.0 - x]
        })
        .collect()
}

/// Minimum-variance long-only portfolio with expected return `target`, found
/// by enumerating supports and solving each equality-constrained problem.
pub fn min_variance_at(mean: &DVector<f64>, cov: &DMatrix<f64>, target: f64) -> Option<Vec<f64>> {
    let n = mean.len();
    let scale = mean.iter().fold(0.0f64, |a, m| a.max(m.abs())).max(1e-300);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let k = support.len();
        let w_s = if k == 1 {
            if (mean[support[0]] - target).abs() > 1e-9 * scale {
                continue;
            }
            vec![1.0]
        } else {
            // [2C  m  e] [w ]   [0]
            // [m'  0  0] [l1] = [t]
            // [e'  0  0] [l2]   [1]
            let size = k + 2;
            let mut a = DMatrix::zeros(size, size);
            let mut b = DVector::zeros(size);
            for (r, &i) in support.iter().enumerate() {
                for (c, &j) in support.iter().enumerate() {
                    a[(r, c)] = 2.0 * cov[(i, j)];
                }
                a[(r, k)] = mean[i];
                a[(k, r)] = mean[i];
                a[(r, k + 1)] = 1.0;
                a[(k + 1, r)] = 1.0;
            }
            b[k] = target;
            b[k + 1] = 1.0;
            let Some(sol) = a.lu().solve(&b) else { continue };
            if !sol.iter().all(|v| v.is_finite()) {
                continue;
            }
            sol.rows(0, k).iter().copied().collect()
        };
        if w_s.iter().any(|w| *w < -1e-10) {
            continue;
        }
        let mut w = vec![0.0; n];
        for (r, &i) in support.iter().enumerate() {
            w[i] = w_s[r].max(0.0);
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            continue;
        }
        w.iter_mut().for_each(|x| *x /= total);
        let ret: f64 = w.iter().zip(mean.iter()).map(|(a, b)| a * b).sum();
        if (ret - target).abs() > 1e-8 * scale.max(target.abs()) {
            continue;
        }
        let var = (0..n)
            .map(|i| (0..n).map(|j| w[i] * cov[(i, j)] * w[j]).sum::<f64>())
            .sum::<f64>();
        if best.as_ref().is_none_or(|(bv, _)| var < *bv) {
            best = Some((var, w));
        }
    }
    best.map(|(_, w)| w)
}

/// Long-only frontier portfolios at `points` evenly spaced target returns.
pub fn frontier_candidates(mean: &DVector<f64>, cov: &DMatrix<f64>, points: usize) -> Result<Vec<Vec<f64>>> {
    let n = mean.len();
    if n > MAX_FRONTIER_ASSETS {
        return Err(Error::Config(format!(
            "frontier sweep supports at most {MAX_FRONTIER_ASSETS} assets, got {n}"
        )));
    }
    let lo = mean.min();
    let hi = mean.max();
    let mut out = Vec::with_capacity(points);
    for p in 0..points {
        let target = if points == 1 {
            lo
        } else {
            lo + (hi - lo) * p as f64 / (points - 1) as f64
        };
        if let Some(w) = min_variance_at(mean, cov, target) {
            out.push(w);
        }
    }
    Ok(out)
}

/// Long-only, fully invested weights maximizing `spec` on simulated returns.
///
/// Two assets: grid over `x` in `[0, 1]` with step 0.001. More assets: sweep
/// 1,001 target returns along the sample mean-variance frontier.
pub fn optimize_weights_grid(spec: &RatioSpec, simulated: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = simulated.ncols();
    if n < 2 {
        return Err(Error::InsufficientData("grid optimization needs at least 2 assets".into()));
    }
    let candidates = if n == 2 {
        two_asset_grid((1.0 / GRID_STEP).round() as usize)
    } else {
        let (mean, cov) = block_moments(simulated)?;
        frontier_candidates(&mean, &cov, FRONTIER_POINTS)?
    };
    best_candidate(spec, simulated, &candidates)
}
