//! Multivariate-normal daily returns from monthly moments.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::synthetic::rng;

/// Lower-triangular `L` with `L L' = cov` for a positive semidefinite `cov`.
///
/// Pivots at or below `1e-12 * max diag` are treated as zero and their column
/// left empty; a clearly negative pivot means `cov` is not PSD.
pub fn psd_cholesky(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = cov.nrows();
    if cov.ncols() != n {
        return Err(Error::DegenerateInput("covariance is not square".into()));
    }
    let scale = (0..n).map(|i| cov[(i, i)].abs()).fold(0.0, f64::max);
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = cov[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -1e-8 * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::DegenerateInput(format!(
                "covariance has a negative pivot {d:e} at column {j}"
            )));
        }
        if d <= tol {
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in j + 1..n {
            let mut s = cov[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / root;
        }
    }
    Ok(l)
}

/// `days` daily draws with mean `mean / days` and covariance `cov / days`.
pub fn simulate_returns(mean: &DVector<f64>, cov: &DMatrix<f64>, days: usize, seed: u64) -> Result<DMatrix<f64>> {
    simulate_paths(mean, cov, days, 1, seed)
}

/// `paths` independent months of `days` daily draws each, stacked row-wise.
pub fn simulate_paths(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    days: usize,
    paths: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if days == 0 || paths == 0 {
        return Err(Error::InsufficientData("simulation needs days and paths".into()));
    }
    let n = mean.len();
    if cov.shape() != (n, n) {
        return Err(Error::DegenerateInput("mean and covariance sizes differ".into()));
    }
    let scale = days as f64;
    let l = psd_cholesky(&(cov / scale))?;
    let daily_mean = mean / scale;
    let mut rng = rng(seed);
    let rows = days * paths;
    let mut out = DMatrix::zeros(rows, n);
    let mut e = DVector::<f64>::zeros(n);
    for r in 0..rows {
        for v in e.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..n {
            let mut x = daily_mean[i];
            for k in 0..=i {
                x += l[(i, k)] * e[k];
            }
            out[(r, i)] = x;
        }
    }
    Ok(out)
}
