//! Monthly return moments and the two moment forecasters: a scalar AR(1) per
//! moment, and a linear regression of each moment on the state variables.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::calendar::YearMonth;
use crate::data::AlignedDataset;
use crate::error::{Error, Result};

/// Per-month sample moments of daily returns, keyed by the return month.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSeries {
    pub months: Vec<YearMonth>,
    pub means: Vec<DVector<f64>>,
    pub covs: Vec<DMatrix<f64>>,
}

/// Mean vector and population covariance of a D×N block of daily returns.
pub fn block_moments(returns: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let d = returns.nrows();
    if d < 2 {
        return Err(Error::InsufficientData(format!(
            "moments need at least 2 days, got {d}"
        )));
    }
    let n = returns.ncols();
    let mean = DVector::from_fn(n, |j, _| returns.column(j).sum() / d as f64);
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let c = (0..d)
                .map(|k| (returns[(k, i)] - mean[i]) * (returns[(k, j)] - mean[j]))
                .sum::<f64>()
                / d as f64;
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok((mean, cov))
}

/// Daily-scale mean and covariance of each pair's return month.
pub fn monthly_moments(data: &AlignedDataset) -> Result<MomentSeries> {
    let mut out = MomentSeries {
        months: Vec::with_capacity(data.len()),
        means: Vec::with_capacity(data.len()),
        covs: Vec::with_capacity(data.len()),
    };
    for pair in &data.pairs {
        let (m, c) = block_moments(&pair.returns)?;
        out.months.push(pair.return_month());
        out.means.push(m);
        out.covs.push(c);
    }
    Ok(out)
}

/// Number of scalar moments for `n` assets: `n` means plus the lower triangle.
pub fn moment_count(n: usize) -> usize {
    n + n * (n + 1) / 2
}

/// Flatten a mean vector and the lower triangle of a covariance.
pub fn moments_to_scalars(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Vec<f64> {
    let n = mean.len();
    let mut v = Vec::with_capacity(moment_count(n));
    v.extend(mean.iter());
    for i in 0..n {
        for j in 0..=i {
            v.push(cov[(i, j)]);
        }
    }
    v
}

pub fn scalars_to_moments(v: &[f64], n: usize) -> (DVector<f64>, DMatrix<f64>) {
    let mean = DVector::from_column_slice(&v[..n]);
    let mut cov = DMatrix::zeros(n, n);
    let mut k = n;
    for i in 0..n {
        for j in 0..=i {
            cov[(i, j)] = v[k];
            cov[(j, i)] = v[k];
            k += 1;
        }
    }
    (mean, cov)
}

impl MomentSeries {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// T×K matrix of flattened moments.
    pub fn scalar_rows(&self) -> Vec<Vec<f64>> {
        self.means
            .iter()
            .zip(&self.covs)
            .map(|(m, c)| moments_to_scalars(m, c))
            .collect()
    }
}

/// `y_t = intercept + slope * y_{t-1}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Fit {
    pub intercept: f64,
    pub slope: f64,
    /// The lagged regressor had no variance; the fit is the mean of `y`.
    pub degenerate: bool,
}

/// Least-squares AR(1) fit of a scalar series.
pub fn fit_ar1(series: &[f64]) -> Result<Ar1Fit> {
    if series.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "AR(1) needs at least 3 points, got {}",
            series.len()
        )));
    }
    let x = &series[..series.len() - 1];
    let y = &series[1..];
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - xm).powi(2)).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum::<f64>().max(f64::MIN_POSITIVE);
    if sxx <= 1e-24 * scale {
        return Ok(Ar1Fit {
            intercept: ym,
            slope: 0.0,
            degenerate: true,
        });
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let slope = sxy / sxx;
    Ok(Ar1Fit {
        intercept: ym - slope * xm,
        slope,
        degenerate: false,
    })
}

pub fn predict_ar1(fit: &Ar1Fit, last: f64) -> f64 {
    fit.intercept + fit.slope * last
}

/// One AR(1) per scalar moment.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentAr1 {
    pub assets: usize,
    pub fits: Vec<Ar1Fit>,
}

pub fn fit_moment_ar1(moments: &MomentSeries) -> Result<MomentAr1> {
    let rows = moments.scalar_rows();
    let assets = moments.means.first().map(|m| m.len()).unwrap_or(0);
    let k = moment_count(assets);
    let fits = (0..k)
        .map(|j| fit_ar1(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    Ok(MomentAr1 { assets, fits })
}

impl MomentAr1 {
    pub fn predict(&self, last_mean: &DVector<f64>, last_cov: &DMatrix<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let last = moments_to_scalars(last_mean, last_cov);
        let next: Vec<f64> = self.fits.iter().zip(&last).map(|(f, v)| predict_ar1(f, *v)).collect();
        scalars_to_moments(&next, self.assets)
    }
}

/// Per-moment intercept and slopes on the state vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorFit {
    pub assets: usize,
    /// (1 + M)×K; row 0 is the intercept.
    pub coefs: DMatrix<f64>,
}

/// Least squares of `y` (T×K) on `[1, x]` (x is T×M), via Householder QR.
pub fn ols(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (t, m) = x.shape();
    if t <= m + 1 {
        return Err(Error::InsufficientData(format!(
            "regression with {m} regressors needs more than {} observations, got {t}",
            m + 1
        )));
    }
    let design = DMatrix::from_fn(t, m + 1, |i, j| if j == 0 { 1.0 } else { x[(i, j - 1)] });
    let qr = design.qr();
    let r = qr.r();
    let max_diag = (0..=m).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
    for i in 0..=m {
        if r[(i, i)].abs() <= 1e-10 * max_diag {
            return Err(Error::SingularDesign(format!(
                "regressor column {i} is collinear with the others"
            )));
        }
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign("triangular solve failed".into()))
}

/// Regress each month's moments on the state observed before that month.
pub fn fit_moment_factor_model(moments: &MomentSeries, states: &DMatrix<f64>) -> Result<FactorFit> {
    if states.nrows() != moments.len() {
        return Err(Error::MisalignedDates(format!(
            "{} moment months vs {} state months",
            moments.len(),
            states.nrows()
        )));
    }
    let rows = moments.scalar_rows();
    let assets = moments.means.first().map(|m| m.len()).unwrap_or(0);
    let k = moment_count(assets);
    let y = DMatrix::from_fn(rows.len(), k, |i, j| rows[i][j]);
    Ok(FactorFit {
        assets,
        coefs: ols(states, &y)?,
    })
}

impl FactorFit {
    pub fn predict(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let k = self.coefs.ncols();
        let v: Vec<f64> = (0..k)
            .map(|j| self.coefs[(0, j)] + z.iter().enumerate().map(|(i, zi)| self.coefs[(i + 1, j)] * zi).sum::<f64>())
            .collect();
        scalars_to_moments(&v, self.assets)
    }
}

/// A covariance forced positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairedCov {
    pub cov: DMatrix<f64>,
    /// At least one negative eigenvalue was clipped to zero.
    pub repaired: bool,
}

/// Symmetrize and clip negative eigenvalues to zero.
pub fn repair_covariance(cov: &DMatrix<f64>) -> RepairedCov {
    let sym = (cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|l| *l >= 0.0) {
        return RepairedCov {
            cov: sym,
            repaired: false,
        };
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    let out = (&out + out.transpose()) * 0.5;
    RepairedCov {
        cov: out,
        repaired: true,
    }
}
