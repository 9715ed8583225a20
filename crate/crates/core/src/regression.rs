//! Linear model fitting and scoring.
//!
//! Ordinary least squares (minimum-norm via SVD), elastic net by cyclic
//! coordinate descent on the `1/(2N)` squared-error loss with the blended
//! L1/L2 penalty, k-fold cross-validated RMSE, R2 / adjusted R2, and the
//! extra-sum-of-squares decomposition used by the fusion stage.

use nalgebra::{Cholesky, DMatrix, DVector, SVD};

use crate::data::{Dataset, FoldPlan};
use crate::error::{Error, Result};

/// Convergence knobs for the coordinate-descent solver.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EnSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for EnSettings {
    fn default() -> Self {
        EnSettings { tol: 1e-6, max_iter: 10_000 }
    }
}

/// Which adjusted-R2 denominator to use. `Paper` is `(n - p)`,
/// `Classical` the conventional `(n - p - 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum R2Convention {
    Paper,
    Classical,
}

impl Default for R2Convention {
    fn default() -> Self {
        R2Convention::Paper
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct RegressionMetrics {
    pub sse: f64,
    pub rmse: f64,
    pub r2: f64,
    pub r2_adj: f64,
    pub n: usize,
    pub p: usize,
}

/// One elastic net solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ElasticNetFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub alpha: f64,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final value of the penalized objective.
    pub objective: f64,
}

impl ElasticNetFit {
    pub fn predict(&self, x: &DMatrix<f64>) -> DVector<f64> {
        predict(x, self.intercept, &self.coefficients)
    }

    /// Indices of coefficients with magnitude above `threshold`.
    pub fn nonzero(&self, threshold: f64) -> Vec<usize> {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > threshold)
            .map(|(j, _)| j)
            .collect()
    }
}

pub fn predict(x: &DMatrix<f64>, intercept: f64, coefficients: &[f64]) -> DVector<f64> {
    assert_eq!(x.ncols(), coefficients.len());
    let mut out = DVector::from_element(x.nrows(), intercept);
    let xs = x.as_slice();
    let n = x.nrows();
    for (j, &c) in coefficients.iter().enumerate() {
        if c != 0.0 {
            let col = &xs[j * n..(j + 1) * n];
            for i in 0..n {
                out[i] += c * col[i];
            }
        }
    }
    out
}

fn check_finite(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<()> {
    if x.iter().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Regression("non-finite values in design or response".into()));
    }
    Ok(())
}

fn design_with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut d = DMatrix::zeros(n, x.ncols() + 1);
    d.column_mut(0).fill(1.0);
    d.view_mut((0, 1), (n, x.ncols())).copy_from(x);
    d
}

/// Least-squares fit with intercept; rank deficiency resolves to the
/// minimum-norm solution through the SVD pseudo-inverse.
pub fn fit_ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    let (n, m) = (x.nrows(), x.ncols());
    if n <= m {
        return Err(Error::InsufficientObservations { n, m });
    }
    check_finite(x, y)?;
    if m == 0 {
        return Ok((y.mean(), Vec::new()));
    }
    let design = design_with_intercept(x);
    let svd = SVD::new(design, true, true);
    let max_sv = svd.singular_values.iter().copied().fold(0.0_f64, f64::max);
    let eps = max_sv * (n.max(m + 1) as f64) * f64::EPSILON;
    let sol = svd
        .solve(y, eps)
        .map_err(|e| Error::Regression(format!("svd solve failed: {e}")))?;
    let coefficients = sol.as_slice()[1..].to_vec();
    Ok((sol[0], coefficients))
}

/// Normal-equations OLS with a Cholesky solve; falls back to the SVD path
/// when the Gram matrix is not positive definite. Used in hot loops where
/// the design is almost always full rank.
fn fit_ols_fast(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<(f64, Vec<f64>)> {
    let (n, m) = (x.nrows(), x.ncols());
    if n <= m {
        return Err(Error::InsufficientObservations { n, m });
    }
    if m == 0 {
        return Ok((y.mean(), Vec::new()));
    }
    let design = design_with_intercept(x);
    let gram = design.transpose() * &design;
    let rhs = design.transpose() * y;
    match Cholesky::new(gram) {
        Some(chol) => {
            let sol = chol.solve(&rhs);
            Ok((sol[0], sol.as_slice()[1..].to_vec()))
        }
        None => fit_ols(x, y),
    }
}

/// `sign(z) * max(|z| - gamma, 0)`.
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    debug_assert!(gamma >= 0.0);
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Cyclic coordinate descent on the elastic net objective
/// `1/(2N) * sum((y - b0 - x'b)^2) + lambda * sum((1-alpha)/2 * b_j^2 + alpha*|b_j|)`.
///
/// The intercept is never penalized and is refreshed each sweep from the
/// mean residual. Convergence is declared when the largest parameter
/// change within a sweep drops below `tol`; running out of sweeps returns
/// a fit with `converged = false` rather than an error.
pub fn fit_elastic_net(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    alpha: f64,
    lambda: f64,
    settings: EnSettings,
) -> Result<ElasticNetFit> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::Regression(format!("alpha must lie in [0, 1], got {alpha}")));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Regression(format!("lambda must be non-negative, got {lambda}")));
    }
    let n = x.nrows();
    if n < 2 {
        return Err(Error::Regression(format!("elastic net needs n >= 2, got {n}")));
    }
    if y.len() != n {
        return Err(Error::Regression("response length does not match design rows".into()));
    }
    check_finite(x, y)?;

    let m = x.ncols();
    let nf = n as f64;
    let xs = x.as_slice();
    let column = |j: usize| &xs[j * n..(j + 1) * n];

    let col_sq_mean: Vec<f64> = (0..m)
        .map(|j| column(j).iter().map(|v| v * v).sum::<f64>() / nf)
        .collect();

    let l1 = lambda * alpha;
    let l2 = lambda * (1.0 - alpha);

    let mut beta = vec![0.0_f64; m];
    let mut intercept = y.mean();
    let mut residual: Vec<f64> = y.iter().map(|&v| v - intercept).collect();

    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..settings.max_iter {
        iterations += 1;
        let mut max_delta = 0.0_f64;
        for j in 0..m {
            let denom = col_sq_mean[j] + l2;
            if denom <= 0.0 {
                continue; // all-zero column with no ridge term: nothing to fit
            }
            let col = column(j);
            let mut rho = 0.0;
            for i in 0..n {
                rho += col[i] * residual[i];
            }
            rho = rho / nf + col_sq_mean[j] * beta[j];
            let updated = soft_threshold(rho, l1) / denom;
            let delta = updated - beta[j];
            if delta != 0.0 {
                for i in 0..n {
                    residual[i] -= col[i] * delta;
                }
                beta[j] = updated;
                max_delta = max_delta.max(delta.abs());
            }
        }
        let mean_residual = residual.iter().sum::<f64>() / nf;
        if mean_residual != 0.0 {
            intercept += mean_residual;
            for r in residual.iter_mut() {
                *r -= mean_residual;
            }
            max_delta = max_delta.max(mean_residual.abs());
        }
        if max_delta < settings.tol {
            converged = true;
            break;
        }
    }

    let loss = residual.iter().map(|r| r * r).sum::<f64>() / (2.0 * nf);
    let penalty: f64 = beta
        .iter()
        .map(|b| (1.0 - alpha) / 2.0 * b * b + alpha * b.abs())
        .sum();
    let objective = loss + lambda * penalty;

    Ok(ElasticNetFit {
        intercept,
        coefficients: beta,
        alpha,
        lambda,
        iterations: iterations.max(1),
        converged,
        objective,
    })
}

pub fn sse(y: &DVector<f64>, y_hat: &DVector<f64>) -> f64 {
    y.iter().zip(y_hat.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// SSE, RMSE (`sqrt(sse/n)`), R2 and adjusted R2 of the model
/// `(intercept, coefficients)` evaluated on `(x, y)`. `p` is the number
/// of features in the model, the intercept excluded.
pub fn metrics(
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    intercept: f64,
    coefficients: &[f64],
    convention: R2Convention,
) -> Result<RegressionMetrics> {
    let n = x.nrows();
    let p = coefficients.len();
    if x.ncols() != p {
        return Err(Error::Regression("coefficient count does not match design columns".into()));
    }
    if y.len() != n {
        return Err(Error::Regression("response length does not match design rows".into()));
    }
    if p >= n {
        return Err(Error::Regression(format!("metrics need p < n, got p={p}, n={n}")));
    }
    let y_hat = predict(x, intercept, coefficients);
    let residual_ss = sse(y, &y_hat);
    let y_mean = y.mean();
    let total_ss: f64 = y.iter().map(|v| (v - y_mean) * (v - y_mean)).sum();
    if total_ss == 0.0 {
        return Err(Error::UndefinedR2);
    }
    let r2 = 1.0 - residual_ss / total_ss;
    let denom = match convention {
        R2Convention::Paper => n - p,
        R2Convention::Classical => {
            if n <= p + 1 {
                return Err(Error::Regression(format!(
                    "classical adjusted R2 needs n > p + 1, got p={p}, n={n}"
                )));
            }
            n - p - 1
        }
    };
    let r2_adj = 1.0 - ((n - 1) as f64 / denom as f64) * (1.0 - r2);
    Ok(RegressionMetrics {
        sse: residual_ss,
        rmse: (residual_ss / n as f64).sqrt(),
        r2,
        r2_adj,
        n,
        p,
    })
}

/// Gather `(rows, cols)` of a dataset into a dense column-major design.
pub fn gather(ds: &Dataset, rows: &[usize], cols: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
    let mut x = DMatrix::zeros(rows.len(), cols.len());
    for (jj, &j) in cols.iter().enumerate() {
        let col = ds.column(j);
        for (ii, &i) in rows.iter().enumerate() {
            x[(ii, jj)] = col[i];
        }
    }
    let y = DVector::from_iterator(rows.len(), rows.iter().map(|&i| ds.y()[i]));
    (x, y)
}

/// Pooled and per-fold cross-validation errors.
#[derive(Debug, Clone, PartialEq)]
pub struct CvBreakdown {
    /// `sqrt` of the mean squared prediction error over all held-out rows.
    pub rmse: f64,
    /// Per-fold RMSE over that fold's held-out rows.
    pub fold_rmse: Vec<f64>,
}

fn cv_breakdown<F>(ds: &Dataset, subset: &[usize], folds: &FoldPlan, mut fit: F) -> Result<CvBreakdown>
where
    F: FnMut(&DMatrix<f64>, &DVector<f64>) -> Result<(f64, Vec<f64>)>,
{
    folds.validate_for(ds.n())?;
    let n = ds.n();
    // Squared errors keyed by row index: summing in row order makes the
    // pooled value independent of fold labeling.
    let mut squared = vec![0.0_f64; n];
    for fold in 0..folds.k {
        let train_rows = folds.train_rows(fold);
        let test_rows = folds.test_rows(fold);
        let (x_train, y_train) = gather(ds, &train_rows, subset);
        let (intercept, coefficients) = fit(&x_train, &y_train)?;
        for &i in &test_rows {
            let mut pred = intercept;
            for (c, &j) in subset.iter().enumerate() {
                pred += coefficients[c] * ds.column(j)[i];
            }
            let err = ds.y()[i] - pred;
            squared[i] = err * err;
        }
    }
    let pooled = (squared.iter().sum::<f64>() / n as f64).sqrt();
    let fold_rmse = (0..folds.k)
        .map(|fold| {
            let rows = folds.test_rows(fold);
            (rows.iter().map(|&i| squared[i]).sum::<f64>() / rows.len() as f64).sqrt()
        })
        .collect();
    Ok(CvBreakdown { rmse: pooled, fold_rmse })
}

/// Cross-validated RMSE of an elastic net restricted to `subset`.
pub fn rmse_cv(
    ds: &Dataset,
    subset: &[usize],
    alpha: f64,
    lambda: f64,
    folds: &FoldPlan,
    settings: EnSettings,
) -> Result<f64> {
    Ok(rmse_cv_detailed(ds, subset, alpha, lambda, folds, settings)?.rmse)
}

pub fn rmse_cv_detailed(
    ds: &Dataset,
    subset: &[usize],
    alpha: f64,
    lambda: f64,
    folds: &FoldPlan,
    settings: EnSettings,
) -> Result<CvBreakdown> {
    if subset.is_empty() {
        return Err(Error::DegenerateSubset);
    }
    cv_breakdown(ds, subset, folds, |x, y| {
        let fit = fit_elastic_net(x, y, alpha, lambda, settings)?;
        Ok((fit.intercept, fit.coefficients))
    })
}

/// Cross-validated RMSE of an unpenalized linear regression on `subset`.
pub fn rmse_cv_ols(ds: &Dataset, subset: &[usize], folds: &FoldPlan) -> Result<f64> {
    Ok(rmse_cv_ols_detailed(ds, subset, folds)?.rmse)
}

pub fn rmse_cv_ols_detailed(ds: &Dataset, subset: &[usize], folds: &FoldPlan) -> Result<CvBreakdown> {
    if subset.is_empty() {
        return Err(Error::DegenerateSubset);
    }
    cv_breakdown(ds, subset, folds, fit_ols_fast)
}

/// Cross-validated RMSE of the intercept-only model (each fold predicts
/// its training mean). Serves as the penalty for empty feature masks.
pub fn rmse_cv_intercept_only(ds: &Dataset, folds: &FoldPlan) -> Result<f64> {
    Ok(cv_breakdown(ds, &[], folds, |_, y| Ok((y.mean(), Vec::new())))?.rmse)
}

/// SSE of the least-squares fit on `subset` over the whole dataset, via
/// the fast normal-equations path.
pub(crate) fn ols_sse_on_subset(ds: &Dataset, subset: &[usize]) -> Result<f64> {
    let all_rows: Vec<usize> = (0..ds.n()).collect();
    let (x, y) = gather(ds, &all_rows, subset);
    let (b0, coefs) = fit_ols_fast(&x, &y)?;
    Ok(sse(&y, &predict(&x, b0, &coefs)))
}

/// SSE reduction from adding feature `added` to the OLS model on `base`.
/// Least-squares nesting makes the true value non-negative; small negative
/// floating-point artifacts clamp to zero.
pub fn extra_sum_of_squares(ds: &Dataset, base: &[usize], added: usize) -> Result<f64> {
    if base.contains(&added) {
        return Err(Error::Regression(format!("feature {added} already in the base model")));
    }
    if base.len() + 1 >= ds.n() {
        return Err(Error::InsufficientObservations { n: ds.n(), m: base.len() + 1 });
    }
    let all_rows: Vec<usize> = (0..ds.n()).collect();
    let mut extended = base.to_vec();
    extended.push(added);

    let (x_base, y) = gather(ds, &all_rows, base);
    let (b0, coefs) = fit_ols(&x_base, &y)?;
    let sse_base = sse(&y, &predict(&x_base, b0, &coefs));

    let (x_ext, _) = gather(ds, &all_rows, &extended);
    let (b0e, coefse) = fit_ols(&x_ext, &y)?;
    let sse_ext = sse(&y, &predict(&x_ext, b0e, &coefse));

    Ok((sse_base - sse_ext).max(0.0))
}
