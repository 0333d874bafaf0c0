//! Logistic regression by iteratively reweighted least squares with Wald
//! inference and Type I analysis of deviance.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::error::{CoreError, Result};

const MAX_ITER: usize = 100;
const TOL: f64 = 1e-8;
const SEPARATION_BOUND: f64 = 15.0;

#[derive(Debug, Clone)]
pub struct GLMFit {
    pub coefficients: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub deviance: f64,
    /// Per coefficient: (odds ratio, CI low, CI high).
    pub odds_ratios: Vec<(f64, f64, f64)>,
    pub p_values: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn design_matrix(x: &[Vec<f64>], y: &[f64]) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let rows = x.len();
    if rows == 0 || rows != y.len() {
        return Err(CoreError::InvalidArgument(
            "design matrix rows must match outcomes".into(),
        ));
    }
    let cols = x[0].len();
    if cols == 0 || x.iter().any(|r| r.len() != cols) {
        return Err(CoreError::InvalidArgument("ragged design matrix".into()));
    }
    if rows < cols {
        return Err(CoreError::InvalidArgument(
            "fewer observations than coefficients".into(),
        ));
    }
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(CoreError::InvalidArgument("outcomes must be 0 or 1".into()));
    }
    let xm = DMatrix::from_fn(rows, cols, |i, j| x[i][j]);
    Ok((xm, DVector::from_column_slice(y)))
}

fn deviance_of(mu: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let mut d = 0.0;
    for (m, t) in mu.iter().zip(y.iter()) {
        let m = m.clamp(1e-12, 1.0 - 1e-12);
        d += t * m.ln() + (1.0 - t) * (1.0 - m).ln();
    }
    -2.0 * d
}

/// Binomial-family logit fit. Errors on rank deficiency and on complete
/// separation (diverging coefficients).
pub fn glm_fit_logistic(x: &[Vec<f64>], y: &[f64]) -> Result<GLMFit> {
    let (xm, yv) = design_matrix(x, y)?;
    let cols = xm.ncols();
    let mut beta = DVector::zeros(cols);
    let mut converged = false;
    let mut iterations = 0;
    let mut info = DMatrix::zeros(cols, cols);
    for it in 1..=MAX_ITER {
        iterations = it;
        let eta = &xm * &beta;
        let mu = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
        let w = mu.map(|m| (m * (1.0 - m)).max(1e-12));
        // X' W X and X' W z with z the working response
        let wx = DMatrix::from_fn(xm.nrows(), cols, |i, j| xm[(i, j)] * w[i]);
        info = xm.transpose() * &wx;
        let z = DVector::from_fn(xm.nrows(), |i, _| {
            eta[i] + (yv[i] - mu[i]) / w[i]
        });
        let rhs = xm.transpose() * DVector::from_fn(xm.nrows(), |i, _| w[i] * z[i]);
        let chol = info.clone().cholesky().ok_or_else(|| {
            CoreError::Stats("rank-deficient design matrix".into())
        })?;
        let new_beta = chol.solve(&rhs);
        let delta = (&new_beta - &beta).amax();
        beta = new_beta;
        if delta < TOL {
            converged = true;
            break;
        }
    }
    if beta.amax() > SEPARATION_BOUND {
        return Err(CoreError::Stats(
            "complete separation detected: coefficients diverge".into(),
        ));
    }
    let eta = &xm * &beta;
    let mu = eta.map(|e| 1.0 / (1.0 + (-e).exp()));
    let deviance = deviance_of(&mu, &yv);
    let cov = info
        .cholesky()
        .ok_or_else(|| CoreError::Stats("rank-deficient design matrix".into()))?
        .inverse();
    let normal = Normal::standard();
    let mut odds_ratios = Vec::with_capacity(cols);
    let mut p_values = Vec::with_capacity(cols);
    for j in 0..cols {
        let se = cov[(j, j)].sqrt();
        odds_ratios.push((
            beta[j].exp(),
            (beta[j] - 1.96 * se).exp(),
            (beta[j] + 1.96 * se).exp(),
        ));
        p_values.push((2.0 * (1.0 - normal.cdf((beta[j] / se).abs()))).clamp(0.0, 1.0));
    }
    Ok(GLMFit {
        coefficients: beta.iter().copied().collect(),
        covariance: (0..cols)
            .map(|i| (0..cols).map(|j| cov[(i, j)]).collect())
            .collect(),
        deviance,
        odds_ratios,
        p_values,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone)]
pub struct DevianceRow {
    pub term: String,
    pub df: usize,
    pub delta_deviance: f64,
    pub residual_df: usize,
    pub residual_deviance: f64,
    pub p: f64,
}

/// Type I likelihood-ratio table: terms enter in the given order on top of
/// an intercept, each row testing the deviance drop against chi-squared.
pub fn anova_deviance(
    terms: &[(String, Vec<Vec<f64>>)],
    y: &[f64],
) -> Result<Vec<DevianceRow>> {
    let n = y.len();
    let mut columns: Vec<Vec<f64>> = vec![vec![1.0; n]];
    let mut fit = glm_fit_logistic(
        &(0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect::<Vec<_>>(),
        y,
    )?;
    let mut table = Vec::new();
    for (name, cols) in terms {
        if cols.is_empty() {
            return Err(CoreError::InvalidArgument(format!(
                "term '{name}' adds no columns"
            )));
        }
        if cols.iter().any(|c| c.len() != n) {
            return Err(CoreError::InvalidArgument(format!(
                "term '{name}' columns do not match outcome length"
            )));
        }
        columns.extend(cols.iter().cloned());
        let x: Vec<Vec<f64>> = (0..n)
            .map(|i| columns.iter().map(|c| c[i]).collect())
            .collect();
        let next = glm_fit_logistic(&x, y)?;
        let drop = fit.deviance - next.deviance;
        if drop < -1e-8 {
            return Err(CoreError::Stats(format!(
                "non-nested sequence: deviance rose by {} at term '{name}'",
                -drop
            )));
        }
        let df = cols.len();
        let chi = ChiSquared::new(df as f64).map_err(|e| CoreError::Stats(e.to_string()))?;
        table.push(DevianceRow {
            term: name.clone(),
            df,
            delta_deviance: drop.max(0.0),
            residual_df: n - columns.len(),
            residual_deviance: next.deviance,
            p: (1.0 - chi.cdf(drop.max(0.0))).clamp(0.0, 1.0),
        });
        fit = next;
    }
    Ok(table)
}
