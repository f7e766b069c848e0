//! Two-step estimator: K+1 robust first stages, then OLS of the outcome
//! residual on the treatment residuals.
//!
//! Standard errors use the homoscedastic asymptotic variance
//! `sigma^2 * Sigma_xi^{-1} / n` with divisor-n estimates of both pieces and
//! normal critical values.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::data::{ColumnScaler, Dataset, PenaltyPlan};
use crate::error::{Error, Result};
use crate::first_stage::{column_major, fit_first_stage, FirstStageFit, SolverOptions};
use crate::linalg::{condition_number, lstsq_pivoted_qr, spd_inverse};
use crate::scalar::Scalar;

/// Condition number of the residual Gram matrix above which the second stage
/// refuses to report intervals.
pub const COLLINEARITY_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult<T> {
    pub alpha_hat: Array1<T>,
    pub sigma_hat: T,
    /// `(1/n) * sum_i xi_i xi_i'` over the treatment residuals.
    pub sigma_xi_hat: Array2<T>,
    pub std_errors: Array1<T>,
    pub ci_lower: Array1<T>,
    pub ci_upper: Array1<T>,
    pub level: T,
    /// Index 0 is the outcome regression, index k treatment k.
    pub first_stages: Vec<FirstStageFit<T>>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> InferenceResult<T> {
    pub fn n(&self) -> usize {
        self.first_stages[0].xi_hat.len()
    }

    /// n x K matrix of treatment residuals.
    pub fn treatment_residuals(&self) -> Array2<T> {
        residual_matrix(&self.first_stages)
    }

    pub fn to_report(&self) -> InferenceReport {
        let f = |a: &Array1<T>| a.iter().map(|v| v.as_f64()).collect::<Vec<_>>();
        InferenceReport {
            alpha_hat: f(&self.alpha_hat),
            std_errors: f(&self.std_errors),
            ci_lower: f(&self.ci_lower),
            ci_upper: f(&self.ci_upper),
            level: self.level.as_f64(),
            sigma_hat: self.sigma_hat.as_f64(),
            sigma_xi_hat: self
                .sigma_xi_hat
                .outer_iter()
                .map(|row| row.iter().map(|v| v.as_f64()).collect())
                .collect(),
            warnings: self.warnings.clone(),
        }
    }
}

/// Plain-double view of the headline numbers, for serialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceReport {
    pub alpha_hat: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub ci_lower: Vec<f64>,
    pub ci_upper: Vec<f64>,
    pub level: f64,
    pub sigma_hat: f64,
    pub sigma_xi_hat: Vec<Vec<f64>>,
    pub warnings: Vec<String>,
}

fn residual_matrix<T: Scalar>(stages: &[FirstStageFit<T>]) -> Array2<T> {
    let n = stages[0].xi_hat.len();
    let k = stages.len() - 1;
    let mut e = Array2::zeros((n, k));
    for (j, fit) in stages[1..].iter().enumerate() {
        e.column_mut(j).assign(&fit.xi_hat);
    }
    e
}

/// Standard normal quantile.
pub fn normal_quantile<T: Scalar>(prob: T) -> T {
    let std = Normal::standard();
    T::lit(std.inverse_cdf(prob.as_f64()))
}

fn check_gram<T: Scalar>(gram: ArrayView2<'_, T>) -> Result<()> {
    let cond = condition_number(gram);
    if !(cond.as_f64() <= COLLINEARITY_LIMIT) {
        return Err(Error::Collinear {
            condition: cond.as_f64(),
        });
    }
    Ok(())
}

/// OLS of `xi0` on the columns of `e`, solving the normal equations through a
/// pivoted QR of `e`.
pub fn ols_on_residuals<T: Scalar>(
    xi0: ArrayView1<'_, T>,
    e: ArrayView2<'_, T>,
) -> Result<Array1<T>> {
    let (n, k) = e.dim();
    if xi0.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "outcome residual has length {}, treatment residuals have {n} rows",
            xi0.len()
        )));
    }
    if n <= k {
        return Err(Error::InvalidParameter(format!(
            "second stage needs more observations ({n}) than treatments ({k})"
        )));
    }
    let gram = e.t().dot(&e);
    check_gram(gram.view())?;
    lstsq_pivoted_qr(e, xi0).ok_or(Error::Collinear {
        condition: f64::INFINITY,
    })
}

/// Two-sided normal intervals `alpha_k -/+ z * sigma * sqrt((Sigma^-1)_kk / n)`.
pub fn confidence_intervals<T: Scalar>(
    alpha_hat: ArrayView1<'_, T>,
    sigma_hat: T,
    sigma_xi_hat: ArrayView2<'_, T>,
    n: usize,
    level: T,
) -> Result<(Array1<T>, Array1<T>)> {
    let se = standard_errors(sigma_hat, sigma_xi_hat, n)?;
    check_level(level)?;
    let z = normal_quantile((T::one() + level) / T::lit(2.0));
    let half = se.mapv(|s| z * s);
    Ok((&alpha_hat - &half, &alpha_hat + &half))
}

fn standard_errors<T: Scalar>(
    sigma_hat: T,
    sigma_xi_hat: ArrayView2<'_, T>,
    n: usize,
) -> Result<Array1<T>> {
    let inv = spd_inverse(sigma_xi_hat)?;
    let nf = T::from_usize_lossy(n);
    Ok(inv.diag().mapv(|d| sigma_hat * (d / nf).sqrt()))
}

fn check_level<T: Scalar>(level: T) -> Result<()> {
    if level > T::zero() && level < T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "confidence level must lie in (0, 1), got {level}"
        )))
    }
}

/// Runs the full two-step procedure. First stages run in parallel on the
/// current rayon pool; the combine step is sequential.
pub fn two_step_fit<T: Scalar>(
    data: &Dataset<T>,
    plan: &PenaltyPlan<T>,
    opts: &SolverOptions<T>,
    level: T,
) -> Result<InferenceResult<T>> {
    check_level(level)?;
    let k = data.k();
    if plan.len() != k + 1 {
        return Err(Error::DimensionMismatch(format!(
            "penalty plan covers {} regressions, need {}",
            plan.len(),
            k + 1
        )));
    }
    let n = data.n();
    let x = column_major(data.x());
    let x = x.view();
    let scaler = ColumnScaler::from_design(x);

    let first_stages = (0..=k)
        .into_par_iter()
        .map(|j| {
            fit_first_stage(
                data.response(j),
                x,
                &scaler,
                plan.lambda_beta[j],
                plan.lambda_gamma[j],
                opts,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings = Vec::new();
    for (j, fit) in first_stages.iter().enumerate() {
        let label = if j == 0 {
            "outcome".to_string()
        } else {
            format!("treatment {j}")
        };
        if !fit.converged {
            warnings.push(format!(
                "first stage for {label} stopped at the outer iteration cap ({})",
                fit.outer_iters
            ));
        }
        if !fit.lasso_converged {
            warnings.push(format!(
                "first stage for {label}: inner lasso hit its sweep budget"
            ));
        }
        if fit.perfect_fit {
            warnings.push(format!("first stage for {label} fits the response exactly"));
        }
    }

    let e = residual_matrix(&first_stages);
    let xi0 = first_stages[0].xi_hat.view();
    let alpha_hat = ols_on_residuals(xi0, e.view())?;

    let nf = T::from_usize_lossy(n);
    let resid = &xi0 - &e.dot(&alpha_hat);
    let sigma_hat = (resid.iter().map(|&r| r * r).sum::<T>() / nf).sqrt();
    let sigma_xi_hat = e.t().dot(&e) / nf;
    let std_errors = standard_errors(sigma_hat, sigma_xi_hat.view(), n)?;
    let z = normal_quantile((T::one() + level) / T::lit(2.0));
    let half = std_errors.mapv(|s| z * s);

    Ok(InferenceResult {
        ci_lower: &alpha_hat - &half,
        ci_upper: &alpha_hat + &half,
        alpha_hat,
        sigma_hat,
        sigma_xi_hat,
        std_errors,
        level,
        first_stages,
        warnings,
    })
}

/// Empirical orthogonal moment `(1/n) * sum_i xi_i (xi0_i - xi_i' alpha)`,
/// which vanishes at the OLS solution.
pub fn orthogonal_moment<T: Scalar>(result: &InferenceResult<T>) -> Array1<T> {
    let e = result.treatment_residuals();
    let xi0 = &result.first_stages[0].xi_hat;
    let resid = xi0 - &e.dot(&result.alpha_hat);
    e.t().dot(&resid) / T::from_usize_lossy(e.len_of(Axis(0)))
}
