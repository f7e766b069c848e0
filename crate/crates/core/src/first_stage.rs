//! Outlier-robust square-root lasso.
//!
//! For one response vector `v` (the outcome or a treatment) the estimator
//! minimizes
//!
//! ```text
//! sqrt(Q(b, c)) + (lambda_beta / n) * sum_j psi_j |b_j| + (lambda_gamma / n) * sum_i |c_i|
//! Q(b, c) = (1/n) * sum_i (v_i - x_i'b - c_i)^2
//! ```
//!
//! over control coefficients `b` and per-row shifts `c`. Writing
//! `sqrt(Q) = min_s { s/2 + Q/(2s) }` turns this into a jointly convex
//! problem in `(b, c, s)`, which is solved by exact block minimization:
//!
//! 1. `b`: weighted lasso on `v - c` with penalty `2 * lambda_beta * s / n`;
//! 2. `c`: soft-threshold the residuals `v - X b` at `lambda_gamma * s`;
//! 3. `s = sqrt(Q(b, c))`, clamped below by `s_floor`.
//!
//! Every step minimizes the joint objective over one block, so the robust
//! objective is non-increasing along the iterates.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, CowArray, Ix2, ShapeBuilder, Zip};
use serde::{Deserialize, Serialize};

use crate::data::ColumnScaler;
use crate::error::{Error, Result};
use crate::prox::{lasso_fit, soft_threshold, LassoProblem, DEFAULT_MAX_SWEEPS};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions<T> {
    pub max_outer_iters: usize,
    pub lasso_tol: T,
    pub lasso_max_sweeps: usize,
    /// Lower clamp on the scale iterate.
    pub s_floor: T,
    /// Outer loop stops once the objective decreases by less than this.
    pub objective_tol: T,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        SolverOptions {
            max_outer_iters: 10,
            lasso_tol: T::default_kkt_tol(),
            lasso_max_sweeps: DEFAULT_MAX_SWEEPS,
            s_floor: T::lit(1e-10),
            objective_tol: T::default_objective_tol(),
        }
    }
}

impl<T: Scalar> SolverOptions<T> {
    pub fn validate(&self) -> Result<()> {
        if self.max_outer_iters == 0 || self.lasso_max_sweeps == 0 {
            return Err(Error::InvalidParameter(
                "iteration budgets must be positive".into(),
            ));
        }
        for (name, v) in [
            ("lasso_tol", self.lasso_tol),
            ("s_floor", self.s_floor),
            ("objective_tol", self.objective_tol),
        ] {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FirstStageFit<T> {
    pub beta_hat: Array1<T>,
    pub gamma_hat: Array1<T>,
    /// `response - X beta_hat - gamma_hat`.
    pub xi_hat: Array1<T>,
    /// `sqrt(Q(beta_hat, gamma_hat))`.
    pub sigma_hat_k: T,
    pub outlier_set: Vec<usize>,
    /// Robust objective at the start and after every outer iteration.
    pub trace: Vec<T>,
    pub outer_iters: usize,
    pub converged: bool,
    /// Set when the residual scale fell below `s_floor`.
    pub perfect_fit: bool,
    /// False if any inner lasso hit its sweep budget.
    pub lasso_converged: bool,
}

impl<T: Scalar> FirstStageFit<T> {
    pub fn selected_controls(&self) -> Vec<usize> {
        self.beta_hat
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != T::zero())
            .map(|(j, _)| j)
            .collect()
    }

    pub fn objective(&self) -> T {
        *self
            .trace
            .last()
            .expect("trace holds the starting objective")
    }
}

/// Default penalty levels `2c sqrt(n) sqrt(2 ln p)` and `2c sqrt(2 ln n)`.
/// With no controls the coefficient penalty is zero.
pub fn default_penalties<T: Scalar>(n: usize, p: usize, c_const: T) -> Result<(T, T)> {
    if n < 2 {
        return Err(Error::TooFewObservations(n));
    }
    if !(c_const > T::one()) {
        return Err(Error::InvalidParameter(format!(
            "penalty constant must exceed 1, got {c_const}"
        )));
    }
    let two = T::lit(2.0);
    let nf = T::from_usize_lossy(n);
    let lambda_beta = if p == 0 {
        T::zero()
    } else {
        let pf = T::from_usize_lossy(p);
        two * c_const * nf.sqrt() * (two * pf.ln()).sqrt()
    };
    let lambda_gamma = two * c_const * (two * nf.ln()).sqrt();
    Ok((lambda_beta, lambda_gamma))
}

fn l1_weighted<T: Scalar>(w: ArrayView1<'_, T>, b: ArrayView1<'_, T>) -> T {
    Zip::from(&w)
        .and(&b)
        .fold(T::zero(), |acc, &w, &b| acc + w * b.abs())
}

fn l1<T: Scalar>(c: ArrayView1<'_, T>) -> T {
    c.iter().map(|v| v.abs()).sum()
}

fn mean_square<T: Scalar>(r: ArrayView1<'_, T>) -> T {
    r.iter().map(|&v| v * v).sum::<T>() / T::from_usize_lossy(r.len())
}

fn linear_part<T: Scalar>(x: ArrayView2<'_, T>, b: ArrayView1<'_, T>) -> Array1<T> {
    if x.ncols() == 0 {
        Array1::zeros(x.nrows())
    } else {
        x.dot(&b)
    }
}

/// `Q(b, c)`: mean squared residual of `response - X b - c`.
pub fn mean_squared_residual<T: Scalar>(
    b: ArrayView1<'_, T>,
    c: ArrayView1<'_, T>,
    response: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
) -> T {
    let r = &response - &linear_part(x, b) - c;
    mean_square(r.view())
}

/// The robust square-root lasso objective.
pub fn robust_objective<T: Scalar>(
    b: ArrayView1<'_, T>,
    c: ArrayView1<'_, T>,
    response: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    scaler: &ColumnScaler<T>,
    lambda_beta: T,
    lambda_gamma: T,
) -> T {
    let n = T::from_usize_lossy(response.len());
    mean_squared_residual(b, c, response, x).sqrt()
        + lambda_beta / n * l1_weighted(scaler.psi(), b)
        + lambda_gamma / n * l1(c)
}

/// The scale-augmented objective `s/2 + Q/(2s) + penalties`, whose minimum
/// over `s > 0` is the robust objective.
#[allow(clippy::too_many_arguments)]
pub fn augmented_objective<T: Scalar>(
    b: ArrayView1<'_, T>,
    c: ArrayView1<'_, T>,
    s: T,
    response: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    scaler: &ColumnScaler<T>,
    lambda_beta: T,
    lambda_gamma: T,
) -> T {
    let n = T::from_usize_lossy(response.len());
    let two = T::lit(2.0);
    s / two
        + mean_squared_residual(b, c, response, x) / (two * s)
        + lambda_beta / n * l1_weighted(scaler.psi(), b)
        + lambda_gamma / n * l1(c)
}

/// Column-major copy of `x` unless it already is one.
pub(crate) fn column_major<'a, T: Scalar>(x: ArrayView2<'a, T>) -> CowArray<'a, T, Ix2> {
    if x.t().is_standard_layout() {
        CowArray::from(x)
    } else {
        let mut out = Array2::zeros(x.raw_dim().f());
        out.assign(&x);
        CowArray::from(out)
    }
}

/// Fits the robust square-root lasso by block minimization starting from
/// `b = 0`, `c = 0`. A zero `lambda_gamma` disables the shift block, giving
/// the plain (non-robust) square-root lasso.
pub fn fit_first_stage<T: Scalar>(
    response: ArrayView1<'_, T>,
    x: ArrayView2<'_, T>,
    scaler: &ColumnScaler<T>,
    lambda_beta: T,
    lambda_gamma: T,
    opts: &SolverOptions<T>,
) -> Result<FirstStageFit<T>> {
    opts.validate()?;
    let (n, p) = x.dim();
    if response.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "response has length {}, X has {n} rows",
            response.len()
        )));
    }
    if scaler.len() != p {
        return Err(Error::DimensionMismatch(format!(
            "scaler has {} entries, X has {p} columns",
            scaler.len()
        )));
    }
    if n == 0 {
        return Err(Error::TooFewObservations(0));
    }
    for (name, v) in [("lambda_beta", lambda_beta), ("lambda_gamma", lambda_gamma)] {
        if !v.is_finite() || v < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite and nonnegative, got {v}"
            )));
        }
    }
    if response.iter().any(|v| !v.is_finite()) {
        return Err(Error::NumericalFailure("first-stage response"));
    }

    let design = column_major(x);
    let design = design.view();
    let nf = T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let shifts_enabled = lambda_gamma > T::zero();

    let mut b = Array1::<T>::zeros(p);
    let mut c = Array1::<T>::zeros(n);
    let mut s = mean_square(response).sqrt();
    let mut trace = vec![s];
    let mut converged = false;
    let mut perfect_fit = false;
    let mut lasso_converged = true;
    let mut outer_iters = 0;

    if s < opts.s_floor {
        converged = true;
        perfect_fit = true;
    }

    while !converged && outer_iters < opts.max_outer_iters {
        if p > 0 {
            let target = &response - &c;
            let problem = LassoProblem {
                design,
                response: target.view(),
                weights: scaler.psi(),
                lambda: two * lambda_beta * s / nf,
                tol: opts.lasso_tol,
                max_sweeps: opts.lasso_max_sweeps,
                warm_start: Some(b.view()),
            };
            let sol = lasso_fit(&problem)?;
            lasso_converged &= sol.converged;
            b = sol.coef;
        }

        let resid = &response - &linear_part(design, b.view());
        let c_next = if shifts_enabled {
            let tau = lambda_gamma * s;
            resid.mapv(|r| soft_threshold(r, tau))
        } else {
            Array1::zeros(n)
        };
        c = c_next;
        let q = mean_square((&resid - &c).view());
        let s_next = q.sqrt();
        let obj = s_next
            + lambda_beta / nf * l1_weighted(scaler.psi(), b.view())
            + lambda_gamma / nf * l1(c.view());
        if !obj.is_finite() {
            return Err(Error::NumericalFailure("first-stage objective"));
        }
        outer_iters += 1;
        let prev = *trace.last().expect("non-empty trace");
        trace.push(obj);

        if s_next < opts.s_floor {
            perfect_fit = true;
            converged = true;
            break;
        }
        s = s_next;
        if prev - obj < opts.objective_tol {
            converged = true;
        }
    }

    let xi_hat = &response - &linear_part(design, b.view()) - &c;
    let sigma_hat_k = mean_square(xi_hat.view()).sqrt();
    let outlier_set = c
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != T::zero())
        .map(|(i, _)| i)
        .collect();

    Ok(FirstStageFit {
        beta_hat: b,
        gamma_hat: c,
        xi_hat,
        sigma_hat_k,
        outlier_set,
        trace,
        outer_iters,
        converged,
        perfect_fit,
        lasso_converged,
    })
}
