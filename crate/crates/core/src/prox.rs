//! Soft-thresholding and a weighted lasso solved by cyclic coordinate descent.
//!
//! The lasso objective is
//!
//! ```text
//! (1/n) * ||response - design * b||^2 + lambda * sum_j weights_j * |b_j|
//! ```
//!
//! and the solver stops once the largest subgradient (KKT) violation is
//! below `tol`. Sweeps alternate between a full pass over every coordinate
//! and passes restricted to the current active set.

use ndarray::{Array1, ArrayView1, ArrayView2, Zip};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Proximal map of `tau * |.|`: zero when `|r| <= tau`, else `r - sign(r) * tau`.
#[inline]
pub fn soft_threshold<T: Scalar>(r: T, tau: T) -> T {
    if r > tau {
        r - tau
    } else if r < -tau {
        r + tau
    } else {
        T::zero()
    }
}

pub const DEFAULT_MAX_SWEEPS: usize = 1000;

#[derive(Debug, Clone)]
pub struct LassoProblem<'a, T> {
    pub design: ArrayView2<'a, T>,
    pub response: ArrayView1<'a, T>,
    /// Per-coefficient penalty multipliers.
    pub weights: ArrayView1<'a, T>,
    pub lambda: T,
    pub tol: T,
    pub max_sweeps: usize,
    pub warm_start: Option<ArrayView1<'a, T>>,
}

impl<'a, T: Scalar> LassoProblem<'a, T> {
    pub fn new(
        design: ArrayView2<'a, T>,
        response: ArrayView1<'a, T>,
        weights: ArrayView1<'a, T>,
        lambda: T,
    ) -> Self {
        LassoProblem {
            design,
            response,
            weights,
            lambda,
            tol: T::default_kkt_tol(),
            max_sweeps: DEFAULT_MAX_SWEEPS,
            warm_start: None,
        }
    }

    pub fn with_tol(mut self, tol: T) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_sweeps(mut self, max_sweeps: usize) -> Self {
        self.max_sweeps = max_sweeps;
        self
    }

    pub fn with_warm_start(mut self, start: ArrayView1<'a, T>) -> Self {
        self.warm_start = Some(start);
        self
    }

    fn validate(&self) -> Result<()> {
        let (n, p) = self.design.dim();
        if self.response.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "lasso response has length {}, design has {n} rows",
                self.response.len()
            )));
        }
        if self.weights.len() != p {
            return Err(Error::DimensionMismatch(format!(
                "lasso weights have length {}, design has {p} columns",
                self.weights.len()
            )));
        }
        if let Some(w) = &self.warm_start {
            if w.len() != p {
                return Err(Error::DimensionMismatch(format!(
                    "warm start has length {}, design has {p} columns",
                    w.len()
                )));
            }
        }
        if n == 0 {
            return Err(Error::TooFewObservations(0));
        }
        if !(self.tol > T::zero()) {
            return Err(Error::InvalidParameter("lasso tol must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(Error::InvalidParameter(
                "max_sweeps must be at least 1".into(),
            ));
        }
        if !self.lambda.is_finite() || self.lambda < T::zero() {
            return Err(Error::InvalidParameter(format!(
                "lasso lambda must be finite and nonnegative, got {}",
                self.lambda
            )));
        }
        if self
            .weights
            .iter()
            .any(|w| !w.is_finite() || *w < T::zero())
        {
            return Err(Error::InvalidParameter(
                "lasso weights must be finite and nonnegative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoSolution<T> {
    pub coef: Array1<T>,
    pub sweeps_used: usize,
    pub max_kkt_violation: T,
    pub converged: bool,
    /// Objective at the start and after every sweep.
    pub objective_trace: Vec<T>,
}

/// Lasso objective `(1/n)||response - design b||^2 + lambda * sum w_j |b_j|`.
pub fn lasso_objective<T: Scalar>(
    design: ArrayView2<'_, T>,
    response: ArrayView1<'_, T>,
    weights: ArrayView1<'_, T>,
    lambda: T,
    coef: ArrayView1<'_, T>,
) -> T {
    let resid = &response - &design.dot(&coef);
    objective_from_residual(resid.view(), weights, lambda, coef)
}

fn objective_from_residual<T: Scalar>(
    resid: ArrayView1<'_, T>,
    weights: ArrayView1<'_, T>,
    lambda: T,
    coef: ArrayView1<'_, T>,
) -> T {
    let n = T::from_usize_lossy(resid.len());
    let rss = resid.iter().map(|&r| r * r).sum::<T>();
    let pen = Zip::from(&weights)
        .and(&coef)
        .fold(T::zero(), |acc, &w, &b| acc + w * b.abs());
    rss / n + lambda * pen
}

struct Kernel<'a, T> {
    design: ArrayView2<'a, T>,
    weights: ArrayView1<'a, T>,
    lambda: T,
    col_sq: Array1<T>,
    n: T,
}

impl<T: Scalar> Kernel<'_, T> {
    /// Exact minimization over coordinate `j`, keeping `resid` in sync.
    #[inline]
    fn update(&self, j: usize, coef: &mut Array1<T>, resid: &mut Array1<T>) {
        let sq = self.col_sq[j];
        if sq == T::zero() {
            return;
        }
        let col = self.design.column(j);
        let old = coef[j];
        let z = col.dot(resid) + sq * old;
        let tau = self.n * self.lambda * self.weights[j] / T::lit(2.0);
        let new = soft_threshold(z, tau) / sq;
        let delta = new - old;
        if delta != T::zero() {
            resid.scaled_add(-delta, &col);
            coef[j] = new;
        }
    }

    #[inline]
    fn violation(&self, j: usize, coef: &Array1<T>, resid: &Array1<T>) -> T {
        if self.col_sq[j] == T::zero() {
            return T::zero();
        }
        let g = T::lit(2.0) * self.design.column(j).dot(resid) / self.n;
        let bound = self.lambda * self.weights[j];
        let b = coef[j];
        if b > T::zero() {
            (g - bound).abs()
        } else if b < T::zero() {
            (g + bound).abs()
        } else {
            (g.abs() - bound).max(T::zero())
        }
    }

    fn residual(&self, response: ArrayView1<'_, T>, coef: &Array1<T>) -> Array1<T> {
        &response - &self.design.dot(coef)
    }
}

/// Solves the weighted lasso to KKT tolerance. Hitting `max_sweeps` is not an
/// error: the last (and best) iterate is returned with `converged = false`.
pub fn lasso_fit<T: Scalar>(problem: &LassoProblem<'_, T>) -> Result<LassoSolution<T>> {
    problem.validate()?;
    let (n, p) = problem.design.dim();
    let kernel = Kernel {
        design: problem.design,
        weights: problem.weights,
        lambda: problem.lambda,
        col_sq: problem
            .design
            .columns()
            .into_iter()
            .map(|c| c.dot(&c))
            .collect(),
        n: T::from_usize_lossy(n),
    };

    let mut coef = match &problem.warm_start {
        Some(w) => w.to_owned(),
        None => Array1::zeros(p),
    };
    for j in 0..p {
        if kernel.col_sq[j] == T::zero() {
            coef[j] = T::zero();
        }
    }
    let mut resid = kernel.residual(problem.response, &coef);
    let objective = |coef: &Array1<T>, resid: &Array1<T>| -> Result<T> {
        let v = objective_from_residual(resid.view(), problem.weights, problem.lambda, coef.view());
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericalFailure("lasso coordinate descent"))
        }
    };
    let mut trace = vec![objective(&coef, &resid)?];

    let max_violation =
        |coef: &Array1<T>, resid: &Array1<T>, idx: &mut dyn Iterator<Item = usize>| {
            idx.map(|j| kernel.violation(j, coef, resid))
                .fold(T::zero(), |a, v| a.max(v))
        };

    let mut sweeps = 0usize;
    let mut viol = max_violation(&coef, &resid, &mut (0..p));
    let mut converged = viol <= problem.tol;
    while !converged && sweeps < problem.max_sweeps {
        for j in 0..p {
            kernel.update(j, &mut coef, &mut resid);
        }
        sweeps += 1;
        resid = kernel.residual(problem.response, &coef);
        trace.push(objective(&coef, &resid)?);
        viol = max_violation(&coef, &resid, &mut (0..p));
        if viol <= problem.tol {
            converged = true;
            break;
        }

        let active: Vec<usize> = (0..p).filter(|&j| coef[j] != T::zero()).collect();
        if active.is_empty() {
            continue;
        }
        let inner_tol = problem.tol / T::lit(10.0);
        while sweeps < problem.max_sweeps {
            for &j in &active {
                kernel.update(j, &mut coef, &mut resid);
            }
            sweeps += 1;
            trace.push(objective(&coef, &resid)?);
            if max_violation(&coef, &resid, &mut active.iter().copied()) <= inner_tol {
                break;
            }
        }
        resid = kernel.residual(problem.response, &coef);
        viol = max_violation(&coef, &resid, &mut (0..p));
        converged = viol <= problem.tol;
    }

    Ok(LassoSolution {
        coef,
        sweeps_used: sweeps,
        max_kkt_violation: viol,
        converged,
        objective_trace: trace,
    })
}

/// Largest KKT violation of `coef` for the given problem, recomputed from scratch.
pub fn lasso_kkt_violation<T: Scalar>(problem: &LassoProblem<'_, T>, coef: ArrayView1<'_, T>) -> T {
    let n = T::from_usize_lossy(problem.design.nrows());
    let resid = &problem.response - &problem.design.dot(&coef);
    let two = T::lit(2.0);
    (0..problem.design.ncols())
        .map(|j| {
            let col = problem.design.column(j);
            if col.iter().all(|&v| v == T::zero()) {
                return T::zero();
            }
            let g = two * col.dot(&resid) / n;
            let bound = problem.lambda * problem.weights[j];
            let b = coef[j];
            if b != T::zero() {
                (g - bound * b.signum()).abs()
            } else {
                (g.abs() - bound).max(T::zero())
            }
        })
        .fold(T::zero(), |a, v| a.max(v))
}
