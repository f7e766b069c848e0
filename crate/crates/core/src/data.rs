//! Validated regression data, column scaling and penalty plans.
//!
//! The model has no intercept. Callers who want one append a constant
//! column to the controls; note that the default penalty rule was derived
//! for centered Gaussian designs.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Outcome `y` (length n), treatments `d` (n x K) and controls `x` (n x p).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    y: Array1<T>,
    d: Array2<T>,
    x: Array2<T>,
}

impl<T: Scalar> Dataset<T> {
    /// Validates shapes and finiteness. Rows are never dropped.
    pub fn new(y: Array1<T>, d: Array2<T>, x: Array2<T>) -> Result<Self> {
        let n = y.len();
        if d.nrows() != n || x.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "y has {n} rows, D has {}, X has {}",
                d.nrows(),
                x.nrows()
            )));
        }
        if n < 2 {
            return Err(Error::TooFewObservations(n));
        }
        if d.ncols() == 0 {
            return Err(Error::NoTreatments);
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                array: "y",
                row,
                column: None,
            });
        }
        check_finite_matrix("D", d.view())?;
        check_finite_matrix("X", x.view())?;
        Ok(Dataset { y, d, x })
    }

    /// Re-runs validation on an existing dataset.
    pub fn validate(self) -> Result<Self> {
        Self::new(self.y, self.d, self.x)
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Number of treatments K.
    pub fn k(&self) -> usize {
        self.d.ncols()
    }

    /// Number of controls p.
    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn y(&self) -> ArrayView1<'_, T> {
        self.y.view()
    }

    pub fn d(&self) -> ArrayView2<'_, T> {
        self.d.view()
    }

    pub fn x(&self) -> ArrayView2<'_, T> {
        self.x.view()
    }

    /// Response of first-stage regression `k`: `y` for `k = 0`, treatment
    /// column `k - 1` otherwise.
    pub fn response(&self, k: usize) -> ArrayView1<'_, T> {
        if k == 0 {
            self.y.view()
        } else {
            self.d.column(k - 1)
        }
    }

    /// Applies the same row permutation to every array.
    pub fn permute_rows(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n() {
            return Err(Error::DimensionMismatch(format!(
                "permutation has {} entries for {} rows",
                order.len(),
                self.n()
            )));
        }
        Ok(Dataset {
            y: self.y.select(Axis(0), order),
            d: self.d.select(Axis(0), order),
            x: self.x.select(Axis(0), order),
        })
    }

    pub fn into_parts(self) -> (Array1<T>, Array2<T>, Array2<T>) {
        (self.y, self.d, self.x)
    }
}

fn check_finite_matrix<T: Scalar>(array: &'static str, m: ArrayView2<'_, T>) -> Result<()> {
    for (row, r) in m.outer_iter().enumerate() {
        if let Some(col) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                array,
                row,
                column: Some(col),
            });
        }
    }
    Ok(())
}

/// Free-function form of [`Dataset::new`].
pub fn validate_dataset<T: Scalar>(y: Array1<T>, d: Array2<T>, x: Array2<T>) -> Result<Dataset<T>> {
    Dataset::new(y, d, x)
}

/// Per-column root mean square of the controls, used as penalty loadings.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnScaler<T> {
    psi: Array1<T>,
}

impl<T: Scalar> ColumnScaler<T> {
    pub fn from_design(x: ArrayView2<'_, T>) -> Self {
        let n = T::from_usize_lossy(x.nrows().max(1));
        let psi = x
            .axis_iter(Axis(1))
            .map(|col| (col.iter().map(|&v| v * v).sum::<T>() / n).sqrt())
            .collect();
        ColumnScaler { psi }
    }

    pub fn psi(&self) -> ArrayView1<'_, T> {
        self.psi.view()
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    /// Indices of identically-zero columns; their coefficients are pinned to 0.
    pub fn zero_columns(&self) -> Vec<usize> {
        self.psi
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == T::zero())
            .map(|(j, _)| j)
            .collect()
    }
}

pub fn column_scaler<T: Scalar>(x: ArrayView2<'_, T>) -> ColumnScaler<T> {
    ColumnScaler::from_design(x)
}

/// Penalty levels for the K+1 first-stage regressions. Index 0 is the
/// outcome regression; index k is treatment k.
///
/// A zero `lambda_gamma[k]` disables the outlier-shift block for that
/// regression (the shifts are held at zero), which gives the non-robust
/// square-root lasso.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyPlan<T> {
    pub lambda_beta: Vec<T>,
    pub lambda_gamma: Vec<T>,
    pub c_const: T,
}

impl<T: Scalar> PenaltyPlan<T> {
    pub fn new(lambda_beta: Vec<T>, lambda_gamma: Vec<T>, c_const: T) -> Result<Self> {
        if lambda_beta.len() != lambda_gamma.len() || lambda_beta.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "penalty vectors must have equal nonzero length, got {} and {}",
                lambda_beta.len(),
                lambda_gamma.len()
            )));
        }
        if lambda_beta
            .iter()
            .chain(lambda_gamma.iter())
            .any(|v| !v.is_finite() || *v < T::zero())
        {
            return Err(Error::InvalidParameter(
                "penalty levels must be finite and nonnegative".into(),
            ));
        }
        if !(c_const > T::one()) || !c_const.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "penalty constant must exceed 1, got {c_const}"
            )));
        }
        Ok(PenaltyPlan {
            lambda_beta,
            lambda_gamma,
            c_const,
        })
    }

    /// Theory-driven default levels, identical across all K+1 regressions.
    pub fn default_for(n: usize, p: usize, k: usize, c_const: T) -> Result<Self> {
        let (lb, lg) = crate::first_stage::default_penalties(n, p, c_const)?;
        Self::new(vec![lb; k + 1], vec![lg; k + 1], c_const)
    }

    /// Same plan with every outlier penalty set to zero (shift block off).
    pub fn without_shifts(&self) -> Self {
        PenaltyPlan {
            lambda_beta: self.lambda_beta.clone(),
            lambda_gamma: vec![T::zero(); self.lambda_gamma.len()],
            c_const: self.c_const,
        }
    }

    /// Number of regressions covered (K + 1).
    pub fn len(&self) -> usize {
        self.lambda_beta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda_beta.is_empty()
    }
}
