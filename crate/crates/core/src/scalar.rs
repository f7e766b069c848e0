//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use ndarray::ScalarOperand;
use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the solvers are generic over (`f32` or `f64`).
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + ScalarOperand
    + Sum
    + Debug
    + Display
    + LowerExp
    + Default
    + Send
    + Sync
    + 'static
{
    /// Default KKT tolerance for the lasso kernel at this precision.
    fn default_kkt_tol() -> Self;

    /// Default outer-loop objective-decrease tolerance.
    fn default_objective_tol() -> Self;

    /// Converts an `f64` constant. Panics only if the value is not representable,
    /// which cannot happen for finite inputs with `f32`/`f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize fits in float")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f64 {
    fn default_kkt_tol() -> Self {
        1e-8
    }
    fn default_objective_tol() -> Self {
        1e-9
    }
}

impl Scalar for f32 {
    fn default_kkt_tol() -> Self {
        1e-4
    }
    fn default_objective_tol() -> Self {
        1e-5
    }
}
