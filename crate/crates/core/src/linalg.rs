//! Small dense kernels for the second stage, where matrices are K x K or n x K
//! with K small.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Least-squares solution of `a x ~ b` by Householder QR with column
/// pivoting. Returns `None` when the numerical rank is below `a.ncols()`.
pub fn lstsq_pivoted_qr<T: Scalar>(
    a: ArrayView2<'_, T>,
    b: ArrayView1<'_, T>,
) -> Option<Array1<T>> {
    let (m, k) = a.dim();
    if m < k || b.len() != m {
        return None;
    }
    let mut r = a.to_owned();
    let mut qtb = b.to_owned();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut norms: Vec<T> = (0..k).map(|j| r.column(j).dot(&r.column(j))).collect();
    let max_norm = norms.iter().fold(T::zero(), |a, &v| a.max(v)).sqrt();
    let rank_tol = T::epsilon() * T::from_usize_lossy(m.max(k)) * max_norm * T::lit(10.0);

    for step in 0..k {
        // pivot the remaining column with largest residual norm
        let (pivot, _) =
            (step..k)
                .map(|j| (j, norms[j]))
                .fold((step, T::neg_infinity()), |best, cur| {
                    if cur.1 > best.1 {
                        cur
                    } else {
                        best
                    }
                });
        if pivot != step {
            for i in 0..m {
                r.swap([i, step], [i, pivot]);
            }
            norms.swap(step, pivot);
            perm.swap(step, pivot);
        }

        let col = r.slice(s![step.., step]).to_owned();
        let alpha = col.dot(&col).sqrt();
        if alpha <= rank_tol {
            return None;
        }
        let sign = if col[0] >= T::zero() {
            T::one()
        } else {
            -T::one()
        };
        let mut v = col;
        v[0] += sign * alpha;
        let vnorm2 = v.dot(&v);
        if vnorm2 > T::zero() {
            let two = T::lit(2.0);
            for j in step..k {
                let mut cj = r.slice_mut(s![step.., j]);
                let f = two * v.dot(&cj) / vnorm2;
                cj.scaled_add(-f, &v);
            }
            let mut tail = qtb.slice_mut(s![step..]);
            let f = two * v.dot(&tail) / vnorm2;
            tail.scaled_add(-f, &v);
        }
        for j in step + 1..k {
            let x = r[[step, j]];
            norms[j] = (norms[j] - x * x).max(T::zero());
        }
    }

    // back substitution on the leading k x k triangle
    let mut z = Array1::<T>::zeros(k);
    for i in (0..k).rev() {
        let mut acc = qtb[i];
        for j in i + 1..k {
            acc -= r[[i, j]] * z[j];
        }
        z[i] = acc / r[[i, i]];
    }
    let mut out = Array1::zeros(k);
    for (pos, &orig) in perm.iter().enumerate() {
        out[orig] = z[pos];
    }
    Some(out)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn symmetric_eigenvalues<T: Scalar>(a: ArrayView2<'_, T>) -> Array1<T> {
    let k = a.nrows();
    let mut m = a.to_owned();
    let off = |m: &Array2<T>| {
        let mut acc = T::zero();
        for i in 0..k {
            for j in 0..k {
                if i != j {
                    acc += m[[i, j]] * m[[i, j]];
                }
            }
        }
        acc
    };
    let scale = m.iter().map(|v| *v * *v).sum::<T>();
    for _ in 0..100 {
        if off(&m) <= T::epsilon() * T::epsilon() * scale {
            break;
        }
        for p in 0..k {
            for q in p + 1..k {
                let apq = m[[p, q]];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[[q, q]] - m[[p, p]]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for r in 0..k {
                    let mrp = m[[r, p]];
                    let mrq = m[[r, q]];
                    m[[r, p]] = c * mrp - s * mrq;
                    m[[r, q]] = s * mrp + c * mrq;
                }
                for r in 0..k {
                    let mpr = m[[p, r]];
                    let mqr = m[[q, r]];
                    m[[p, r]] = c * mpr - s * mqr;
                    m[[q, r]] = s * mpr + c * mqr;
                }
            }
        }
    }
    let mut eig: Vec<T> = (0..k).map(|i| m[[i, i]]).collect();
    eig.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    Array1::from(eig)
}

/// Ratio of extreme eigenvalues of a symmetric PSD matrix (infinite if singular).
pub fn condition_number<T: Scalar>(a: ArrayView2<'_, T>) -> T {
    let eig = symmetric_eigenvalues(a);
    let lo = eig[0];
    let hi = eig[eig.len() - 1];
    if lo <= T::zero() {
        T::infinity()
    } else {
        hi / lo
    }
}

/// Inverse of a symmetric positive-definite matrix via Cholesky.
pub fn spd_inverse<T: Scalar>(a: ArrayView2<'_, T>) -> Result<Array2<T>> {
    let k = a.nrows();
    if a.ncols() != k {
        return Err(Error::DimensionMismatch("matrix is not square".into()));
    }
    let mut l = Array2::<T>::zeros((k, k));
    for j in 0..k {
        let mut d = a[[j, j]];
        for t in 0..j {
            d -= l[[j, t]] * l[[j, t]];
        }
        if !(d > T::zero()) {
            return Err(Error::Collinear {
                condition: f64::INFINITY,
            });
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in j + 1..k {
            let mut v = a[[i, j]];
            for t in 0..j {
                v -= l[[i, t]] * l[[j, t]];
            }
            l[[i, j]] = v / d;
        }
    }
    // invert L by forward substitution, then A^-1 = L^-T L^-1
    let mut linv = Array2::<T>::zeros((k, k));
    for col in 0..k {
        for i in col..k {
            let mut v = if i == col { T::one() } else { T::zero() };
            for t in col..i {
                v -= l[[i, t]] * linv[[t, col]];
            }
            linv[[i, col]] = v / l[[i, i]];
        }
    }
    Ok(linv.t().dot(&linv))
}
