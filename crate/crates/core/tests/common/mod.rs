//! Brute-force oracles used by the integration and acceptance tests. Nothing
//! here calls into the library's objectives or solvers.

#![allow(dead_code)]

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((n, p), || rng.sample(StandardNormal))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal))
}

/// Minimizes a convex 1-D function: doubles a bracket around `start` until
/// both ends are no better than the start, then repeatedly zooms an 11-point
/// grid onto the best point.
pub fn grid_minimize_1d(mut f: impl FnMut(f64) -> f64, start: f64) -> f64 {
    let f0 = f(start);
    let mut radius = 1.0 + start.abs();
    while f(start - radius) < f0 || f(start + radius) < f0 {
        radius *= 2.0;
    }
    let (mut lo, mut hi) = (start - radius, start + radius);
    let mut best = start;
    let mut best_val = f0;
    while hi - lo > 1e-14 * (1.0 + best.abs()) {
        let step = (hi - lo) / 10.0;
        let mut k_best = 0;
        let mut v_best = f64::INFINITY;
        for k in 0..=10 {
            let t = lo + step * k as f64;
            let v = f(t);
            if v < v_best {
                v_best = v;
                k_best = k;
            }
        }
        let t = lo + step * k_best as f64;
        if v_best <= best_val {
            best = t;
            best_val = v_best;
        }
        let new_lo = (best - step).max(lo);
        let new_hi = (best + step).min(hi);
        if new_hi - new_lo >= hi - lo {
            break;
        }
        lo = new_lo;
        hi = new_hi;
    }
    best
}

/// Cyclic coordinate minimization with a grid line search per coordinate.
/// Valid for convex objectives whose nonsmooth part is separable.
pub fn coordinate_grid_minimize(f: impl Fn(&[f64]) -> f64, start: Vec<f64>) -> Vec<f64> {
    let mut x = start;
    let mut prev = f(&x);
    for _ in 0..200_000 {
        for j in 0..x.len() {
            let mut trial = x.clone();
            let t = grid_minimize_1d(
                |v| {
                    trial[j] = v;
                    f(&trial)
                },
                x[j],
            );
            x[j] = t;
        }
        let cur = f(&x);
        if prev - cur <= 1e-15 * (1.0 + cur.abs()) {
            break;
        }
        prev = cur;
    }
    x
}

/// Root-mean-square of each column.
pub fn column_rms(x: &Array2<f64>) -> Vec<f64> {
    let n = x.nrows() as f64;
    x.columns()
        .into_iter()
        .map(|c| (c.iter().map(|v| v * v).sum::<f64>() / n).sqrt())
        .collect()
}

fn residuals(x: &Array2<f64>, y: &Array1<f64>, b: &[f64], c: &[f64]) -> Vec<f64> {
    (0..x.nrows())
        .map(|i| {
            let fit: f64 = (0..x.ncols()).map(|j| x[[i, j]] * b[j]).sum();
            y[i] - fit - c.get(i).copied().unwrap_or(0.0)
        })
        .collect()
}

/// `(1/n)||y - Xb||^2 + lambda * sum_j w_j |b_j|`
pub fn lasso_obj(x: &Array2<f64>, y: &Array1<f64>, w: &[f64], lambda: f64, b: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let r = residuals(x, y, b, &[]);
    r.iter().map(|v| v * v).sum::<f64>() / n
        + lambda * b.iter().zip(w).map(|(b, w)| w * b.abs()).sum::<f64>()
}

pub fn lasso_oracle(x: &Array2<f64>, y: &Array1<f64>, w: &[f64], lambda: f64) -> Vec<f64> {
    coordinate_grid_minimize(|b| lasso_obj(x, y, w, lambda, b), vec![0.0; x.ncols()])
}

/// `sqrt(Q) + (lb/n) sum psi_j |b_j| + (lg/n) sum |c_i|`, with
/// `Q = (1/n)||y - Xb - c||^2` and `psi` the column RMS of `X`.
pub fn robust_obj(x: &Array2<f64>, y: &Array1<f64>, lb: f64, lg: f64, b: &[f64], c: &[f64]) -> f64 {
    let n = x.nrows() as f64;
    let psi = column_rms(x);
    let r = residuals(x, y, b, c);
    let q = r.iter().map(|v| v * v).sum::<f64>() / n;
    q.sqrt()
        + lb / n * b.iter().zip(&psi).map(|(b, p)| p * b.abs()).sum::<f64>()
        + lg / n * c.iter().map(|c| c.abs()).sum::<f64>()
}

/// Minimizes the robust objective over (b, c) jointly, returned as
/// `(b, c)`.
pub fn robust_oracle(x: &Array2<f64>, y: &Array1<f64>, lb: f64, lg: f64) -> (Vec<f64>, Vec<f64>) {
    let (n, p) = x.dim();
    let z = coordinate_grid_minimize(
        |z| robust_obj(x, y, lb, lg, &z[..p], &z[p..]),
        vec![0.0; p + n],
    );
    (z[..p].to_vec(), z[p..].to_vec())
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let k = b.len();
    for col in 0..k {
        let piv = (col..k)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..k {
            let f = a[row][col] / a[col][col];
            let pivot_row = a[col].clone();
            for (dst, src) in a[row].iter_mut().zip(&pivot_row).skip(col) {
                *dst -= f * src;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; k];
    for i in (0..k).rev() {
        let s: f64 = (i + 1..k).map(|t| a[i][t] * x[t]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// OLS coefficients of `y` on the columns of `e` via the normal equations.
pub fn normal_equations(e: &Array2<f64>, y: &[f64]) -> Vec<f64> {
    let (n, k) = e.dim();
    let gram = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| (0..n).map(|i| e[[i, a]] * e[[i, b]]).sum())
                .collect()
        })
        .collect();
    let rhs = (0..k)
        .map(|a| (0..n).map(|i| e[[i, a]] * y[i]).sum())
        .collect();
    dense_solve(gram, rhs)
}
