//! Small dense helpers for symmetric positive-definite matrices.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

/// Lower Cholesky factor, or `None` if the matrix is not positive definite.
pub(crate) fn cholesky(a: ArrayView2<'_, f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut l = Array2::<f64>::zeros((n, n));
    for j in 0..n {
        let mut diag = a[[j, j]];
        for k in 0..j {
            diag -= l[[j, k]] * l[[j, k]];
        }
        if !(diag > 0.0) || !diag.is_finite() {
            return None;
        }
        let ljj = diag.sqrt();
        l[[j, j]] = ljj;
        for i in j + 1..n {
            let mut s = a[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            l[[i, j]] = s / ljj;
        }
    }
    Some(l)
}

/// Solves `L y = b` in place for lower-triangular `L`.
pub(crate) fn forward_substitute(l: ArrayView2<'_, f64>, b: &mut [f64]) {
    let n = b.len();
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * b[k];
        }
        b[i] = s / l[[i, i]];
    }
}

/// Solves `L^T x = y` in place.
pub(crate) fn backward_substitute(l: ArrayView2<'_, f64>, y: &mut [f64]) {
    let n = y.len();
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
}

/// Solves `A X = B` given the Cholesky factor of `A`.
pub(crate) fn cholesky_solve(l: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>) -> Array2<f64> {
    let mut x = b.to_owned();
    let mut col = vec![0.0; b.nrows()];
    for j in 0..b.ncols() {
        for (c, v) in col.iter_mut().zip(b.column(j)) {
            *c = *v;
        }
        forward_substitute(l, &mut col);
        backward_substitute(l, &mut col);
        for (dst, v) in x.column_mut(j).iter_mut().zip(&col) {
            *dst = *v;
        }
    }
    x
}

pub(crate) fn log_det_from_cholesky(l: ArrayView2<'_, f64>) -> f64 {
    2.0 * l.diag().iter().map(|v| v.ln()).sum::<f64>()
}

/// Squared Mahalanobis norm `(x-mu)^T A^{-1} (x-mu)` using the factor of `A`.
pub(crate) fn mahalanobis_sq(l: ArrayView2<'_, f64>, x: ArrayView1<'_, f64>, mu: ArrayView1<'_, f64>, scratch: &mut Vec<f64>) -> f64 {
    scratch.clear();
    scratch.extend(x.iter().zip(mu.iter()).map(|(a, b)| a - b));
    forward_substitute(l, scratch);
    scratch.iter().map(|v| v * v).sum()
}

pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

pub(crate) fn column_variance(data: ArrayView2<'_, f64>) -> Array1<f64> {
    let n = data.nrows() as f64;
    let mean = data.mean_axis(ndarray::Axis(0)).expect("non-empty data");
    let mut var = Array1::zeros(data.ncols());
    for row in data.rows() {
        for ((v, x), m) in var.iter_mut().zip(row.iter()).zip(mean.iter()) {
            *v += (x - m) * (x - m);
        }
    }
    var / n
}
