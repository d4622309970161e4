//! Small dense row-major helpers for the p×p and u×u systems in the hot loops.

use std::f64::consts::PI;

/// In-place lower Cholesky factor of the n×n matrix `a`. Returns `false` when
/// a pivot is not safely positive relative to the matrix scale.
pub fn cholesky_in_place(a: &mut [f64], n: usize) -> bool {
    let scale = (0..n).map(|i| a[i * n + i].abs()).fold(0.0, f64::max);
    if !(scale > 0.0) || !scale.is_finite() {
        return false;
    }
    let tiny = scale * 1e-13;
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if !(d > tiny) {
            return false;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
        for i in 0..j {
            a[i * n + j] = 0.0;
        }
    }
    true
}

/// Solves `L L' x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[i * n + k] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for k in i + 1..n {
            s -= l[k * n + i] * b[k];
        }
        b[i] = s / l[i * n + i];
    }
}

pub fn cholesky_logdet(l: &[f64], n: usize) -> f64 {
    2.0 * (0..n).map(|i| l[i * n + i].ln()).sum::<f64>()
}

/// Multivariate normal log-density given a Cholesky factor of the covariance.
pub fn mvn_logpdf_chol(y: &[f64], mean: &[f64], l: &[f64], scratch: &mut [f64]) -> f64 {
    let n = y.len();
    // forward substitution only: ||L^{-1}(y - mean)||^2
    let mut quad = 0.0;
    for i in 0..n {
        let mut s = y[i] - mean[i];
        for k in 0..i {
            s -= l[i * n + k] * scratch[k];
        }
        scratch[i] = s / l[i * n + i];
        quad += scratch[i] * scratch[i];
    }
    -0.5 * quad - 0.5 * cholesky_logdet(l, n) - 0.5 * n as f64 * (2.0 * PI).ln()
}
