//! Chain summaries: effective sample size, quantiles, covariance and the
//! two-sample Kolmogorov-Smirnov test.

use crate::error::{usage, Result};

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Effective sample size from the initial positive sequence estimator of the
/// integrated autocorrelation time, with the monotone correction.
/// A constant chain has ESS 0.
pub fn chain_ess(xs: &[f64]) -> f64 {
    let m = xs.len();
    if m < 4 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / m as f64;
    let centred: Vec<f64> = xs.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| centred[..m - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / m as f64;
    let g0 = autocov(0);
    if !(g0 > 0.0) {
        return 0.0;
    }
    // pairs Gamma_k = rho_{2k} + rho_{2k+1}
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < m {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / g0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        sum += pair;
        prev = pair;
        k += 1;
    }
    // tau = -1 + 2 sum Gamma_k
    let tau = (2.0 * sum - 1.0).max(1e-12);
    m as f64 / tau
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Sample covariance of rows (d×d, row-major).
pub fn empirical_covariance(rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = rows.len();
    if n < 2 {
        return usage("covariance needs at least two rows");
    }
    let d = rows[0].len();
    if rows.iter().any(|r| r.len() != d) {
        return usage("rows have different lengths");
    }
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![0.0; d * d];
    for r in rows {
        for a in 0..d {
            for b in 0..d {
                cov[a * d + b] += (r[a] - mean[a]) * (r[b] - mean[b]);
            }
        }
    }
    cov.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    Ok(cov)
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0f64);
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic p-value of a two-sample KS statistic `d` for sample sizes `na`, `nb`.
pub fn ks_p_value(d: f64, na: usize, nb: usize) -> f64 {
    let ne = (na * nb) as f64 / (na + nb) as f64;
    let sq = ne.sqrt();
    let lambda = (sq + 0.12 + 0.11 / sq) * d;
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let term = sign * (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-12 {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Posterior summary of one chain coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateSummary {
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub q50: f64,
    pub q975: f64,
    pub ess: f64,
}

impl CoordinateSummary {
    pub fn of(xs: &[f64]) -> Self {
        let mut sorted = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        Self {
            mean: xs.iter().sum::<f64>() / xs.len().max(1) as f64,
            sd: sample_variance(xs).sqrt(),
            q025: quantile_sorted(&sorted, 0.025),
            q50: quantile_sorted(&sorted, 0.5),
            q975: quantile_sorted(&sorted, 0.975),
            ess: chain_ess(xs),
        }
    }
}
