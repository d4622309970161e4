//! Particle marginal Metropolis-Hastings on log rate constants.

use super::diagnostics::sample_variance;
use super::{run_filter, InitialState, Method, ObservationSeries};
use crate::bridge::SamplerOptions;
use crate::error::{usage, Result};
use crate::linalg::cholesky_in_place;
use crate::network::{RateConstants, ReactionNetwork};
use crate::rng::RngStream;

/// Independent uniform priors on `log c_i` for the free reactions `free[k]`.
/// Reactions not listed keep fixed rates.
#[derive(Debug, Clone, PartialEq)]
pub struct Prior {
    pub free: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Prior {
    /// Priors on all of `c_1, ..., c_d` in order.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        Self::partial((0..lower.len()).collect(), lower, upper)
    }

    /// Priors on the listed reactions only.
    pub fn partial(free: Vec<usize>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != free.len() || lower.is_empty() {
            return usage("prior bounds must be non-empty and of equal length");
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return usage("each prior needs finite bounds with lower < upper");
        }
        let mut seen = free.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != free.len() {
            return usage("free reaction indices must be distinct");
        }
        Ok(Self { free, lower, upper })
    }

    /// The same `U(lo, hi)` prior on every one of `d` rate constants.
    pub fn uniform(d: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; d], vec![hi; d])
    }

    /// Full rate vector: `base` with the free entries set to `exp(theta)`.
    pub fn rates(&self, theta: &[f64], base: Option<&RateConstants>) -> Result<RateConstants> {
        let v = match base {
            Some(b) => b.len(),
            None => self.free.len(),
        };
        if self.free.iter().any(|&i| i >= v) {
            return usage("free reaction index out of range");
        }
        let mut c = match base {
            Some(b) => b.as_slice().to_vec(),
            None => {
                if self.free.iter().enumerate().any(|(k, &i)| k != i) {
                    return usage("fixed rates are required when only some reactions are free");
                }
                vec![0.0; v]
            }
        };
        for (&i, t) in self.free.iter().zip(theta) {
            c[i] = t.exp();
        }
        RateConstants::new(c)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        theta.len() == self.dim() && theta.iter().zip(self.lower.iter().zip(&self.upper)).all(|(t, (l, u))| t >= l && t <= u)
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        if self.contains(theta) {
            -self.lower.iter().zip(&self.upper).map(|(l, u)| (u - l).ln()).sum::<f64>()
        } else {
            f64::NEG_INFINITY
        }
    }

    pub fn sample(&self, rng: &mut RngStream) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| l + (u - l) * rng.uniform()).collect()
    }
}

/// Settings of a PMMH run.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmhConfig {
    pub method: Method,
    pub n_particles: usize,
    pub iterations: usize,
    /// Scale applied to `proposal_cov`.
    pub lambda: f64,
    /// Pilot estimate of the posterior covariance of the free `log c` (d×d).
    pub proposal_cov: Vec<f64>,
    pub options: SamplerOptions,
    /// Rates of reactions the prior leaves fixed.
    pub base: Option<RateConstants>,
}

/// Output chain. Row `m` holds the state after iteration `m + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PmmhChain {
    pub thetas: Vec<Vec<f64>>,
    pub loglik_hats: Vec<f64>,
    pub accepted: Vec<bool>,
    /// Log-likelihood estimate at the initial point.
    pub initial_loglik: f64,
    /// Number of filter runs made (initial point plus in-prior proposals).
    pub filter_calls: usize,
}

impl PmmhChain {
    pub fn len(&self) -> usize {
        self.thetas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thetas.is_empty()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|&&a| a).count() as f64 / self.accepted.len() as f64
    }

    /// Values of coordinate `j` after discarding `burn_in` rows and keeping every `thin`-th.
    pub fn coordinate(&self, j: usize, burn_in: usize, thin: usize) -> Vec<f64> {
        self.thetas.iter().skip(burn_in).step_by(thin.max(1)).map(|t| t[j]).collect()
    }
}

/// Runs PMMH from `init` (drawn from the prior when `None`).
///
/// Iteration `m` uses substream `m` of `rng`: its child 0 drives the proposal
/// and acceptance draw, child 1 the particle filter. The initial estimate
/// uses substream 0.
pub fn pmmh(
    cfg: &PmmhConfig,
    net: &ReactionNetwork,
    series: &ObservationSeries,
    x0: &InitialState,
    prior: &Prior,
    init: Option<Vec<f64>>,
    rng: &RngStream,
) -> Result<PmmhChain> {
    let d = prior.dim();
    if prior.free.iter().any(|&i| i >= net.n_reactions()) {
        return usage("prior refers to a reaction the network does not have");
    }
    if d < net.n_reactions() && cfg.base.as_ref().map(|b| b.len()) != Some(net.n_reactions()) {
        return usage("fixed rates for every reaction are required when the prior is partial");
    }
    if !(cfg.lambda > 0.0) {
        return usage("lambda must be positive");
    }
    if cfg.proposal_cov.len() != d * d {
        return usage("proposal covariance has the wrong size");
    }
    let mut chol: Vec<f64> = cfg.proposal_cov.iter().map(|v| v * cfg.lambda).collect();
    if !cholesky_in_place(&mut chol, d) {
        return usage("proposal covariance is not positive definite");
    }
    let estimate = |theta: &[f64], stream: &RngStream| -> Result<f64> {
        let c = prior.rates(theta, cfg.base.as_ref())?;
        Ok(run_filter(&cfg.method, net, &c, series, x0, cfg.n_particles, &cfg.options, stream)?.log_lik)
    };

    let mut theta = match init {
        Some(t) => t,
        None => prior.sample(&mut rng.substream_path(&[0, 0])),
    };
    if !prior.contains(&theta) {
        return usage("initial parameters lie outside the prior support");
    }
    let mut ll = estimate(&theta, &rng.substream_path(&[0, 1]))?;
    let initial_loglik = ll;
    let mut chain = PmmhChain {
        thetas: Vec::with_capacity(cfg.iterations),
        loglik_hats: Vec::with_capacity(cfg.iterations),
        accepted: Vec::with_capacity(cfg.iterations),
        initial_loglik,
        filter_calls: 1,
    };
    let mut z = vec![0.0; d];
    for m in 1..=cfg.iterations {
        let it = rng.substream(m as u64);
        let mut draws = it.substream(0);
        z.iter_mut().for_each(|v| *v = draws.standard_normal());
        let proposal: Vec<f64> = (0..d)
            .map(|a| theta[a] + (0..=a).map(|b| chol[a * d + b] * z[b]).sum::<f64>())
            .collect();
        let log_u = draws.uniform_open0().ln();
        let mut accept = false;
        if prior.contains(&proposal) {
            let ll_new = estimate(&proposal, &it.substream(1))?;
            chain.filter_calls += 1;
            // symmetric proposal, flat prior inside the support
            let log_alpha = ll_new - ll;
            if ll_new > f64::NEG_INFINITY && (ll == f64::NEG_INFINITY || log_u < log_alpha) {
                accept = true;
                theta = proposal;
                ll = ll_new;
            }
        }
        chain.thetas.push(theta.clone());
        chain.loglik_hats.push(ll);
        chain.accepted.push(accept);
    }
    Ok(chain)
}

/// `r` independent log-likelihood estimates at fixed `c`; replicate `i` uses substream `i`.
#[allow(clippy::too_many_arguments)]
pub fn loglik_replicates(
    method: &Method,
    net: &ReactionNetwork,
    c: &RateConstants,
    series: &ObservationSeries,
    x0: &InitialState,
    n: usize,
    r: usize,
    options: &SamplerOptions,
    rng: &RngStream,
) -> Result<Vec<f64>> {
    (0..r)
        .map(|i| Ok(run_filter(method, net, c, series, x0, n, options, &rng.substream(i as u64))?.log_lik))
        .collect()
}

/// Variance of the log-likelihood estimator at fixed `c` from `r >= 20`
/// replicates; `+inf` when any replicate is `-inf`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_tau2(
    method: &Method,
    net: &ReactionNetwork,
    c: &RateConstants,
    series: &ObservationSeries,
    x0: &InitialState,
    n: usize,
    r: usize,
    options: &SamplerOptions,
    rng: &RngStream,
) -> Result<f64> {
    if r < 20 {
        return usage("tau^2 needs at least 20 replicates");
    }
    let lls = loglik_replicates(method, net, c, series, x0, n, r, options, rng)?;
    if lls.iter().any(|l| !l.is_finite()) {
        return Ok(f64::INFINITY);
    }
    Ok(sample_variance(&lls))
}
