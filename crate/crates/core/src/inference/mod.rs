//! Sequential filtering over an observation grid, particle marginal
//! Metropolis-Hastings, and chain diagnostics.

mod diagnostics;
mod pmmh;

pub use diagnostics::{
    chain_ess, empirical_covariance, ks_p_value, ks_two_sample, quantile_sorted, sample_variance, CoordinateSummary,
};
pub use pmmh::{estimate_tau2, loglik_replicates, pmmh, PmmhChain, PmmhConfig, Prior};

use std::fmt;
use std::sync::Arc;

use crate::bridge::{
    log_mean_exp, normalize_log_weights, resample, run_bridge_pf, run_conditioned_is, run_myopic_is,
    BridgeConfig, Problem, SamplerOptions,
};
use crate::error::{usage, Result};
use crate::network::{RateConstants, ReactionNetwork, State};
use crate::observation::ObservationModel;
use crate::rng::RngStream;

/// Observations `y_0, ..., y_T` at increasing times through a shared model.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries {
    pub times: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub obs: ObservationModel,
}

impl ObservationSeries {
    pub fn new(times: Vec<f64>, ys: Vec<Vec<f64>>, obs: ObservationModel) -> Result<Self> {
        if times.is_empty() {
            return usage("observation series is empty");
        }
        if times.len() != ys.len() {
            return usage(format!("{} times but {} observations", times.len(), ys.len()));
        }
        if times.iter().any(|t| !t.is_finite()) || times.windows(2).any(|w| !(w[1] > w[0])) {
            return usage("observation times must be finite and strictly increasing");
        }
        for y in &ys {
            obs.check_observation(y)?;
        }
        Ok(Self { times, ys, obs })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Single-interval sampler used inside the filter.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Mis,
    Ch,
    Bpf(BridgeConfig),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mis => "mis",
            Method::Ch => "ch",
            Method::Bpf(cfg) => match cfg.weight_fn {
                crate::bridge::WeightFn::Cle => "bpf-cle",
                crate::bridge::WeightFn::Lna => "bpf-lna",
            },
        }
    }
}

/// How the state at the first observation time is obtained.
#[derive(Clone)]
pub enum InitialState {
    Fixed(State),
    /// Draws from the prior `pi(x_0)`.
    Sampler(Arc<dyn Fn(&mut RngStream) -> State + Send + Sync>),
}

impl fmt::Debug for InitialState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialState::Fixed(s) => f.debug_tuple("Fixed").field(s).finish(),
            InitialState::Sampler(_) => f.write_str("Sampler(..)"),
        }
    }
}

/// Result of one filtering pass.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterOutput {
    /// `log p_hat(y | c)`; `-inf` when some interval lost every particle.
    pub log_lik: f64,
    /// Per-step terms: the initial weighting, then one per interval.
    pub increments: Vec<f64>,
    /// Equally weighted particles at the last time reached.
    pub particles: Vec<State>,
}

/// Estimates the marginal likelihood of `series` by running `method` on each
/// interval in turn, starting every interval from the previous resample.
///
/// Random stream layout: substream 0 initialises, substream `k` drives
/// interval `k`.
#[allow(clippy::too_many_arguments)]
pub fn run_filter(
    method: &Method,
    net: &ReactionNetwork,
    c: &RateConstants,
    series: &ObservationSeries,
    x0: &InitialState,
    n: usize,
    opts: &SamplerOptions,
    rng: &RngStream,
) -> Result<FilterOutput> {
    if n == 0 {
        return usage("at least one particle is required");
    }
    if c.len() != net.n_reactions() || series.obs.n_species() != net.n_species() {
        return usage("rate constants or observation model do not match network");
    }
    let obs = &series.obs;
    let mut scratch = vec![0.0; 2 * obs.dim()];
    let init_rng = rng.substream(0);
    let (mut particles, first) = match x0 {
        InitialState::Fixed(s) => {
            if s.len() != net.n_species() {
                return usage("initial state does not match network");
            }
            (vec![s.clone()], obs.loglik_counts(&series.ys[0], &s.counts, &mut scratch))
        }
        InitialState::Sampler(draw) => {
            let draws: Vec<State> = (0..n).map(|i| draw(&mut init_rng.substream_path(&[0, i as u64]))).collect();
            let lw: Vec<f64> = draws.iter().map(|s| obs.loglik_counts(&series.ys[0], &s.counts, &mut scratch)).collect();
            let idx = resample(&normalize_log_weights(&lw), n, opts.resampling, &mut init_rng.substream(1));
            (idx.iter().map(|&i| draws[i].clone()).collect(), log_mean_exp(&lw))
        }
    };
    let mut increments = vec![first];
    let mut log_lik = first;
    if log_lik == f64::NEG_INFINITY {
        return Ok(FilterOutput { log_lik, increments, particles: Vec::new() });
    }
    for k in 1..series.len() {
        let problem = Problem {
            net,
            c,
            obs,
            y: &series.ys[k],
            start: series.times[k - 1],
            end: series.times[k],
        };
        let stream = rng.substream(k as u64);
        let out = match method {
            Method::Mis => run_myopic_is(&problem, &particles, n, opts, &stream)?,
            Method::Ch => run_conditioned_is(&problem, &particles, n, opts, &stream)?,
            Method::Bpf(cfg) => run_bridge_pf(&problem, &particles, n, cfg, opts, &stream)?,
        };
        increments.push(out.log_z);
        log_lik += out.log_z;
        if out.log_z == f64::NEG_INFINITY {
            return Ok(FilterOutput { log_lik, increments, particles: Vec::new() });
        }
        particles = out.ensemble.resampled_states();
    }
    if particles.len() == 1 && n > 1 {
        particles = vec![particles[0].clone(); n];
    }
    Ok(FilterOutput { log_lik, increments, particles })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn bd_series(ys: &[f64], var: f64) -> ObservationSeries {
        let obs = ObservationModel::identity(1, var).unwrap();
        ObservationSeries::new(
            (0..ys.len()).map(|t| t as f64).collect(),
            ys.iter().map(|&y| vec![y]).collect(),
            obs,
        )
        .unwrap()
    }

    #[test]
    fn series_validation() {
        let obs = ObservationModel::identity(1, 1.0).unwrap();
        assert!(ObservationSeries::new(vec![0.0, 0.0], vec![vec![1.0], vec![2.0]], obs.clone()).is_err());
        assert!(ObservationSeries::new(vec![0.0, 1.0], vec![vec![1.0]], obs.clone()).is_err());
        assert!(ObservationSeries::new(vec![0.0], vec![vec![1.0, 2.0]], obs.clone()).is_err());
        assert!(ObservationSeries::new(vec![], vec![], obs).is_err());
    }

    #[test]
    fn single_observation_is_observation_density() {
        let (net, c, x0) = models::birth_death();
        let series = bd_series(&[101.0], 1.0);
        let out = run_filter(
            &Method::Ch,
            &net,
            &c,
            &series,
            &InitialState::Fixed(x0),
            10,
            &SamplerOptions::lean(),
            &RngStream::new(1),
        )
        .unwrap();
        assert!((out.log_lik - (-0.5 - 0.5 * (2.0 * std::f64::consts::PI).ln())).abs() < 1e-12);
        assert_eq!(out.particles.len(), 10);
    }

    #[test]
    fn two_observations_add_one_interval() {
        let (net, c, x0) = models::birth_death();
        let series = bd_series(&[100.0, 70.0], 4.0);
        let rng = RngStream::new(2);
        let out = run_filter(&Method::Mis, &net, &c, &series, &InitialState::Fixed(x0.clone()), 50, &SamplerOptions::lean(), &rng)
            .unwrap();
        let problem = Problem { net: &net, c: &c, obs: &series.obs, y: &[70.0], start: 0.0, end: 1.0 };
        let single = run_myopic_is(&problem, &[x0], 50, &SamplerOptions::lean(), &rng.substream(1)).unwrap();
        let ll0 = series.obs.loglik_counts(&[100.0], &[100], &mut [0.0; 2]);
        assert_eq!(out.increments, vec![ll0, single.log_z]);
        assert!((out.log_lik - (ll0 + single.log_z)).abs() < 1e-12);
    }

    #[test]
    fn sampled_initial_state_is_reweighted() {
        let (net, c, _) = models::birth_death();
        let series = bd_series(&[30.0, 20.0], 1.0);
        let x0 = InitialState::Sampler(Arc::new(|r: &mut RngStream| State::from(vec![20 + (r.uniform() * 21.0) as i64])));
        let out = run_filter(&Method::Ch, &net, &c, &series, &x0, 200, &SamplerOptions::lean(), &RngStream::new(4)).unwrap();
        assert!(out.log_lik.is_finite());
        assert!(out.increments[0] < 0.0);
    }

    #[test]
    fn impossible_series_gives_minus_infinity() {
        let (net, _, _) = models::birth_death();
        let c = RateConstants::with_zeros(vec![0.0, 1.0]).unwrap();
        let series = bd_series(&[10.0, 15.0], 0.0);
        let out = run_filter(
            &Method::Mis,
            &net,
            &c,
            &series,
            &InitialState::Fixed(State::from(vec![10])),
            20,
            &SamplerOptions::lean(),
            &RngStream::new(5),
        )
        .unwrap();
        assert_eq!(out.log_lik, f64::NEG_INFINITY);
    }
}
