//! Samplers for jump-process paths conditioned on an end-point observation.
//!
//! Three schemes are provided, all returning a weighted particle ensemble and
//! an unbiased estimate of the observation's normalising constant
//! `p(y_t | x_0)`:
//!
//! * myopic importance sampling: forward simulation weighted by `p(y|x_t)`;
//! * conditioned-hazard importance sampling: paths proposed from a hazard
//!   pulled towards the observation, weighted by the likelihood ratio;
//! * the bridge particle filter: forward simulation with look-ahead weights
//!   from a Gaussian approximation and adaptive resampling.
//!
//! All weight arithmetic is done in log space.

mod bpf;
mod conditioned;
mod samplers;

pub use bpf::{bridge_pf, run_bridge_pf};
pub use conditioned::{
    conditioned_hazard, conditioned_is_logweight, sample_conditioned_path, ConditionedHazard,
};
pub use samplers::{conditioned_is, myopic_is, run_conditioned_is, run_myopic_is};

use crate::error::{usage, Result};
use crate::gillespie::Trajectory;
use crate::network::{RateConstants, ReactionNetwork, State};
use crate::observation::ObservationModel;
use crate::rng::RngStream;

/// Which Gaussian approximation supplies the bridge filter's look-ahead weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightFn {
    Cle,
    Lna,
}

/// Settings of the bridge particle filter.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgeConfig {
    /// Number of equal sub-intervals (resampling opportunities) per observation interval.
    pub n_intermediate: usize,
    /// Resample when ESS < beta * N.
    pub beta: f64,
    /// Tempering exponent applied to the look-ahead densities.
    pub gamma: f64,
    pub weight_fn: WeightFn,
    /// Always resample on the initial look-ahead weights instead of using the
    /// ESS rule (auxiliary particle filter initialisation for random `x0`).
    pub resample_initial: bool,
}

impl Default for BridgeConfig {
    fn default() -> Self {
        Self {
            n_intermediate: 10,
            beta: 0.5,
            gamma: 1.0,
            weight_fn: WeightFn::Lna,
            resample_initial: false,
        }
    }
}

impl BridgeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_intermediate == 0 {
            return usage("n_intermediate must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return usage(format!("beta must lie in [0, 1], got {}", self.beta));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return usage(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        Ok(())
    }

    /// Partition count for an interval of length `len` with resampling step `dt`.
    pub fn partition_for(len: f64, dt: f64) -> usize {
        ((len / dt) - 1e-9).ceil().max(1.0) as usize
    }
}

/// How resampling draws indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Resampling {
    #[default]
    Multinomial,
    Systematic,
}

/// Execution options shared by the samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerOptions {
    /// Keep full event paths (otherwise only end states are tracked).
    pub keep_paths: bool,
    pub resampling: Resampling,
    /// Propagate particles on the rayon pool.
    pub parallel: bool,
    /// Lower bound of the conditioned hazard as a fraction of `h`; zero
    /// gives plain truncation, which is biased low. Small positive values
    /// restore unbiasedness but make the weights heavy-tailed.
    pub ch_floor: f64,
}

impl Default for SamplerOptions {
    fn default() -> Self {
        Self {
            keep_paths: true,
            resampling: Resampling::Multinomial,
            parallel: true,
            ch_floor: 0.0,
        }
    }
}

impl SamplerOptions {
    /// End states only; the configuration used inside filtering and PMMH.
    pub fn lean() -> Self {
        Self {
            keep_paths: false,
            ..Self::default()
        }
    }
}

/// A single observation interval `(start, end]` with its observation.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub net: &'a ReactionNetwork,
    pub c: &'a RateConstants,
    pub obs: &'a ObservationModel,
    pub y: &'a [f64],
    pub start: f64,
    pub end: f64,
}

impl Problem<'_> {
    pub fn validate(&self) -> Result<()> {
        if !(self.end > self.start) {
            return usage(format!("interval end {} must exceed start {}", self.end, self.start));
        }
        if self.c.len() != self.net.n_reactions() {
            return usage("rate constants do not match network");
        }
        if self.obs.n_species() != self.net.n_species() {
            return usage("observation model does not match network");
        }
        self.obs.check_observation(self.y)
    }
}

/// Weighted particles at the end of an interval.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    /// End state of each particle.
    pub states: Vec<State>,
    /// Full paths when requested; empty otherwise.
    pub paths: Vec<Trajectory>,
    /// Unnormalised log-weights of the particles (before the final resampling).
    pub log_weights: Vec<f64>,
    /// Resampling indices per epoch where resampling happened, in order; the
    /// last entry is the final resampling used to equalise the weights.
    pub ancestors: Vec<Vec<usize>>,
    /// Indices of the equally weighted resample (empty when all weights vanish).
    pub resampled: Vec<usize>,
}

impl ParticleEnsemble {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Weights normalised to sum to one (all zero when every weight vanishes).
    pub fn normalized_weights(&self) -> Vec<f64> {
        normalize_log_weights(&self.log_weights)
    }

    pub fn ess(&self) -> f64 {
        ess(&self.normalized_weights())
    }

    /// The equally weighted resampled end states.
    pub fn resampled_states(&self) -> Vec<State> {
        self.resampled.iter().map(|&i| self.states[i].clone()).collect()
    }
}

/// Output of one sampler run.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerOutput {
    pub ensemble: ParticleEnsemble,
    /// Log of the estimated normalising constant; `-inf` when all weights vanish.
    pub log_z: f64,
    /// How many times the Gaussian observation density was evaluated on the
    /// final sub-interval (zero for exact observations).
    pub final_likelihood_evals: usize,
}

impl SamplerOutput {
    pub fn z_hat(&self) -> f64 {
        self.log_z.exp()
    }
}

/// Effective sample size `(sum w)^2 / sum w^2`; 0 when every weight is 0.
pub fn ess(weights: &[f64]) -> f64 {
    let s: f64 = weights.iter().sum();
    let s2: f64 = weights.iter().map(|w| w * w).sum();
    if s2 > 0.0 {
        s * s / s2
    } else {
        0.0
    }
}

/// ESS computed from log-weights with a max shift.
pub fn ess_log(log_weights: &[f64]) -> f64 {
    ess(&normalize_log_weights(log_weights))
}

/// `log(mean(exp(lw)))`, `-inf` when every entry is `-inf`.
pub fn log_mean_exp(log_weights: &[f64]) -> f64 {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = log_weights.iter().map(|w| (w - m).exp()).sum();
    m + (s / log_weights.len() as f64).ln()
}

/// Normalised linear weights from log-weights.
pub fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let m = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![0.0; log_weights.len()];
    }
    let mut w: Vec<f64> = log_weights.iter().map(|lw| (lw - m).exp()).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= s);
    w
}

/// `n` iid draws from the categorical distribution proportional to `weights`.
pub fn resample_multinomial(weights: &[f64], n: usize, rng: &mut RngStream) -> Vec<usize> {
    let cdf = cumulative(weights);
    let total = *cdf.last().unwrap_or(&0.0);
    if !(total > 0.0) {
        return Vec::new();
    }
    (0..n).map(|_| search(&cdf, rng.uniform() * total)).collect()
}

/// Systematic resampling: one uniform offset, `n` evenly spaced points.
pub fn resample_systematic(weights: &[f64], n: usize, rng: &mut RngStream) -> Vec<usize> {
    let cdf = cumulative(weights);
    let total = *cdf.last().unwrap_or(&0.0);
    if !(total > 0.0) {
        return Vec::new();
    }
    let u0 = rng.uniform();
    (0..n).map(|k| search(&cdf, (k as f64 + u0) / n as f64 * total)).collect()
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn search(cdf: &[f64], target: f64) -> usize {
    let i = cdf.partition_point(|&c| c <= target);
    if i < cdf.len() {
        i
    } else {
        // rounding at the top end: last index with positive mass
        let mut j = cdf.len() - 1;
        while j > 0 && cdf[j] == cdf[j - 1] {
            j -= 1;
        }
        j
    }
}

pub(crate) fn resample(weights: &[f64], n: usize, how: Resampling, rng: &mut RngStream) -> Vec<usize> {
    match how {
        Resampling::Multinomial => resample_multinomial(weights, n, rng),
        Resampling::Systematic => resample_systematic(weights, n, rng),
    }
}

/// Substream layout for one interval run.
pub(crate) mod streams {
    pub const PROPAGATE: u64 = 0;
    pub const RESAMPLE: u64 = 1;
    /// Epoch tag of the final equalising resample.
    pub const FINAL: u64 = u64::MAX;
}

/// Map `f` over particle indices, in parallel when requested. Output order
/// always follows the index order.
pub(crate) fn map_particles<T, F>(n: usize, parallel: bool, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    if parallel && n > 1 {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    } else {
        (0..n).map(f).collect()
    }
}

/// Expands `starts` (length 1 or `n`) to one start state per particle.
pub(crate) fn expand_starts(starts: &[State], n: usize) -> Result<Vec<State>> {
    match starts.len() {
        0 => usage("at least one start state is required"),
        1 => Ok(vec![starts[0].clone(); n]),
        m if m == n => Ok(starts.to_vec()),
        m => usage(format!("{m} start states for {n} particles")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ess_examples() {
        assert_relative_eq!(ess(&[0.25; 4]), 4.0, epsilon = 1e-12);
        assert_relative_eq!(ess(&[3.0; 7]), 7.0, epsilon = 1e-12);
        assert_eq!(ess(&[0.0, 1.0, 0.0]), 1.0);
        assert_relative_eq!(ess(&[0.7, 0.2, 0.1]), 1.0 / 0.54, epsilon = 1e-12);
        assert_relative_eq!(ess(&[0.7, 0.2, 0.1]), 1.8519, epsilon = 1e-4);
        assert_eq!(ess(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn one_hot_resampling() {
        let mut rng = RngStream::new(1);
        let idx = resample_multinomial(&[0.0, 0.0, 1.0, 0.0], 50, &mut rng);
        assert!(idx.iter().all(|&i| i == 2));
        let idx = resample_systematic(&[0.0, 1.0, 0.0], 50, &mut rng);
        assert!(idx.iter().all(|&i| i == 1));
        assert!(resample_multinomial(&[0.0, 0.0], 3, &mut rng).is_empty());
    }

    #[test]
    fn uniform_resampling_counts() {
        let mut rng = RngStream::new(2);
        let k = 10;
        let n = 100_000;
        let idx = resample_multinomial(&vec![1.0; k], n, &mut rng);
        let mut counts = vec![0usize; k];
        idx.iter().for_each(|&i| counts[i] += 1);
        let expected = n as f64 / k as f64;
        let sd = (n as f64 * 0.1 * 0.9).sqrt();
        for c in counts {
            assert!((c as f64 - expected).abs() < 4.0 * sd);
        }
    }

    #[test]
    fn two_way_resampling_frequency() {
        let mut rng = RngStream::new(3);
        let n = 20_000;
        let idx = resample_multinomial(&[0.5, 0.5], n, &mut rng);
        let ones = idx.iter().filter(|&&i| i == 0).count() as f64;
        assert!((ones - 0.5 * n as f64).abs() < 4.0 * (n as f64 * 0.25).sqrt());
    }

    #[test]
    fn log_weight_helpers() {
        let lw = [0.0f64.ln(), 2.0f64.ln(), 6.0f64.ln()];
        assert_relative_eq!(log_mean_exp(&lw), (8.0f64 / 3.0).ln(), epsilon = 1e-14);
        let w = normalize_log_weights(&lw);
        assert_relative_eq!(w.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_eq!(log_mean_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
        assert_eq!(normalize_log_weights(&[f64::NEG_INFINITY; 2]), vec![0.0, 0.0]);
    }

    #[test]
    fn partition_counts() {
        assert_eq!(BridgeConfig::partition_for(0.1, 0.02), 5);
        assert_eq!(BridgeConfig::partition_for(1.0, 0.05), 20);
        assert_eq!(BridgeConfig::partition_for(1.0, 0.2), 5);
        assert_eq!(BridgeConfig::partition_for(1.0, 0.3), 4);
    }

    #[test]
    fn config_validation() {
        assert!(BridgeConfig::default().validate().is_ok());
        assert!(BridgeConfig { gamma: 0.0, ..Default::default() }.validate().is_err());
        assert!(BridgeConfig { beta: 1.5, ..Default::default() }.validate().is_err());
        assert!(BridgeConfig { n_intermediate: 0, ..Default::default() }.validate().is_err());
    }
}
