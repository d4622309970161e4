//! The bridge particle filter.
//!
//! The interval is split into `n` equal sub-intervals. Particles are moved
//! forward by exact simulation and reweighted by the ratio of look-ahead
//! densities `q(y | x_{t_k})^gamma / q(y | x_{t_{k-1}})^gamma`. The final step
//! swaps the last look-ahead for the true observation density, so the weight
//! product telescopes to `p(y | x_t)` whatever `gamma` is.

use std::collections::HashMap;

use super::{
    expand_starts, log_mean_exp, map_particles, normalize_log_weights, resample, streams, BridgeConfig,
    ParticleEnsemble, Problem, SamplerOptions, SamplerOutput, WeightFn,
};
use crate::approx::{cle_moments, lna_predictive, GaussianApprox};
use crate::error::{usage, Result};
use crate::gillespie::{advance, Event, Trajectory};
use crate::linalg::{cholesky_in_place, mvn_logpdf_chol};
use crate::network::{RateConstants, ReactionNetwork, State};
use crate::observation::ObservationModel;
use crate::rng::RngStream;

/// Log look-ahead density `log q(y | x)` over a given horizon.
struct LookAhead<'a> {
    kind: WeightFn,
    net: &'a ReactionNetwork,
    c: &'a RateConstants,
    obs: &'a ObservationModel,
    y: &'a [f64],
    ps: Vec<f64>,
}

impl LookAhead<'_> {
    fn log_q(&self, x: &[i64], horizon: f64) -> Result<f64> {
        match self.kind {
            WeightFn::Cle => {
                let mut h = vec![0.0; self.net.n_reactions()];
                self.net.hazards_into(x, self.c.as_slice(), &mut h);
                let (mean, cov) = cle_moments(&self.ps, self.obs, x, &h, horizon);
                let p = mean.len();
                let mut l = cov.clone();
                if cholesky_in_place(&mut l, p) {
                    let mut scratch = vec![0.0; p];
                    Ok(mvn_logpdf_chol(self.y, &mean, &l, &mut scratch))
                } else {
                    Ok(GaussianApprox::new(mean, cov).log_density(self.y))
                }
            }
            WeightFn::Lna => {
                let state = State::from(x.to_vec());
                Ok(lna_predictive(self.net, self.c, &state, horizon, self.obs)?.log_density(self.y))
            }
        }
    }

    /// Evaluates `log q` for every particle, once per distinct state.
    fn log_q_all(&self, xs: &[Vec<i64>], horizon: f64, parallel: bool) -> Result<Vec<f64>> {
        let mut slot: HashMap<&[i64], usize> = HashMap::new();
        let mut unique: Vec<&[i64]> = Vec::new();
        let index: Vec<usize> = xs
            .iter()
            .map(|x| {
                *slot.entry(x.as_slice()).or_insert_with(|| {
                    unique.push(x.as_slice());
                    unique.len() - 1
                })
            })
            .collect();
        let values = map_particles(unique.len(), parallel, |k| self.log_q(unique[k], horizon))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(index.into_iter().map(|k| values[k]).collect())
    }
}

fn add_weight(lw: f64, inc: f64) -> f64 {
    if lw == f64::NEG_INFINITY || inc.is_nan() {
        f64::NEG_INFINITY
    } else {
        lw + inc
    }
}

/// Particle state carried between epochs.
struct Swarm {
    starts: Vec<State>,
    xs: Vec<Vec<i64>>,
    events: Vec<Vec<Event>>,
    log_q: Vec<f64>,
    log_w: Vec<f64>,
}

impl Swarm {
    fn reindex(&mut self, idx: &[usize]) {
        self.starts = idx.iter().map(|&a| self.starts[a].clone()).collect();
        self.xs = idx.iter().map(|&a| self.xs[a].clone()).collect();
        self.events = idx.iter().map(|&a| self.events[a].clone()).collect();
        self.log_q = idx.iter().map(|&a| self.log_q[a]).collect();
        self.log_w = vec![0.0; idx.len()];
    }
}

/// Runs the bridge particle filter over one interval from per-particle start
/// states (`starts` has length 1 or `n`), pre-weighted by their look-ahead
/// densities.
pub fn run_bridge_pf(
    problem: &Problem<'_>,
    starts: &[State],
    n: usize,
    cfg: &BridgeConfig,
    opts: &SamplerOptions,
    rng: &RngStream,
) -> Result<SamplerOutput> {
    problem.validate()?;
    cfg.validate()?;
    if n == 0 {
        return usage("at least one particle is required");
    }
    let Problem { net, c, obs, y, start, end } = *problem;
    let starts = expand_starts(starts, n)?;
    let look = LookAhead {
        kind: cfg.weight_fn,
        net,
        c,
        obs,
        y,
        ps: obs.project_stoichiometry(net),
    };
    let n_int = cfg.n_intermediate;
    let step = (end - start) / n_int as f64;
    let time = |k: usize| if k == n_int { end } else { start + k as f64 * step };
    let gamma = cfg.gamma;

    let xs: Vec<Vec<i64>> = starts.iter().map(|s| s.counts.clone()).collect();
    let log_q = look.log_q_all(&xs, end - start, opts.parallel)?;
    let mut swarm = Swarm {
        log_w: log_q.iter().map(|&q| gamma * q).collect(),
        starts,
        xs,
        events: vec![Vec::new(); n],
        log_q,
    };
    let mut log_z = 0.0;
    let mut ancestors = Vec::new();
    let mut final_likelihood_evals = 0;

    // Returns false when every weight has vanished.
    let mut maybe_resample = |swarm: &mut Swarm, epoch: usize, force: bool, log_z: &mut f64| -> bool {
        let w = normalize_log_weights(&swarm.log_w);
        if !force && super::ess(&w) >= cfg.beta * n as f64 {
            return true;
        }
        let lme = log_mean_exp(&swarm.log_w);
        *log_z += lme;
        if lme == f64::NEG_INFINITY {
            return false;
        }
        let mut rs = rng.substream_path(&[streams::RESAMPLE, epoch as u64]);
        let idx = resample(&w, n, opts.resampling, &mut rs);
        swarm.reindex(&idx);
        ancestors.push(idx);
        true
    };

    let mut alive = maybe_resample(&mut swarm, 0, cfg.resample_initial, &mut log_z);
    let mut k = 1;
    while alive && k <= n_int {
        let (t0, t1) = (time(k - 1), time(k));
        let moved = map_particles(n, opts.parallel, |i| -> Result<(Vec<i64>, Vec<Event>)> {
            let mut prng = rng.substream_path(&[streams::PROPAGATE, (k - 1) as u64, i as u64]);
            let mut x = swarm.xs[i].clone();
            let mut h = vec![0.0; net.n_reactions()];
            let mut evs = Vec::new();
            advance(net, c.as_slice(), &mut x, t0, t1, &mut prng, &mut h, |time, reaction| {
                if opts.keep_paths {
                    evs.push(Event { time, reaction })
                }
            })?;
            Ok((x, evs))
        });
        for (i, m) in moved.into_iter().enumerate() {
            let (x, evs) = m?;
            swarm.xs[i] = x;
            swarm.events[i].extend(evs);
        }
        if k < n_int {
            let q_new = look.log_q_all(&swarm.xs, end - t1, opts.parallel)?;
            for i in 0..n {
                let inc = gamma * (q_new[i] - swarm.log_q[i]);
                swarm.log_w[i] = add_weight(swarm.log_w[i], inc);
            }
            swarm.log_q = q_new;
            alive = maybe_resample(&mut swarm, k, false, &mut log_z);
        } else {
            let mut scratch = vec![0.0; 2 * obs.dim()];
            for i in 0..n {
                let ll = obs.loglik_counts(y, &swarm.xs[i], &mut scratch);
                if !obs.is_error_free() {
                    final_likelihood_evals += 1;
                }
                let inc = if ll == f64::NEG_INFINITY { ll } else { ll - gamma * swarm.log_q[i] };
                swarm.log_w[i] = add_weight(swarm.log_w[i], inc);
            }
            log_z += log_mean_exp(&swarm.log_w);
        }
        k += 1;
    }
    if !alive {
        swarm.log_w = vec![f64::NEG_INFINITY; n];
        log_z = f64::NEG_INFINITY;
    }

    let weights = normalize_log_weights(&swarm.log_w);
    let mut rs = rng.substream_path(&[streams::RESAMPLE, streams::FINAL]);
    let resampled = resample(&weights, n, opts.resampling, &mut rs);
    if !resampled.is_empty() {
        ancestors.push(resampled.clone());
    }
    let paths = if opts.keep_paths {
        swarm
            .starts
            .iter()
            .zip(swarm.events)
            .map(|(x0, events)| Trajectory { x0: x0.clone(), t_start: start, t_end: end, events })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SamplerOutput {
        ensemble: ParticleEnsemble {
            states: swarm.xs.into_iter().map(State::from).collect(),
            paths,
            log_weights: swarm.log_w,
            ancestors,
            resampled,
        },
        log_z,
        final_likelihood_evals,
    })
}

/// Bridge particle filter from a fixed initial state.
pub fn bridge_pf(
    problem: &Problem<'_>,
    x0: &State,
    n: usize,
    cfg: &BridgeConfig,
    rng: &RngStream,
) -> Result<SamplerOutput> {
    run_bridge_pf(problem, std::slice::from_ref(x0), n, cfg, &SamplerOptions::default(), rng)
}
