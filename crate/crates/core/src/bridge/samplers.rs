//! Myopic and conditioned-hazard importance samplers.

use super::conditioned::{propose_path, ConditionedHazard};
use super::{
    expand_starts, log_mean_exp, map_particles, normalize_log_weights, resample, streams,
    ParticleEnsemble, Problem, SamplerOptions, SamplerOutput,
};
use crate::error::{usage, Result};
use crate::gillespie::{advance, Event, Trajectory};
use crate::network::State;
use crate::rng::RngStream;

struct Particle {
    end: State,
    path: Option<Trajectory>,
    log_weight: f64,
}

fn finish(
    problem: &Problem<'_>,
    particles: Vec<Particle>,
    n: usize,
    opts: &SamplerOptions,
    rng: &RngStream,
) -> SamplerOutput {
    let log_weights: Vec<f64> = particles.iter().map(|p| p.log_weight).collect();
    let log_z = log_mean_exp(&log_weights);
    let weights = normalize_log_weights(&log_weights);
    let mut rs = rng.substream_path(&[streams::RESAMPLE, streams::FINAL]);
    let resampled = resample(&weights, n, opts.resampling, &mut rs);
    let mut states = Vec::with_capacity(n);
    let mut paths = Vec::new();
    for p in particles {
        states.push(p.end);
        if let Some(path) = p.path {
            paths.push(path);
        }
    }
    let final_likelihood_evals = if problem.obs.is_error_free() { 0 } else { n };
    SamplerOutput {
        ensemble: ParticleEnsemble {
            states,
            paths,
            log_weights,
            ancestors: vec![resampled.clone()],
            resampled,
        },
        log_z,
        final_likelihood_evals,
    }
}

/// Myopic importance sampling from per-particle start states (`starts` has
/// length 1 or `n`).
pub fn run_myopic_is(
    problem: &Problem<'_>,
    starts: &[State],
    n: usize,
    opts: &SamplerOptions,
    rng: &RngStream,
) -> Result<SamplerOutput> {
    problem.validate()?;
    if n == 0 {
        return usage("at least one particle is required");
    }
    let starts = expand_starts(starts, n)?;
    let Problem { net, c, obs, y, start, end } = *problem;
    let particles = map_particles(n, opts.parallel, |i| -> Result<Particle> {
        let mut prng = rng.substream_path(&[streams::PROPAGATE, 0, i as u64]);
        let mut x = starts[i].counts.clone();
        let mut h = vec![0.0; net.n_reactions()];
        let mut events = Vec::new();
        let keep = opts.keep_paths;
        advance(net, c.as_slice(), &mut x, start, end, &mut prng, &mut h, |time, reaction| {
            if keep {
                events.push(Event { time, reaction })
            }
        })?;
        let mut scratch = vec![0.0; 2 * obs.dim()];
        let log_weight = obs.loglik_counts(y, &x, &mut scratch);
        Ok(Particle {
            path: keep.then(|| Trajectory { x0: starts[i].clone(), t_start: start, t_end: end, events }),
            end: State::from(x),
            log_weight,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(finish(problem, particles, n, opts, rng))
}

/// Conditioned-hazard importance sampling from per-particle start states.
pub fn run_conditioned_is(
    problem: &Problem<'_>,
    starts: &[State],
    n: usize,
    opts: &SamplerOptions,
    rng: &RngStream,
) -> Result<SamplerOutput> {
    problem.validate()?;
    if n == 0 {
        return usage("at least one particle is required");
    }
    let starts = expand_starts(starts, n)?;
    let Problem { net, c, obs, y, start, end } = *problem;
    let particles = map_particles(n, opts.parallel, |i| -> Result<Particle> {
        let mut prng = rng.substream_path(&[streams::PROPAGATE, 0, i as u64]);
        let mut ch = ConditionedHazard::new(net, c, obs, y).with_floor(opts.ch_floor);
        let v = net.n_reactions();
        let (mut h, mut hs) = (vec![0.0; v], vec![0.0; v]);
        let mut x = starts[i].counts.clone();
        let mut events = Vec::new();
        let keep = opts.keep_paths;
        let ratio = propose_path(&mut ch, &mut x, start, end, &mut prng, &mut h, &mut hs, |time, reaction| {
            if keep {
                events.push(Event { time, reaction })
            }
        })?;
        let mut scratch = vec![0.0; 2 * obs.dim()];
        let ll = obs.loglik_counts(y, &x, &mut scratch);
        let log_weight = if ll == f64::NEG_INFINITY { ll } else { ll + ratio };
        Ok(Particle {
            path: keep.then(|| Trajectory { x0: starts[i].clone(), t_start: start, t_end: end, events }),
            end: State::from(x),
            log_weight,
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    Ok(finish(problem, particles, n, opts, rng))
}

/// Myopic importance sampling from a fixed initial state.
pub fn myopic_is(problem: &Problem<'_>, x0: &State, n: usize, rng: &RngStream) -> Result<SamplerOutput> {
    run_myopic_is(problem, std::slice::from_ref(x0), n, &SamplerOptions::default(), rng)
}

/// Conditioned-hazard importance sampling from a fixed initial state.
pub fn conditioned_is(problem: &Problem<'_>, x0: &State, n: usize, rng: &RngStream) -> Result<SamplerOutput> {
    run_conditioned_is(problem, std::slice::from_ref(x0), n, &SamplerOptions::default(), rng)
}
