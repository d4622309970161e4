//! Exact transition probabilities for single-species networks by
//! uniformisation on a truncated state space `{0, ..., cap}`.
//!
//! Jumps above the cap are dropped, so the truncated generator is
//! sub-stochastic and any probability that leaves the box is reported as
//! lost mass. Callers double the cap until the loss is negligible.

use crate::error::{usage, Error, Result};
use crate::inference::ObservationSeries;
use crate::network::{RateConstants, ReactionNetwork, State};

pub const DEFAULT_CAP: usize = 1000;
const MAX_CAP: usize = 1 << 17;
const LOST_MASS_TOL: f64 = 1e-10;

/// A truncated generator for a one-species network.
#[derive(Debug, Clone)]
pub struct TruncatedCtmc {
    cap: usize,
    /// Outgoing jumps `(target, rate)` that stay inside the box, per state.
    jumps: Vec<Vec<(usize, f64)>>,
    /// Total exit rate per state, including jumps that leave the box.
    exit: Vec<f64>,
}

impl TruncatedCtmc {
    pub fn new(net: &ReactionNetwork, c: &RateConstants, cap: usize) -> Result<Self> {
        if net.n_species() != 1 {
            return usage("exact CTMC oracles are only available for single-species networks");
        }
        if c.len() != net.n_reactions() {
            return usage("rate constants do not match network");
        }
        let mut h = vec![0.0; net.n_reactions()];
        let mut jumps = Vec::with_capacity(cap + 1);
        let mut exit = Vec::with_capacity(cap + 1);
        for x in 0..=cap {
            net.hazards_into(&[x as i64], c.as_slice(), &mut h);
            let mut out = Vec::new();
            let mut total = 0.0;
            for (i, &hi) in h.iter().enumerate() {
                let d = net.stoich(0, i);
                if hi <= 0.0 || d == 0 {
                    continue;
                }
                total += hi;
                let y = x as i64 + d;
                if y >= 0 && y as usize <= cap {
                    out.push((y as usize, hi));
                }
            }
            jumps.push(out);
            exit.push(total);
        }
        Ok(Self { cap, jumps, exit })
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    /// Dense (cap+1)×(cap+1) generator, row-major. Intended for small caps.
    pub fn generator(&self) -> Vec<f64> {
        let n = self.cap + 1;
        let mut q = vec![0.0; n * n];
        for x in 0..n {
            q[x * n + x] -= self.exit[x];
            for &(y, r) in &self.jumps[x] {
                q[x * n + y] += r;
            }
        }
        q
    }

    /// Row vector `p0 * exp(Q t)`.
    pub fn propagate(&self, p0: &[f64], t: f64) -> Vec<f64> {
        let n = self.cap + 1;
        assert_eq!(p0.len(), n);
        let lambda = self.exit.iter().cloned().fold(0.0, f64::max);
        if t == 0.0 || lambda == 0.0 {
            return p0.to_vec();
        }
        let lt = lambda * t;
        let mut v = p0.to_vec();
        let mut next = vec![0.0; n];
        let mut out = vec![0.0; n];
        let mut log_w = -lt;
        let mut cum = 0.0;
        let mut k = 0usize;
        loop {
            let w = log_w.exp();
            if w > 0.0 {
                for (o, vi) in out.iter_mut().zip(&v) {
                    *o += w * vi;
                }
                cum += w;
            }
            if (k as f64) > lt && (cum >= 1.0 - 1e-15 || w < 1e-300) {
                break;
            }
            // v <- v (I + Q / lambda)
            for (x, nx) in next.iter_mut().enumerate() {
                *nx = v[x] * (1.0 - self.exit[x] / lambda);
            }
            for x in 0..n {
                if v[x] != 0.0 {
                    for &(y, r) in &self.jumps[x] {
                        next[y] += v[x] * r / lambda;
                    }
                }
            }
            std::mem::swap(&mut v, &mut next);
            k += 1;
            log_w += lt.ln() - (k as f64).ln();
        }
        for o in out.iter_mut() {
            *o = o.clamp(0.0, 1.0);
        }
        out
    }
}

/// Distribution of `X_t | X_0 = x0` on `{0, ..., cap'}` where `cap'` is the
/// smallest doubling of `cap` that loses less than 1e-10 probability mass.
pub fn transition_distribution(
    net: &ReactionNetwork,
    c: &RateConstants,
    x0: i64,
    t: f64,
    cap: usize,
) -> Result<Vec<f64>> {
    if x0 < 0 {
        return usage("initial count must be non-negative");
    }
    if !(t >= 0.0) {
        return usage("time must be non-negative");
    }
    let mut cap = cap.max(x0 as usize + 1);
    loop {
        let ctmc = TruncatedCtmc::new(net, c, cap)?;
        let mut p0 = vec![0.0; cap + 1];
        p0[x0 as usize] = 1.0;
        let p = ctmc.propagate(&p0, t);
        let lost = 1.0 - p.iter().sum::<f64>();
        if lost < LOST_MASS_TOL {
            return Ok(p);
        }
        if cap >= MAX_CAP {
            return Err(Error::Truncation { cap, lost_mass: lost });
        }
        cap *= 2;
    }
}

/// `P(X_t = xt | X_0 = x0)` for a single-species network.
pub fn ctmc_transition(
    net: &ReactionNetwork,
    c: &RateConstants,
    x0: &State,
    xt: &State,
    t: f64,
    cap: usize,
) -> Result<f64> {
    if x0.len() != 1 || xt.len() != 1 {
        return usage("exact CTMC oracles are only available for single-species networks");
    }
    let p = transition_distribution(net, c, x0.counts[0], t, cap)?;
    Ok(p.get(xt.counts[0] as usize).copied().unwrap_or(0.0))
}

/// Smallest `x` with `P(X <= x) >= q`.
pub fn quantile(dist: &[f64], q: f64) -> usize {
    let mut acc = 0.0;
    for (x, p) in dist.iter().enumerate() {
        acc += p;
        if acc >= q {
            return x;
        }
    }
    dist.len() - 1
}

/// Exact log marginal likelihood of an observation series for a
/// single-species network with known initial state, by the forward algorithm
/// on the truncated chain. The cap doubles while the filtered distribution
/// leaks more than 1e-10 of its mass out of the box in any interval.
pub fn hmm_loglik(
    net: &ReactionNetwork,
    c: &RateConstants,
    x0: &State,
    series: &ObservationSeries,
    cap: usize,
) -> Result<f64> {
    let mut cap = cap.max(x0.counts.first().map_or(0, |&v| v.max(0) as usize) + 1);
    loop {
        let (ll, lost) = hmm_loglik_fixed_cap(net, c, x0, series, cap)?;
        if lost <= LOST_MASS_TOL {
            return Ok(ll);
        }
        if cap >= MAX_CAP {
            return Err(Error::Truncation { cap, lost_mass: lost });
        }
        cap *= 2;
    }
}

/// Forward algorithm on the chain absorbed above `cap`. Returns the log
/// likelihood of the truncated chain and the largest predictive mass leaked
/// in one interval, which bounds the truncation error.
pub fn hmm_loglik_fixed_cap(
    net: &ReactionNetwork,
    c: &RateConstants,
    x0: &State,
    series: &ObservationSeries,
    cap: usize,
) -> Result<(f64, f64)> {
    if x0.len() != 1 {
        return usage("exact HMM oracle is only available for single-species networks");
    }
    let obs = &series.obs;
    let x0 = x0.counts[0];
    if x0 < 0 || x0 as usize > cap {
        return usage("initial count lies outside the truncation box");
    }
    let ctmc = TruncatedCtmc::new(net, c, cap)?;
    let mut scratch = vec![0.0; 2 * obs.dim()];
    let mut ll = obs.loglik_counts(&series.ys[0], &[x0], &mut scratch);
    if ll == f64::NEG_INFINITY {
        return Ok((ll, 0.0));
    }
    let mut alpha = vec![0.0; cap + 1];
    alpha[x0 as usize] = 1.0;
    let mut max_lost = 0.0f64;
    for k in 1..series.len() {
        let pred = ctmc.propagate(&alpha, series.times[k] - series.times[k - 1]);
        max_lost = max_lost.max(1.0 - pred.iter().sum::<f64>());
        let mut total = 0.0;
        for (x, a) in alpha.iter_mut().enumerate() {
            *a = pred[x] * obs.loglik_counts(&series.ys[k], &[x as i64], &mut scratch).exp();
            total += *a;
        }
        if !(total > 0.0) {
            return Ok((f64::NEG_INFINITY, max_lost));
        }
        ll += total.ln();
        alpha.iter_mut().for_each(|a| *a /= total);
    }
    Ok((ll, max_lost))
}
