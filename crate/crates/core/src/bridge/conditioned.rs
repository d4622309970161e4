//! The conditioned hazard and the importance sampler built on it.
//!
//! Given the current state `x_s` and the time `ds = t - s` left until the
//! observation, the number of reactions over `(s, t]` is approximated as
//! Gaussian with mean and variance `h ds`. Conditioning that approximation
//! on `y_t` gives
//!
//! ```text
//! h* = h + H S'P (P'S H S'P ds + Sigma)^{-1} (y_t - P'[x_s + S h ds])
//! ```
//!
//! truncated at zero componentwise. Paths are proposed with `h*` held fixed
//! between events and recomputed after each one.

use crate::error::{usage, Error, Result};
use crate::gillespie::{Event, Trajectory};
use crate::linalg::{cholesky_in_place, cholesky_solve};
use crate::network::{apply_reaction_in_place, total_hazard, RateConstants, ReactionNetwork, State};
use crate::observation::ObservationModel;
use crate::rng::RngStream;

/// Reusable workspace for evaluating `h*` repeatedly against one observation.
#[derive(Debug, Clone)]
pub struct ConditionedHazard<'a> {
    net: &'a ReactionNetwork,
    c: &'a [f64],
    obs: &'a ObservationModel,
    y: &'a [f64],
    /// `P'S`, p×v.
    ps: Vec<f64>,
    m: Vec<f64>,
    r: Vec<f64>,
    floor: f64,
    /// Steps where the p×p system was singular and `h* = h` was used.
    pub fallbacks: usize,
}

impl<'a> ConditionedHazard<'a> {
    pub fn new(net: &'a ReactionNetwork, c: &'a RateConstants, obs: &'a ObservationModel, y: &'a [f64]) -> Self {
        let p = obs.dim();
        Self {
            net,
            c: c.as_slice(),
            obs,
            y,
            ps: obs.project_stoichiometry(net),
            m: vec![0.0; p * p],
            r: vec![0.0; p],
            floor: 0.0,
            fallbacks: 0,
        }
    }

    /// Bounds each component below by `frac * h` instead of zero. Any
    /// positive fraction keeps every reaction possible under the proposal.
    pub fn with_floor(mut self, frac: f64) -> Self {
        self.floor = frac.max(0.0);
        self
    }

    /// Fills `h` with the hazards at `x` and `hs` with the truncated
    /// conditioned hazards for a remaining horizon `ds`.
    pub fn eval(&mut self, x: &[i64], ds: f64, h: &mut [f64], hs: &mut [f64]) {
        let net = self.net;
        let p = self.obs.dim();
        let v = net.n_reactions();
        net.hazards_into(x, self.c, h);
        // residual r = y - P'(x + S h ds)
        self.obs.project_counts(x, &mut self.r);
        for a in 0..p {
            let drift: f64 = (0..v).map(|i| self.ps[a * v + i] * h[i]).sum();
            self.r[a] = self.y[a] - self.r[a] - drift * ds;
        }
        // M = P'S H S'P ds + Sigma
        let sigma = self.obs.sigma();
        for a in 0..p {
            for b in 0..=a {
                let s: f64 = (0..v).map(|i| self.ps[a * v + i] * h[i] * self.ps[b * v + i]).sum();
                let val = s * ds + sigma[a * p + b];
                self.m[a * p + b] = val;
                self.m[b * p + a] = val;
            }
        }
        if !cholesky_in_place(&mut self.m, p) {
            self.fallbacks += 1;
            hs.copy_from_slice(h);
            return;
        }
        cholesky_solve(&self.m, p, &mut self.r);
        for i in 0..v {
            let gain: f64 = (0..p).map(|a| self.ps[a * v + i] * self.r[a]).sum();
            hs[i] = (h[i] * (1.0 + gain)).max(self.floor * h[i]);
        }
    }
}

/// `h*(x_s, c | y_t)` for a remaining horizon `ds`.
pub fn conditioned_hazard(
    net: &ReactionNetwork,
    c: &RateConstants,
    x: &State,
    y: &[f64],
    ds: f64,
    obs: &ObservationModel,
) -> Result<Vec<f64>> {
    if !(ds > 0.0) {
        return usage("conditioned hazard needs a positive remaining horizon");
    }
    if x.len() != net.n_species() || c.len() != net.n_reactions() {
        return usage("state or rate dimensions do not match network");
    }
    obs.check_observation(y)?;
    let mut ch = ConditionedHazard::new(net, c, obs, y);
    let v = net.n_reactions();
    let (mut h, mut hs) = (vec![0.0; v], vec![0.0; v]);
    ch.eval(&x.counts, ds, &mut h, &mut hs);
    Ok(hs)
}

/// Proposes a path from `x` (modified in place) over `(start, end]` with the
/// conditioned hazard, returning `log pi(path) - log q(path)`.
pub(crate) fn propose_path(
    ch: &mut ConditionedHazard<'_>,
    x: &mut [i64],
    start: f64,
    end: f64,
    rng: &mut RngStream,
    h: &mut [f64],
    hs: &mut [f64],
    mut on_event: impl FnMut(f64, usize),
) -> Result<f64> {
    let net = ch.net;
    let mut s = start;
    let mut log_ratio = 0.0;
    loop {
        ch.eval(x, end - s, h, hs);
        let h0 = total_hazard(h);
        let hs0 = total_hazard(hs);
        if !hs0.is_finite() || !h0.is_finite() {
            return Err(Error::Numerical("non-finite conditioned hazard".into()));
        }
        let tau = if hs0 > 0.0 { rng.exponential(hs0) } else { f64::INFINITY };
        if s + tau > end {
            log_ratio -= (h0 - hs0) * (end - s);
            return Ok(log_ratio);
        }
        let j = rng.categorical(hs, hs0);
        log_ratio += h[j].ln() - hs[j].ln() - (h0 - hs0) * tau;
        apply_reaction_in_place(net, x, j)?;
        s += tau;
        on_event(s, j);
    }
}

/// Draws a path on `(t_start, t_end]` from the conditioned-hazard proposal.
pub fn sample_conditioned_path(
    net: &ReactionNetwork,
    c: &RateConstants,
    x0: &State,
    y: &[f64],
    t_start: f64,
    t_end: f64,
    obs: &ObservationModel,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if !(t_end > t_start) {
        return usage("t_end must exceed t_start");
    }
    if x0.len() != net.n_species() || c.len() != net.n_reactions() {
        return usage("state or rate dimensions do not match network");
    }
    obs.check_observation(y)?;
    let mut ch = ConditionedHazard::new(net, c, obs, y);
    let v = net.n_reactions();
    let (mut h, mut hs) = (vec![0.0; v], vec![0.0; v]);
    let mut x = x0.counts.clone();
    let mut events = Vec::new();
    propose_path(&mut ch, &mut x, t_start, t_end, rng, &mut h, &mut hs, |time, reaction| {
        events.push(Event { time, reaction })
    })?;
    Ok(Trajectory {
        x0: x0.clone(),
        t_start,
        t_end,
        events,
    })
}

/// Importance log-weight of a path proposed by [`sample_conditioned_path`]:
/// `log p(y|x_t) + sum log(h/h*) - integral (h_0 - h*_0)`, recomputing `h*`
/// exactly as the proposal did.
pub fn conditioned_is_logweight(
    net: &ReactionNetwork,
    c: &RateConstants,
    traj: &Trajectory,
    y: &[f64],
    obs: &ObservationModel,
) -> Result<f64> {
    traj.validate(net)?;
    obs.check_observation(y)?;
    let mut ch = ConditionedHazard::new(net, c, obs, y);
    let v = net.n_reactions();
    let (mut h, mut hs) = (vec![0.0; v], vec![0.0; v]);
    let mut x = traj.x0.counts.clone();
    let mut s = traj.t_start;
    let mut lw = 0.0;
    for ev in &traj.events {
        ch.eval(&x, traj.t_end - s, &mut h, &mut hs);
        if hs[ev.reaction] <= 0.0 {
            return Err(Error::Invariant(format!(
                "event at t = {} has zero proposal hazard",
                ev.time
            )));
        }
        lw += h[ev.reaction].ln() - hs[ev.reaction].ln()
            - (total_hazard(&h) - total_hazard(&hs)) * (ev.time - s);
        apply_reaction_in_place(net, &mut x, ev.reaction)?;
        s = ev.time;
    }
    ch.eval(&x, traj.t_end - s, &mut h, &mut hs);
    lw -= (total_hazard(&h) - total_hazard(&hs)) * (traj.t_end - s);
    let mut scratch = vec![0.0; 2 * obs.dim()];
    Ok(lw + obs.loglik_counts(y, &x, &mut scratch))
}
