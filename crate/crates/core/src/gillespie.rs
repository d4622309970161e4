//! Exact forward simulation (Gillespie's direct method) and the
//! complete-data log-likelihood of an event path.

use std::io::{self, Write};

use crate::error::{usage, Error, Result};
use crate::network::{apply_reaction_in_place, total_hazard, RateConstants, ReactionNetwork, State};
use crate::rng::RngStream;

/// One reaction event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub reaction: usize,
}

/// A jump-process path on `(t_start, t_end]`: the initial state plus the
/// ordered reaction events. States are reconstructed on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub x0: State,
    pub t_start: f64,
    pub t_end: f64,
    pub events: Vec<Event>,
}

impl Trajectory {
    /// An event-free path held at `x0`.
    pub fn constant(x0: State, t_start: f64, t_end: f64) -> Self {
        Self {
            x0,
            t_start,
            t_end,
            events: Vec::new(),
        }
    }

    /// Checks time ordering and that replay never goes negative.
    pub fn validate(&self, net: &ReactionNetwork) -> Result<()> {
        if self.x0.len() != net.n_species() {
            return usage("trajectory state dimension does not match network");
        }
        let mut prev = self.t_start;
        let mut x = self.x0.counts.clone();
        for ev in &self.events {
            if !(ev.time > prev && ev.time <= self.t_end) {
                return Err(Error::Invariant(format!(
                    "event times must increase strictly within (t_start, t_end]; got {} after {prev}",
                    ev.time
                )));
            }
            if ev.reaction >= net.n_reactions() {
                return usage(format!("event reaction index {} out of range", ev.reaction));
            }
            apply_reaction_in_place(net, &mut x, ev.reaction)?;
            prev = ev.time;
        }
        Ok(())
    }

    pub fn final_state(&self, net: &ReactionNetwork) -> Result<State> {
        self.state_at(net, self.t_end)
    }

    /// State after all events with time `<= s`.
    pub fn state_at(&self, net: &ReactionNetwork, s: f64) -> Result<State> {
        if !(s >= self.t_start && s <= self.t_end) {
            return usage(format!(
                "time {s} outside trajectory range [{}, {}]",
                self.t_start, self.t_end
            ));
        }
        let mut x = self.x0.counts.clone();
        for ev in self.events.iter().take_while(|e| e.time <= s) {
            apply_reaction_in_place(net, &mut x, ev.reaction)?;
        }
        Ok(State::from(x))
    }

    /// Writes `time,reaction_index` rows (reaction indices are 1-based).
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "time,reaction_index")?;
        for ev in &self.events {
            writeln!(w, "{},{}", ev.time, ev.reaction + 1)?;
        }
        Ok(())
    }

    /// Writes the piecewise-constant species path: the initial state, then one
    /// row per event, then a closing row at `t_end`.
    pub fn write_states_csv<W: Write>(&self, net: &ReactionNetwork, mut w: W) -> io::Result<()> {
        write!(w, "time")?;
        for s in net.species() {
            write!(w, ",{s}")?;
        }
        writeln!(w)?;
        let mut x = self.x0.counts.clone();
        let row = |w: &mut W, t: f64, x: &[i64]| -> io::Result<()> {
            write!(w, "{t}")?;
            for n in x {
                write!(w, ",{n}")?;
            }
            writeln!(w)
        };
        row(&mut w, self.t_start, &x)?;
        for ev in &self.events {
            apply_reaction_in_place(net, &mut x, ev.reaction)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))?;
            row(&mut w, ev.time, &x)?;
        }
        row(&mut w, self.t_end, &x)
    }
}

/// Runs the direct method from `x` (modified in place) over `(t_start, t_end]`,
/// calling `on_event` for each accepted event. The event that would overshoot
/// `t_end` is discarded. Returns the number of events.
pub fn advance(
    net: &ReactionNetwork,
    c: &[f64],
    x: &mut [i64],
    t_start: f64,
    t_end: f64,
    rng: &mut RngStream,
    hazards: &mut [f64],
    mut on_event: impl FnMut(f64, usize),
) -> Result<usize> {
    let mut t = t_start;
    let mut n = 0;
    loop {
        net.hazards_into(x, c, hazards);
        let h0 = total_hazard(hazards);
        if !(h0 > 0.0) {
            if h0.is_nan() {
                return Err(Error::Numerical("non-finite total hazard".into()));
            }
            return Ok(n);
        }
        if !h0.is_finite() {
            return Err(Error::Numerical("infinite total hazard".into()));
        }
        t += rng.exponential(h0);
        if t > t_end {
            return Ok(n);
        }
        let j = rng.categorical(hazards, h0);
        apply_reaction_in_place(net, x, j)?;
        on_event(t, j);
        n += 1;
    }
}

/// Simulates a path from `x0` (at time `x0_time`) to `t_end`.
pub fn simulate(
    net: &ReactionNetwork,
    c: &RateConstants,
    x0: &State,
    x0_time: f64,
    t_end: f64,
    rng: &mut RngStream,
) -> Result<Trajectory> {
    if !(t_end > x0_time) {
        return usage(format!("t_end {t_end} must exceed the start time {x0_time}"));
    }
    if x0.len() != net.n_species() || c.len() != net.n_reactions() {
        return usage("state or rate dimensions do not match network");
    }
    let mut x = x0.counts.clone();
    let mut hazards = vec![0.0; net.n_reactions()];
    let mut events = Vec::new();
    advance(net, c.as_slice(), &mut x, x0_time, t_end, rng, &mut hazards, |time, reaction| {
        events.push(Event { time, reaction })
    })?;
    Ok(Trajectory {
        x0: x0.clone(),
        t_start: x0_time,
        t_end,
        events,
    })
}

/// Log complete-data likelihood: the sum of log-hazards of each event at its
/// pre-event state, minus the integrated total hazard over the interval.
/// Returns `-inf` for paths that are impossible under `c`.
pub fn complete_data_loglik(net: &ReactionNetwork, c: &RateConstants, traj: &Trajectory) -> Result<f64> {
    traj.validate(net)?;
    let mut x = traj.x0.counts.clone();
    let mut h = vec![0.0; net.n_reactions()];
    let mut prev = traj.t_start;
    let mut ll = 0.0;
    for ev in &traj.events {
        net.hazards_into(&x, c.as_slice(), &mut h);
        if h[ev.reaction] <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        ll += h[ev.reaction].ln() - total_hazard(&h) * (ev.time - prev);
        apply_reaction_in_place(net, &mut x, ev.reaction)?;
        prev = ev.time;
    }
    net.hazards_into(&x, c.as_slice(), &mut h);
    ll -= total_hazard(&h) * (traj.t_end - prev);
    Ok(ll)
}
