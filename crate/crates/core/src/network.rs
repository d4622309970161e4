//! Reaction networks with mass-action kinetics.
//!
//! A network with `u` species and `v` reactions is described by its
//! reactant (`pre`, v×u) and product (`post`, v×u) stoichiometries. The
//! stoichiometry matrix `S` (u×v) has column `j` equal to the net change in
//! species counts when reaction `j` fires.
//!
//! Hazards follow the stochastic mass-action law
//! `h_i(x, c) = c_i * prod_j binom(x_j, pre_ij)`.

use crate::error::{usage, Error, Result};

/// A reaction network: species, reactant and product stoichiometries.
#[derive(Debug, Clone, PartialEq)]
pub struct ReactionNetwork {
    species: Vec<String>,
    reaction_names: Vec<String>,
    pre: Vec<Vec<u32>>,
    post: Vec<Vec<u32>>,
    /// Net effect of each reaction, indexed `[reaction][species]`.
    net_effect: Vec<Vec<i64>>,
    /// Sparse reactant lists `(species, order)` used by the hazard loop.
    reactants: Vec<Vec<(usize, u32)>>,
}

impl ReactionNetwork {
    /// Builds a network from v×u `pre` and `post` matrices.
    pub fn new(
        species: Vec<String>,
        reaction_names: Vec<String>,
        pre: Vec<Vec<u32>>,
        post: Vec<Vec<u32>>,
    ) -> Result<Self> {
        let u = species.len();
        let v = pre.len();
        if u == 0 || v == 0 {
            return usage("a network needs at least one species and one reaction");
        }
        if post.len() != v || reaction_names.len() != v {
            return usage(format!(
                "pre has {v} reactions but post has {} and names has {}",
                post.len(),
                reaction_names.len()
            ));
        }
        for (i, (p, q)) in pre.iter().zip(&post).enumerate() {
            if p.len() != u || q.len() != u {
                return usage(format!("reaction {i}: stoichiometry rows must have {u} entries"));
            }
        }
        let net_effect = pre
            .iter()
            .zip(&post)
            .map(|(p, q)| p.iter().zip(q).map(|(&a, &b)| b as i64 - a as i64).collect())
            .collect();
        let mut net = Self {
            species,
            reaction_names,
            pre,
            post,
            net_effect,
            reactants: Vec::new(),
        };
        net.index_reactants();
        Ok(net)
    }

    fn index_reactants(&mut self) {
        self.reactants = self
            .pre
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &k)| k > 0)
                    .map(|(j, &k)| (j, k))
                    .collect()
            })
            .collect();
    }

    pub fn n_species(&self) -> usize {
        self.species.len()
    }

    pub fn n_reactions(&self) -> usize {
        self.pre.len()
    }

    pub fn species(&self) -> &[String] {
        &self.species
    }

    pub fn reaction_names(&self) -> &[String] {
        &self.reaction_names
    }

    pub fn pre(&self) -> &[Vec<u32>] {
        &self.pre
    }

    pub fn post(&self) -> &[Vec<u32>] {
        &self.post
    }

    /// Net change in species counts caused by reaction `j` (column `j` of S).
    pub fn net_effect(&self, j: usize) -> &[i64] {
        &self.net_effect[j]
    }

    /// Stoichiometry entry `S[species][reaction]`.
    #[inline]
    pub fn stoich(&self, species: usize, reaction: usize) -> i64 {
        self.net_effect[reaction][species]
    }

    /// The u×v stoichiometry matrix as nested rows.
    pub fn stoichiometry_matrix(&self) -> Vec<Vec<i64>> {
        (0..self.n_species())
            .map(|j| (0..self.n_reactions()).map(|i| self.stoich(j, i)).collect())
            .collect()
    }

    /// `(species, order)` pairs consumed by reaction `i`.
    pub fn reactants(&self, i: usize) -> &[(usize, u32)] {
        &self.reactants[i]
    }

    pub fn species_index(&self, name: &str) -> Option<usize> {
        self.species.iter().position(|s| s == name)
    }

    /// Writes mass-action hazards for `x` into `out` (length v).
    ///
    /// Dimensions are not checked; use [`evaluate_hazards`] at API boundaries.
    #[inline]
    pub fn hazards_into(&self, x: &[i64], c: &[f64], out: &mut [f64]) {
        for (i, h) in out.iter_mut().enumerate() {
            let mut acc = c[i];
            for &(j, k) in &self.reactants[i] {
                acc *= binomial(x[j], k);
                if acc == 0.0 {
                    break;
                }
            }
            *h = acc;
        }
    }

    /// Hazards extended to real-valued states: binomial products become
    /// falling-factorial polynomials `z (z-1) ... (z-k+1) / k!`, clamped at 0.
    pub fn real_hazards_into(&self, z: &[f64], c: &[f64], out: &mut [f64]) {
        for (i, h) in out.iter_mut().enumerate() {
            let mut acc = c[i];
            for &(j, k) in &self.reactants[i] {
                acc *= falling_binomial(z[j], k);
            }
            *h = acc.max(0.0);
        }
    }

    /// Jacobian of [`Self::real_hazards_into`]: `jac[i*u + j] = d h_i / d z_j`.
    /// Rows of clamped hazards are zero.
    pub fn real_hazard_jacobian_into(&self, z: &[f64], c: &[f64], jac: &mut [f64]) {
        let u = self.n_species();
        jac.iter_mut().for_each(|v| *v = 0.0);
        for i in 0..self.n_reactions() {
            let reac = &self.reactants[i];
            let value: f64 = c[i] * reac.iter().map(|&(j, k)| falling_binomial(z[j], k)).product::<f64>();
            if value < 0.0 {
                continue;
            }
            for (a, &(j, k)) in reac.iter().enumerate() {
                let mut d = c[i] * d_falling_binomial(z[j], k);
                for (b, &(jj, kk)) in reac.iter().enumerate() {
                    if a != b {
                        d *= falling_binomial(z[jj], kk);
                    }
                }
                jac[i * u + j] = d;
            }
        }
    }
}

/// `binom(n, k)` as a real; zero when `n < k`.
#[inline]
pub fn binomial(n: i64, k: u32) -> f64 {
    match k {
        0 => 1.0,
        1 => n.max(0) as f64,
        2 => {
            if n < 2 {
                0.0
            } else {
                (n as f64) * ((n - 1) as f64) * 0.5
            }
        }
        _ => {
            if n < k as i64 {
                return 0.0;
            }
            let mut acc = 1.0;
            for m in 0..k as i64 {
                acc *= (n - m) as f64 / (m + 1) as f64;
            }
            acc
        }
    }
}

fn falling_binomial(z: f64, k: u32) -> f64 {
    let mut acc = 1.0;
    for m in 0..k {
        acc *= (z - m as f64) / (m + 1) as f64;
    }
    acc
}

fn d_falling_binomial(z: f64, k: u32) -> f64 {
    // product rule over the k linear factors
    let mut total = 0.0;
    for skip in 0..k {
        let mut acc = 1.0 / (skip + 1) as f64;
        for m in 0..k {
            if m != skip {
                acc *= (z - m as f64) / (m + 1) as f64;
            }
        }
        total += acc;
    }
    total
}

/// A system state: molecule counts at a time point.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct State {
    pub counts: Vec<i64>,
}

impl State {
    pub fn new(counts: Vec<i64>) -> Result<Self> {
        if let Some(j) = counts.iter().position(|&n| n < 0) {
            return usage(format!("species {j} has negative count {}", counts[j]));
        }
        Ok(Self { counts })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl From<Vec<i64>> for State {
    fn from(counts: Vec<i64>) -> Self {
        Self { counts }
    }
}

/// Strictly positive per-reaction rate constants.
#[derive(Debug, Clone, PartialEq)]
pub struct RateConstants(Vec<f64>);

impl RateConstants {
    /// Validates that every rate is finite and strictly positive.
    pub fn new(c: Vec<f64>) -> Result<Self> {
        if let Some(i) = c.iter().position(|r| !(r.is_finite() && *r > 0.0)) {
            return usage(format!("rate constant {i} must be finite and > 0, got {}", c[i]));
        }
        Ok(Self(c))
    }

    /// Allows zero rates (switched-off reactions), used for degenerate test
    /// models such as a pure-death process written as a birth-death network.
    pub fn with_zeros(c: Vec<f64>) -> Result<Self> {
        if let Some(i) = c.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
            return usage(format!("rate constant {i} must be finite and >= 0, got {}", c[i]));
        }
        Ok(Self(c))
    }

    pub fn from_log(theta: &[f64]) -> Result<Self> {
        Self::new(theta.iter().map(|t| t.exp()).collect())
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_dims(net: &ReactionNetwork, x: &State, c: &RateConstants) -> Result<()> {
    if x.len() != net.n_species() {
        return usage(format!("state has {} species, network has {}", x.len(), net.n_species()));
    }
    if c.len() != net.n_reactions() {
        return usage(format!("{} rate constants for {} reactions", c.len(), net.n_reactions()));
    }
    Ok(())
}

/// Mass-action hazards `h_i(x, c)` for every reaction.
pub fn evaluate_hazards(net: &ReactionNetwork, x: &State, c: &RateConstants) -> Result<Vec<f64>> {
    check_dims(net, x, c)?;
    let mut h = vec![0.0; net.n_reactions()];
    net.hazards_into(&x.counts, c.as_slice(), &mut h);
    Ok(h)
}

/// Combined hazard `h_0 = sum_i h_i`.
#[inline]
pub fn total_hazard(h: &[f64]) -> f64 {
    h.iter().sum()
}

/// Fires reaction `j` in place. Fails if a count would become negative or overflow.
#[inline]
pub fn apply_reaction_in_place(net: &ReactionNetwork, x: &mut [i64], j: usize) -> Result<()> {
    for (xs, &d) in x.iter_mut().zip(net.net_effect(j)) {
        let next = xs
            .checked_add(d)
            .ok_or_else(|| Error::Numerical(format!("species count overflow firing reaction {j}")))?;
        if next < 0 {
            return Err(Error::Invariant(format!(
                "reaction {j} drove a species count negative ({next})"
            )));
        }
        *xs = next;
    }
    Ok(())
}

/// Returns `x + S[:, j]`.
pub fn apply_reaction(x: &State, net: &ReactionNetwork, j: usize) -> Result<State> {
    if j >= net.n_reactions() {
        return usage(format!("reaction index {j} out of range"));
    }
    if x.len() != net.n_species() {
        return usage("state dimension does not match network");
    }
    let mut next = x.clone();
    apply_reaction_in_place(net, &mut next.counts, j)?;
    Ok(next)
}
