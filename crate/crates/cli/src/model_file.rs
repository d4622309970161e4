//! TOML model files: species, reactions with rates, an observation block and
//! an optional initial state.
//!
//! ```toml
//! species = ["prey", "predator"]
//!
//! [[reactions]]
//! name = "prey_birth"
//! rate = 0.5
//! pre = { prey = 1 }
//! post = { prey = 2 }
//!
//! [observation]
//! p = [[1.0, 0.0], [0.0, 1.0]]   # u rows, p columns
//! sigma = [[25.0, 0.0], [0.0, 25.0]]
//!
//! [initial]
//! prey = 71
//! predator = 79
//! ```
//!
//! An exact observation block replaces `sigma` with `error_free = true`.

use std::collections::BTreeMap;

use mjp_core::models;
use mjp_core::{ObservationModel, RateConstants, ReactionNetwork, State};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReactionDecl {
    pub name: String,
    pub rate: f64,
    #[serde(default)]
    pub pre: BTreeMap<String, u32>,
    #[serde(default)]
    pub post: BTreeMap<String, u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationDecl {
    /// u×p observation matrix, one row per species.
    pub p: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub error_free: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub species: Vec<String>,
    pub reactions: Vec<ReactionDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observation: Option<ObservationDecl>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<BTreeMap<String, i64>>,
}

impl ModelFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let model: ModelFile = toml::from_str(text).map_err(|e| CliError::Usage(format!("model file: {e}")))?;
        model.check()?;
        Ok(model)
    }

    pub fn emit(&self) -> String {
        toml::to_string(self).expect("model files always serialise")
    }

    /// Loads a built-in model by name or reads a TOML file.
    pub fn load(spec: &str) -> Result<(Self, String), CliError> {
        if let Some(m) = Self::builtin(spec) {
            let text = m.emit();
            return Ok((m, text));
        }
        let text = std::fs::read_to_string(spec)
            .map_err(|e| CliError::Usage(format!("cannot read model '{spec}': {e}")))?;
        Ok((Self::parse(&text)?, text))
    }

    /// Built-ins with their reference observation schemes: exact counts for
    /// birth-death, both species with variance 25 for Lotka-Volterra, exact
    /// SigD counts for motility.
    pub fn builtin(name: &str) -> Option<Self> {
        let (net, c, x0) = models::builtin(name)?;
        let u = net.n_species();
        let observation = match net.n_species() {
            1 => ObservationDecl { p: vec![vec![1.0]], sigma: None, error_free: true },
            2 => ObservationDecl {
                p: identity(2),
                sigma: Some(vec![vec![25.0, 0.0], vec![0.0, 25.0]]),
                error_free: false,
            },
            _ => {
                let sig_d = net.species_index("SigD")?;
                ObservationDecl {
                    p: (0..u).map(|i| vec![if i == sig_d { 1.0 } else { 0.0 }]).collect(),
                    sigma: None,
                    error_free: true,
                }
            }
        };
        Some(Self::from_parts(&net, &c, Some(&x0), Some(observation)))
    }

    pub fn from_parts(
        net: &ReactionNetwork,
        c: &RateConstants,
        x0: Option<&State>,
        observation: Option<ObservationDecl>,
    ) -> Self {
        let species = net.species().to_vec();
        let to_map = |row: &[u32]| -> BTreeMap<String, u32> {
            row.iter()
                .enumerate()
                .filter(|(_, &k)| k > 0)
                .map(|(j, &k)| (species[j].clone(), k))
                .collect()
        };
        let reactions = (0..net.n_reactions())
            .map(|i| ReactionDecl {
                name: net.reaction_names()[i].clone(),
                rate: c.as_slice()[i],
                pre: to_map(&net.pre()[i]),
                post: to_map(&net.post()[i]),
            })
            .collect();
        let initial = x0.map(|s| species.iter().cloned().zip(s.counts.iter().copied()).collect());
        Self { species, reactions, observation, initial }
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(format!("model file: {msg}")));
        if self.species.is_empty() {
            return bad("species: at least one species is required".into());
        }
        for (i, r) in self.reactions.iter().enumerate() {
            for s in r.pre.keys().chain(r.post.keys()) {
                if !self.species.contains(s) {
                    return bad(format!("reactions[{i}] ({}): unknown species '{s}'", r.name));
                }
            }
            if !(r.rate >= 0.0 && r.rate.is_finite()) {
                return bad(format!("reactions[{i}] ({}): rate must be finite and non-negative", r.name));
            }
        }
        if let Some(init) = &self.initial {
            for s in init.keys() {
                if !self.species.contains(s) {
                    return bad(format!("initial: unknown species '{s}'"));
                }
            }
        }
        if let Some(obs) = &self.observation {
            if obs.p.len() != self.species.len() {
                return bad(format!("observation.p: expected {} rows, found {}", self.species.len(), obs.p.len()));
            }
            let p = obs.p.first().map_or(0, Vec::len);
            if p == 0 || obs.p.iter().any(|r| r.len() != p) {
                return bad("observation.p: rows must share a non-zero length".into());
            }
            match (&obs.sigma, obs.error_free) {
                (Some(_), true) => return bad("observation: give either sigma or error_free, not both".into()),
                (None, false) => return bad("observation: sigma is required unless error_free = true".into()),
                (Some(s), false) if s.len() != p || s.iter().any(|r| r.len() != p) => {
                    return bad(format!("observation.sigma: expected a {p}x{p} matrix"));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn network(&self) -> Result<ReactionNetwork, CliError> {
        let row = |m: &BTreeMap<String, u32>| -> Vec<u32> {
            self.species.iter().map(|s| m.get(s).copied().unwrap_or(0)).collect()
        };
        Ok(ReactionNetwork::new(
            self.species.clone(),
            self.reactions.iter().map(|r| r.name.clone()).collect(),
            self.reactions.iter().map(|r| row(&r.pre)).collect(),
            self.reactions.iter().map(|r| row(&r.post)).collect(),
        )?)
    }

    pub fn rates(&self) -> Result<RateConstants, CliError> {
        Ok(RateConstants::with_zeros(self.reactions.iter().map(|r| r.rate).collect())?)
    }

    pub fn initial_state(&self) -> Option<State> {
        let init = self.initial.as_ref()?;
        Some(State::from(self.species.iter().map(|s| init.get(s).copied().unwrap_or(0)).collect::<Vec<_>>()))
    }

    pub fn observation_model(&self) -> Result<ObservationModel, CliError> {
        let obs = self
            .observation
            .as_ref()
            .ok_or_else(|| CliError::Usage("model file has no observation block".into()))?;
        let u = self.species.len();
        let p = obs.p[0].len();
        let flat: Vec<f64> = obs.p.iter().flatten().copied().collect();
        Ok(match &obs.sigma {
            None => ObservationModel::error_free(u, p, flat)?,
            Some(s) => ObservationModel::gaussian(u, p, flat, s.iter().flatten().copied().collect())?,
        })
    }
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}
