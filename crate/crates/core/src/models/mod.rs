//! Built-in reaction networks and exact small-state-space oracles.

mod ctmc;

pub use ctmc::{ctmc_transition, hmm_loglik, hmm_loglik_fixed_cap, quantile, transition_distribution, TruncatedCtmc, DEFAULT_CAP};

use crate::network::{RateConstants, ReactionNetwork, State};

/// A network with its reference rate constants and initial state.
pub type ModelSpec = (ReactionNetwork, RateConstants, State);

fn build(species: &[&str], reactions: &[(&str, &[(&str, u32)], &[(&str, u32)])]) -> ReactionNetwork {
    let idx = |name: &str| species.iter().position(|s| *s == name).expect("declared species");
    let row = |terms: &[(&str, u32)]| {
        let mut r = vec![0u32; species.len()];
        for &(s, k) in terms {
            r[idx(s)] += k;
        }
        r
    };
    ReactionNetwork::new(
        species.iter().map(|s| s.to_string()).collect(),
        reactions.iter().map(|r| r.0.to_string()).collect(),
        reactions.iter().map(|r| row(r.1)).collect(),
        reactions.iter().map(|r| row(r.2)).collect(),
    )
    .expect("built-in network is well formed")
}

/// Linear birth-death: `X -> 2X`, `X -> 0`; `c = (0.5, 1)`, `x0 = 100`.
pub fn birth_death() -> ModelSpec {
    let net = build(
        &["X"],
        &[("birth", &[("X", 1)], &[("X", 2)]), ("death", &[("X", 1)], &[])],
    );
    (net, RateConstants::new(vec![0.5, 1.0]).unwrap(), State::from(vec![100]))
}

/// Stochastic Lotka-Volterra predator-prey; `c = (0.5, 0.0025, 0.3)`, `x0 = (71, 79)`.
pub fn lotka_volterra() -> ModelSpec {
    let net = build(
        &["prey", "predator"],
        &[
            ("prey_birth", &[("prey", 1)], &[("prey", 2)]),
            ("predation", &[("prey", 1), ("predator", 1)], &[("predator", 2)]),
            ("predator_death", &[("predator", 1)], &[]),
        ],
    );
    (
        net,
        RateConstants::new(vec![0.5, 0.0025, 0.3]).unwrap(),
        State::from(vec![71, 79]),
    )
}

/// Motility regulation in B. subtilis: 9 species, 12 reactions.
pub fn motility() -> ModelSpec {
    let net = build(
        &["codY", "CodY", "flache", "SigD", "SigD_hag", "hag", "Hag", "CodY_flache", "CodY_hag"],
        &[
            ("codY_expression", &[("codY", 1)], &[("codY", 1), ("CodY", 1)]),
            ("CodY_decay", &[("CodY", 1)], &[]),
            ("SigD_expression", &[("flache", 1)], &[("flache", 1), ("SigD", 1)]),
            ("SigD_decay", &[("SigD", 1)], &[]),
            ("Hag_expression", &[("SigD_hag", 1)], &[("SigD", 1), ("hag", 1), ("Hag", 1)]),
            ("Hag_decay", &[("Hag", 1)], &[]),
            ("SigD_hag_binding", &[("SigD", 1), ("hag", 1)], &[("SigD_hag", 1)]),
            ("SigD_hag_unbinding", &[("SigD_hag", 1)], &[("SigD", 1), ("hag", 1)]),
            ("CodY_flache_binding", &[("CodY", 1), ("flache", 1)], &[("CodY_flache", 1)]),
            ("CodY_flache_unbinding", &[("CodY_flache", 1)], &[("CodY", 1), ("flache", 1)]),
            ("CodY_hag_binding", &[("CodY", 1), ("hag", 1)], &[("CodY_hag", 1)]),
            ("CodY_hag_unbinding", &[("CodY_hag", 1)], &[("CodY", 1), ("hag", 1)]),
        ],
    );
    let c = vec![0.1, 0.0002, 1.0, 0.0002, 1.0, 0.0002, 0.01, 0.1, 0.02, 0.1, 0.01, 0.1];
    (
        net,
        RateConstants::new(c).unwrap(),
        State::from(vec![1, 10, 1, 10, 1, 1, 10, 1, 1]),
    )
}

/// Looks up a built-in model by name.
pub fn builtin(name: &str) -> Option<ModelSpec> {
    match name {
        "birth-death" | "bd" => Some(birth_death()),
        "lotka-volterra" | "lv" => Some(lotka_volterra()),
        "motility" => Some(motility()),
        _ => None,
    }
}

pub const BUILTIN_NAMES: [&str; 3] = ["birth-death", "lotka-volterra", "motility"];
