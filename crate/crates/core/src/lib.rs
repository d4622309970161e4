//! Simulation and inference for Markov jump processes describing stochastic
//! kinetic models.
//!
//! The crate covers exact simulation, Gaussian approximations of the jump
//! process, samplers for paths conditioned on a noisy end-point observation,
//! and particle marginal Metropolis-Hastings for the rate constants.

pub mod approx;
pub mod bridge;
pub mod error;
pub mod gillespie;
pub mod inference;
pub mod linalg;
pub mod models;
pub mod network;
pub mod observation;
pub mod rng;

pub use error::{Error, Result};
pub use gillespie::{complete_data_loglik, simulate, Event, Trajectory};
pub use network::{apply_reaction, evaluate_hazards, total_hazard, RateConstants, ReactionNetwork, State};
pub use observation::{gaussian_loglik, ObservationModel};
pub use rng::RngStream;
