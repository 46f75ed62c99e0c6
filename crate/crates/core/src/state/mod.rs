//! Latent threat-state filtering for one entity (or a cell treated as one).
//!
//! States follow a semi-Markov process: an embedded jump chain picks the next
//! state and a per-transition holding time decides when to jump. The filter
//! tracks the joint of (state, duration-in-state) on a truncated duration grid,
//! so prediction stays exact for any holding-time family. Observed signals
//! reach the states through a layer of binary tasks.

mod belief;
mod filter;
mod holding;
mod space;
mod tasks;
mod transition;

pub use belief::StateBelief;
pub use filter::{filter_tick, likelihood_vector, marginal_threat, predict_step, signal_likelihood, update_step};
pub use holding::HoldingTime;
pub use space::ThreatStateSpace;
pub use tasks::{Emission, SignalExtractor, SignalVector, TaskEmission, TaskModel};
pub use transition::{TransitionModel, TransitionSpec, DEFAULT_DURATION_CAP};
