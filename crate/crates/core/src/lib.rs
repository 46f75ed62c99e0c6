pub mod data;
pub mod edge;
pub mod error;
pub mod example;
pub mod graph;
pub mod ids;
pub mod indicators;
pub mod model;
pub mod numeric;
pub mod orchestrator;
pub mod scenario;
pub mod sim;
pub mod state;

pub use error::{Error, Result};
pub use ids::{EntityId, Pair};
