//! Simulation of federated learning over LEO satellite constellations that
//! talk to a single ground station.
//!
//! The pipeline is: [`orbital`] computes the contact plan, [`link`] turns each
//! pass into exchange times, [`scheduler`] plans downloads and uploads, and
//! [`engine`] replays the plan as discrete events while [`federation`]
//! aggregates the models trained by [`learning`].

// `!(x > 0.0)` rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod export;
pub mod federation;
pub mod learning;
pub mod link;
pub mod orbital;
pub mod scenario;
pub mod scheduler;

pub use engine::{compare_runs, run_simulation, Comparison, MetricsLog, RunOutput, Scenario};
pub use error::{Error, Result};
pub use scenario::{Overrides, ScenarioConfig};
pub use scheduler::{Decision, Policy};
