//! Fair secrecy energy-efficiency maximization for an uplink network relayed
//! by a UAV that carries a reconfigurable intelligent surface.
//!
//! The optimization alternates over user association, transmit power and
//! the joint RIS phase / UAV trajectory block. See [`orchestrator`] for the
//! outer loop and [`baseline`] for the amplify-and-forward comparison.

pub mod assoc;
pub mod baseline;
pub mod channel;
pub mod convex;
pub mod error;
pub mod orchestrator;
pub mod power;
pub mod rates;
pub mod scenario;
pub mod scheme1;
pub mod scheme2;

pub use error::{Error, Result};
pub use orchestrator::{run_algorithm2, IterationTrace, Scheme};
pub use channel::PhaseSchedule;
pub use rates::{evaluate, Allocation, SolutionState};
pub use scenario::{default_paper_scenario, initial_trajectory, parse_config, Point, ScenarioConfig, Trajectory};
