//! Decentralized coordination of connected vehicles at a four-way
//! unsignalized intersection.
//!
//! Vehicles form GO/YIELD opinions over a signed conflict network, commit
//! through a closed-form feasibility gate and pick accelerations from a
//! small cost grid. [`engine::run`] simulates a whole scenario.

pub mod collision;
pub mod engine;
pub mod error;
pub mod frame;
pub mod gate;
pub mod geometry;
pub mod network;
pub mod opinion;
pub mod optimizer;
pub mod output;
pub mod scenario;

pub use engine::{
    run, CommitEvent, Policy, ResumeTimestamp, SimConfig, SimResult, TraceRow, VehicleSpec, World,
};
pub use error::{Error, Result};
pub use frame::BroadcastFrame;
pub use gate::{GateParams, OccupancyWindow, Sigma, Zone};
pub use geometry::{IntersectionParams, LaneId, Maneuver, ManeuverKind, PathSpec, Point, Pose};
pub use network::{BeliefState, ConflictTopology};
pub use opinion::{OpinionParams, OpinionState};
pub use optimizer::{CostBreakdown, OptimizerParams};
