//! Lockstep multi-robot simulator: worlds, sensing, stepping, metrics and
//! scenario generators.

mod engine;
mod metrics;
pub mod output;
mod scenario;
mod sensor;
pub mod traversability;
mod world;

use thiserror::Error;

pub use engine::{cloud_radius, AlgoParams, SimParams, World};
pub use metrics::{finalize, AgentReport, RunReport, Sample, Tracker};
pub use scenario::{
    build_world, generate, run_scenario, run_traversability, traversability_footprint, validate, world_traversability, CustomAgent, Layout, RunConfig, ScenarioKind, ScenarioParams,
};
pub use sensor::{sense, Pose, SampledObstacles, SensorModel, SensorSnapshot};
pub use traversability::{traversability, Footprint, StartMode, TraversabilityError, TraversabilityEstimate, TraversabilityQuery};
pub use world::{Agent, Arena, Obstacle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("{field}: {reason}")]
    InvalidConfig { field: String, reason: String },
    #[error(transparent)]
    Traversability(#[from] TraversabilityError),
}
