//! Deterministic fixed-timestep flock simulation.
//!
//! A run is fully determined by its [`ScenarioConfig`] (seed included).
//! Sensor noise is drawn from keyed streams per (tick, observer, observed),
//! so traces are bit-identical regardless of how many worker threads
//! evaluate the per-agent controllers.

pub mod observe;
pub mod scenario;
pub mod trace;
pub mod world;

pub use observe::{observe, NoiseSource, Observation};
pub use scenario::{
    layouts, ConfigError, CostWeights, FieldIssue, ScenarioConfig, ScenarioError, Spawn, Waypoint,
};
pub use trace::{AgentRecord, TickRecord, Trace};
pub use world::{run_scenario, run_scenario_with, ControlTick, RunOptions, SimError, World};
