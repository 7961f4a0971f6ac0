//! Simulation of a UAV relay chain between a base station and a user
//! equipment in the presence of reckless or smart interferers.
//!
//! Relays climb the spatial gradient of the weighted algebraic connectivity
//! of the capacity graph, powers come from a difference-of-concave
//! successive convex approximation, and throughput is the source-to-sink
//! max flow.

pub mod barrier;
pub mod eigen;
pub mod error;
pub mod flow;
pub mod mission;
pub mod model;
pub mod power;
pub mod radio;
pub mod scenario;
pub mod spectral;
pub mod trace;

pub use error::{Error, Result};
pub use mission::{alternating_optimize, run_sweep, Dims, InterfererPolicy, MotionConfig, RunStatus, SimulationTrace};
pub use model::{Entity, InterferenceMode, NetworkState, Scenario};
pub use scenario::{parse_config, parse_scenario, ScenarioConfig, SweepSpec};
pub use trace::{export_trace, import_trace, TraceFile};
