//! Scenario definitions, the simulation world and the experiment drivers
//! built on top of it.

pub mod acceptance;
pub mod run;
pub mod scenario;
pub mod starvation;
pub mod table1;
pub mod trace;

pub use run::{run_scenario, summary_csv, FlowOutcome, PropertyCounts, RunError, SimEvent, TraceSet};
pub use scenario::{load_scenario, parse_scenario, preset, DeltaT, FlowKind, FlowSpec, Mix, Scenario, ScenarioError};
pub use trace::{Entity, Series, Trace, TraceRow};
pub use starvation::{detect_starvation, Episode, StarvationError};
