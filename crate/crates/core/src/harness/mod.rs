//! Scenario loading, replica execution and reports.

pub mod layout;
pub mod report;
pub mod runner;
pub mod scenario;

pub use layout::{layout_roles, layout_topology, testbed_positions, LayoutName};
pub use report::{AggregateReport, LatencyStats, ReplicaReport, SegmentUtilization, SimReport, SCHEMA_VERSION};
pub use runner::{run_scenario, run_scenario_traced};
pub use scenario::{EnergyModel, Prepared, ProtocolKind, ProtocolPlan, Scenario};
