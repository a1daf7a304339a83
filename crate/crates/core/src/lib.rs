//! Deterministic slot-level simulator of multi-PHY synchronous flooding.
//!
//! Layers, bottom up: [`phy`] timing, [`medium`] reception, [`driver`]
//! per-slot radio state, [`primitives`] Glossy and RoF rounds,
//! [`middleware`] epoch schedules and hooks, [`protocols`] collection and
//! dissemination, [`harness`] scenarios and reports.

pub mod driver;
pub mod error;
pub mod harness;
pub mod medium;
pub mod middleware;
pub mod phy;
pub mod primitives;
pub mod protocols;
pub mod rng;

pub use error::{Error, FieldError, Result};
pub use harness::{run_scenario, Scenario, SimReport};
