//! Deterministic simulator and library for multi-channel safety-shell
//! arbitration of automated-vehicle motion planning.
//!
//! The crate models an automated vehicle whose motion stack consists of
//! several independent sense-and-plan channels wrapped by a safety shell:
//! every channel's candidate trajectory is risk-assessed against every
//! channel's world model, and an arbiter selects which trajectory to
//! execute — falling back to an emergency-stop escape maneuver when no
//! channel can be continued safely. Alongside the shell, the crate
//! implements baseline architectures (single channel, monitor-actuator,
//! fused world model, and a formal distance-rule checker) and a scenario
//! harness that runs all of them through a catalog of fault-injection
//! tests, collecting safety, availability and comfort metrics.
//!
//! Everything is deterministic: no randomness, no wall-clock dependence,
//! and no iteration-order-sensitive state, so identical inputs produce
//! byte-identical outputs.

pub mod actors;
pub mod arch;
pub mod channel;
pub mod clock;
pub mod config;
pub mod error;
pub mod geom;
pub mod report;
pub mod risk;
pub mod scenario;
pub mod shell;
pub mod world;
