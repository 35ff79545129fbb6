//! One sense-and-plan channel: perception with scripted fault injection and
//! a deterministic lattice planner over the route.

mod injector;
mod planner;

pub use injector::{dangerous_target, predict_constant_velocity, sense, Fault};
pub use planner::{LatticePlanner, PlanOutcome};
