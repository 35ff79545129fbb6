//! Discrete simulation clock.
//!
//! The simulator advances in fixed steps of `delta_s` seconds and predicts in
//! steps of `delta_p` seconds over a horizon of `tau_h` prediction steps.
//! Both step sizes are equal in this crate (asserted at construction), which
//! keeps wall time exactly `step * delta_s` and lets prediction indices line
//! up one-to-one with future simulation steps.

use serde::{Deserialize, Serialize};

/// Fixed-step simulation clock.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimClock {
    delta_s: f64,
    delta_p: f64,
    tau_h: u32,
    step: u64,
}

impl SimClock {
    /// Create a clock at step 0.
    ///
    /// Panics if the step sizes are not positive and equal, or if the
    /// prediction horizon is empty.
    pub fn new(delta_s: f64, delta_p: f64, tau_h: u32) -> Self {
        assert!(delta_s > 0.0 && delta_p > 0.0, "step sizes must be positive");
        assert!(
            (delta_s - delta_p).abs() < 1e-12,
            "simulation and prediction step sizes must match"
        );
        assert!(tau_h >= 1, "prediction horizon must be at least one step");
        SimClock { delta_s, delta_p, tau_h, step: 0 }
    }

    /// Simulation step size in seconds.
    pub fn delta_s(&self) -> f64 {
        self.delta_s
    }

    /// Prediction step size in seconds.
    pub fn delta_p(&self) -> f64 {
        self.delta_p
    }

    /// Number of prediction steps in the horizon (states run `0..=tau_h`).
    pub fn tau_h(&self) -> u32 {
        self.tau_h
    }

    /// Current step index `k`.
    pub fn step(&self) -> u64 {
        self.step
    }

    /// Wall-clock time of the current step, exactly `k * delta_s`.
    pub fn time(&self) -> f64 {
        self.step as f64 * self.delta_s
    }

    /// Advance one simulation step.
    pub fn advance(&mut self) {
        self.step += 1;
    }

    /// Convert a duration in seconds to whole prediction steps (rounded).
    pub fn steps_of(&self, seconds: f64) -> u32 {
        (seconds / self.delta_p).round().max(0.0) as u32
    }
}
