//! Simulation configuration: clock, risk engine, channel shell, planner and
//! rule-checker parameters, serializable as TOML.
//!
//! Durations are stored in seconds; the shell converts them to whole
//! prediction steps against the configured clock when a run starts.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clock::SimClock;
use crate::error::{Result, SimError};
use crate::risk::RiskConfig;
use crate::shell::ShellConfig;

/// Discretization of simulation and prediction time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClockConfig {
    /// Simulation step (s).
    pub delta_s: f64,
    /// Prediction step (s); kept equal to the simulation step.
    pub delta_p: f64,
    /// Number of prediction steps in every trajectory horizon.
    pub tau_h: u32,
}

impl Default for ClockConfig {
    fn default() -> Self {
        ClockConfig { delta_s: 0.1, delta_p: 0.1, tau_h: 30 }
    }
}

/// One planning channel of the multi-channel stack.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChannelConfig {
    /// Strongest deceleration the channel's planner commands (m/s^2).
    pub comfort_decel: f64,
    /// Hard speed cap of the channel (m/s), if any.
    pub speed_cap: Option<f64>,
    /// Nominal consideration time of the channel (s).
    pub tau_c_star: f64,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig { comfort_decel: 3.5, speed_cap: None, tau_c_star: 1.8 }
    }
}

/// Arbitration timing, in seconds (converted to steps at run start).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArbitrationConfig {
    /// Minimum last-safe-intervention horizon for a channel to count as
    /// safe enough (s).
    pub tau_suff: f64,
    /// Intervention horizon at or below which an escape starts (s).
    pub tau_immediate: f64,
    /// Minimum dwell between preference switches (s).
    pub dwell: f64,
    /// Demotion gain applied per insufficient step in the trailing window.
    pub rho: f64,
    /// Length of the trailing insufficiency window (s).
    pub window: f64,
}

impl Default for ArbitrationConfig {
    fn default() -> Self {
        ArbitrationConfig {
            tau_suff: 1.9,
            tau_immediate: 0.4,
            dwell: 2.0,
            rho: 0.0,
            window: 60.0,
        }
    }
}

/// Lattice-planner parameters shared by all channels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    /// Largest lateral offset from the route line the lattice explores (m).
    pub lateral_span: f64,
    /// Number of lateral offsets in the lattice (odd; includes zero).
    pub n_lateral: usize,
    /// Number of terminal speeds in the lattice.
    pub n_speeds: usize,
    /// Duration of a lateral transition (s).
    pub transition_time: f64,
    /// Comfortable forward acceleration (m/s^2).
    pub comfort_accel: f64,
    /// Lateral acceleration cap used to limit speed in curves (m/s^2).
    pub lat_accel_cap: f64,
    /// Score weight of squared longitudinal acceleration.
    pub accel_weight: f64,
    /// Score weight of the terminal lateral offset magnitude.
    pub offset_weight: f64,
    /// Score weight of passing close to predicted objects.
    pub clearance_weight: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            lateral_span: 3.5,
            n_lateral: 7,
            n_speeds: 9,
            transition_time: 2.5,
            comfort_accel: 1.5,
            lat_accel_cap: 2.5,
            accel_weight: 0.08,
            offset_weight: 0.6,
            clearance_weight: 1.0,
        }
    }
}

/// Parameters of the formal distance-rule checker architecture.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleCheckerConfig {
    /// Assumed response time (s).
    pub response_time: f64,
    /// Worst-case ego acceleration during the response time (m/s^2).
    pub a_max_accel: f64,
    /// Minimum ego braking once responding (m/s^2).
    pub b_min_brake: f64,
    /// Maximum braking assumed of other vehicles (m/s^2).
    pub b_max_brake: f64,
    /// Look-ahead for laterally closing objects that are about to enter the
    /// ego corridor (s).
    pub intent_window: f64,
    /// Deceleration executed while a rule is violated (m/s^2).
    pub brake_decel: f64,
}

impl Default for RuleCheckerConfig {
    fn default() -> Self {
        RuleCheckerConfig {
            response_time: 0.2,
            a_max_accel: 2.0,
            b_min_brake: 4.0,
            b_max_brake: 8.0,
            intent_window: 2.5,
            brake_decel: 8.0,
        }
    }
}

/// Full simulator configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct SimConfig {
    pub clock: ClockConfig,
    pub risk: RiskConfig,
    pub arbitration: ArbitrationConfig,
    pub channels: Vec<ChannelConfig>,
    pub planner: PlannerConfig,
    pub rule_checker: RuleCheckerConfig,
}

impl SimConfig {
    /// Built-in defaults with the standard three-channel stack.
    pub fn standard() -> Self {
        SimConfig {
            channels: vec![
                ChannelConfig { comfort_decel: 3.5, speed_cap: None, tau_c_star: 1.8 },
                ChannelConfig { comfort_decel: 4.5, speed_cap: None, tau_c_star: 1.5 },
                ChannelConfig { comfort_decel: 4.5, speed_cap: Some(13.9), tau_c_star: 1.0 },
            ],
            ..SimConfig::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: SimConfig = toml::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clock.delta_s <= 0.0 || (self.clock.delta_s - self.clock.delta_p).abs() > 1e-12 {
            return Err(SimError::Config(
                "simulation and prediction step must be equal and positive".into(),
            ));
        }
        if self.channels.is_empty() {
            return Err(SimError::Config("at least one channel is required".into()));
        }
        if self.risk.r_threshold <= 0.0 {
            return Err(SimError::Config("risk threshold must be positive".into()));
        }
        Ok(())
    }

    pub fn clock(&self) -> SimClock {
        SimClock::new(self.clock.delta_s, self.clock.delta_p, self.clock.tau_h)
    }

    /// Arbitration parameters converted to whole prediction steps.
    pub fn shell_config(&self) -> ShellConfig {
        let clock = self.clock();
        ShellConfig {
            tau_suff: clock.steps_of(self.arbitration.tau_suff),
            tau_immediate: clock.steps_of(self.arbitration.tau_immediate),
            tau_c_star: self
                .channels
                .iter()
                .map(|c| clock.steps_of(c.tau_c_star))
                .collect(),
            q: clock.steps_of(self.arbitration.dwell),
            rho: self.arbitration.rho,
            k_r: clock.steps_of(self.arbitration.window),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_preserves_config() {
        let cfg = SimConfig::standard();
        let text = cfg.to_toml_string().unwrap();
        let back: SimConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn standard_shell_steps() {
        let shell = SimConfig::standard().shell_config();
        assert_eq!(shell.tau_suff, 19);
        assert_eq!(shell.tau_immediate, 4);
        assert_eq!(shell.tau_c_star, vec![18, 15, 10]);
        assert_eq!(shell.q, 20);
        assert_eq!(shell.k_r, 600);
    }
}
