//! Scenario descriptions and the deterministic run harness.
//!
//! A [`ScenarioSpec`] is a fully self-contained description of one simulated
//! run: road geometry, route, ego start, scripted actors, per-channel fault
//! injections, target speed and time budget. Specs serialize to TOML so the
//! built-in catalog can be exported, hand-edited and re-run. [`run`] executes
//! one architecture on one spec against ground truth and reports safety,
//! availability and comfort outcomes.

pub mod catalog;

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actors::ActorScript;
use crate::arch::{build_controller, Architecture, RunSetup, StepLabel};
use crate::channel::Fault;
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::geom::{footprint_overlap, AaRect, Vec2};
use crate::world::{EgoState, Road, Route, Tau};

/// Version stamp written into serialized scenario files.
pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

/// A fault injected into one specific channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelFault {
    pub channel: usize,
    pub fault: Fault,
}

/// Self-contained description of one simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub schema_version: u32,
    pub name: String,
    /// Drivable area as axis-aligned rectangles (union).
    pub road: Vec<AaRect>,
    /// Route reference line vertices.
    pub route: Vec<Vec2>,
    /// Station along the route at which the run counts as completed (m).
    pub goal_station: f64,
    /// Ego state at t = 0.
    pub ego: EgoState,
    /// Speed the planners aim for (m/s).
    pub target_speed: f64,
    /// Scripted ground-truth actors (ghosts live inside fault scripts, not
    /// here).
    #[serde(default)]
    pub actors: Vec<ActorScript>,
    #[serde(default)]
    pub faults: Vec<ChannelFault>,
    /// Wall-clock cap on the run (s); exceeding it fails availability.
    pub time_budget: f64,
}

impl ScenarioSpec {
    /// Budget rule used by the catalog: half again the ideal cruise time
    /// plus a five second grace.
    pub fn standard_budget(goal_station: f64, target_speed: f64) -> f64 {
        1.5 * goal_station / target_speed + 5.0
    }

    /// Materialize the controller-facing setup.
    pub fn setup(&self, sim: &SimConfig) -> RunSetup {
        let mut faults: Vec<Vec<Fault>> = vec![Vec::new(); 3];
        for cf in &self.faults {
            if cf.channel < faults.len() {
                faults[cf.channel].push(cf.fault.clone());
            }
        }
        RunSetup {
            sim: sim.clone(),
            road: Arc::new(Road { rects: self.road.clone() }),
            route: Arc::new(Route {
                line: crate::geom::Polyline::new(self.route.clone()),
                goal_station: self.goal_station,
            }),
            actors: self.actors.clone(),
            faults,
            target_speed: self.target_speed,
            initial_ego: self.ego,
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string_pretty(self)?)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(text)?;
        if spec.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(SimError::Scenario(format!(
                "unsupported scenario schema version {} (expected {})",
                spec.schema_version, SCENARIO_SCHEMA_VERSION
            )));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_toml()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.route.len() < 2 {
            return Err(SimError::Scenario("route needs at least two vertices".into()));
        }
        if self.target_speed <= 0.0 {
            return Err(SimError::Scenario("target speed must be positive".into()));
        }
        if self.time_budget <= 0.0 {
            return Err(SimError::Scenario("time budget must be positive".into()));
        }
        if self.goal_station <= 0.0 {
            return Err(SimError::Scenario("goal station must be positive".into()));
        }
        for cf in &self.faults {
            if cf.channel >= 3 {
                return Err(SimError::Scenario(format!(
                    "fault channel {} out of range (0..3)",
                    cf.channel
                )));
            }
        }
        Ok(())
    }
}

/// One executed simulation step, for traces and debugging.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StepRecord {
    pub k: u32,
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub station: f64,
    /// Longitudinal acceleration commanded for this step (m/s^2).
    pub commanded_accel: f64,
    pub label: StepLabel,
    pub active_channel: usize,
    pub tau_l: Vec<Tau>,
    pub tau_c: Vec<u32>,
}

/// Outcome of one architecture on one scenario.
#[derive(Debug, Clone, Serialize)]
pub struct RunResult {
    pub arch: Architecture,
    pub collided: bool,
    pub collision_time: Option<f64>,
    pub goal_reached: bool,
    pub completion_time: Option<f64>,
    pub time_budget: f64,
    /// Largest commanded deceleration over the run (m/s^2, positive).
    pub peak_long_decel: f64,
    /// Largest realized lateral acceleration over the run (m/s^2).
    pub peak_lat_accel: f64,
    pub final_station: f64,
    /// Preference and safety switches taken (shell architectures).
    pub switch_count: u32,
    /// Steps spent in the escape maneuver or a latched fallback.
    pub fallback_steps: u32,
    /// Steps spent executing each channel's plan.
    pub channel_usage: Vec<u32>,
    /// Per-step trace; empty unless requested.
    pub trace: Vec<StepRecord>,
}

impl RunResult {
    /// A run is available when it completed the route within budget and
    /// without collision. `goal_reached` and `collided` are mutually
    /// exclusive by construction of the run loop.
    pub fn available(&self) -> bool {
        self.goal_reached && !self.collided
    }
}

fn wrap_angle(a: f64) -> f64 {
    let mut a = a % std::f64::consts::TAU;
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    } else if a < -std::f64::consts::PI {
        a += std::f64::consts::TAU;
    }
    a
}

/// Execute one architecture on one scenario against ground truth.
///
/// Each step the controller returns a trajectory; its second state becomes
/// the next ego state (shared low-level executor). The run ends on the first
/// ground-truth collision, on reaching the goal station, or when the time
/// budget expires, whichever comes first.
pub fn run(
    arch: Architecture,
    spec: &ScenarioSpec,
    sim: &SimConfig,
    record_trace: bool,
) -> RunResult {
    let setup = spec.setup(sim);
    let clock = sim.clock();
    let dt = clock.delta_s();
    let mut ctrl = build_controller(arch, &setup);
    let max_steps = (spec.time_budget / dt + 1e-9).floor() as u32;
    let ego_shape = sim.risk.ego;
    let route = setup.route.clone();

    let mut ego = setup.initial_ego;
    let mut collided = false;
    let mut collision_time = None;
    let mut goal_reached = false;
    let mut completion_time = None;
    let mut peak_long_decel: f64 = 0.0;
    let mut peak_lat_accel: f64 = 0.0;
    let mut switch_count = 0u32;
    let mut fallback_steps = 0u32;
    let mut channel_usage = vec![0u32; arch.channels()];
    let mut trace = Vec::new();

    'steps: for k in 0..max_steps {
        let time = k as f64 * dt;
        let out = ctrl.step(k, time, &ego);
        let first = out.trajectory.states[0];
        if first.long_accel < 0.0 {
            peak_long_decel = peak_long_decel.max(-first.long_accel);
        }
        let next = out.trajectory.states.get(1).copied().unwrap_or(first);
        let yaw_rate = wrap_angle(next.heading - ego.heading) / dt;
        peak_lat_accel = peak_lat_accel.max((yaw_rate * ego.speed).abs());

        match out.label {
            StepLabel::PreferenceSwitch | StepLabel::SafetySwitch => switch_count += 1,
            StepLabel::Escape | StepLabel::Fallback | StepLabel::RuleBrake => {
                fallback_steps += 1
            }
            StepLabel::Nominal => {}
        }
        if matches!(
            out.label,
            StepLabel::Nominal | StepLabel::PreferenceSwitch | StepLabel::SafetySwitch
        ) {
            if let Some(slot) = channel_usage.get_mut(out.active_channel) {
                *slot += 1;
            }
        }
        if record_trace {
            let (station, _) = route.line.project(ego.pos);
            trace.push(StepRecord {
                k,
                time,
                x: ego.pos.x,
                y: ego.pos.y,
                heading: ego.heading,
                speed: ego.speed,
                station,
                commanded_accel: first.long_accel,
                label: out.label,
                active_channel: out.active_channel,
                tau_l: out.tau_l.clone(),
                tau_c: out.tau_c.clone(),
            });
        }

        let t_next = (k + 1) as f64 * dt;
        ego = next;
        let fp = ego.footprint(&ego_shape);
        for actor in &setup.actors {
            if footprint_overlap(&fp, &actor.footprint_at_time(t_next)) {
                collided = true;
                collision_time = Some(t_next);
                break 'steps;
            }
        }
        let (station, _) = route.line.project(ego.pos);
        if station >= route.goal_station {
            goal_reached = true;
            completion_time = Some(t_next);
            break;
        }
    }

    let (final_station, _) = route.line.project(ego.pos);
    RunResult {
        arch,
        collided,
        collision_time,
        goal_reached,
        completion_time,
        time_budget: spec.time_budget,
        peak_long_decel,
        peak_lat_accel,
        final_station,
        switch_count,
        fallback_steps,
        channel_usage,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ObjectClass;

    fn empty_straight(speed: f64) -> ScenarioSpec {
        ScenarioSpec {
            schema_version: SCENARIO_SCHEMA_VERSION,
            name: "unit-straight".into(),
            road: vec![AaRect::new(-10.0, -3.0, 360.0, 6.5)],
            route: vec![Vec2::new(0.0, 0.0), Vec2::new(260.0, 0.0)],
            goal_station: 240.0,
            ego: EgoState {
                pos: Vec2::new(5.0, 0.0),
                heading: 0.0,
                speed,
                long_accel: 0.0,
            },
            target_speed: speed,
            actors: vec![],
            faults: vec![],
            time_budget: ScenarioSpec::standard_budget(240.0, speed),
        }
    }

    #[test]
    fn empty_road_single_channel_reaches_goal() {
        let sim = SimConfig::standard();
        let spec = empty_straight(15.0);
        let res = run(Architecture::SingleChannel, &spec, &sim, false);
        assert!(res.goal_reached, "final station {}", res.final_station);
        assert!(!res.collided);
        assert!(res.available());
        // Cruise: (240 - 5) / 15 s, within a step or two.
        let t = res.completion_time.unwrap();
        assert!((t - 235.0 / 15.0).abs() < 0.3, "completion {t}");
        assert!(res.peak_long_decel < 0.1);
    }

    #[test]
    fn blind_channel_hits_standing_pedestrian() {
        let sim = SimConfig::standard();
        let mut spec = empty_straight(15.0);
        spec.actors.push(ActorScript::stationary(
            1,
            ObjectClass::Pedestrian,
            0.3,
            0.3,
            Vec2::new(130.0, 0.0),
            std::f64::consts::FRAC_PI_2,
        ));
        spec.faults.push(ChannelFault {
            channel: 0,
            fault: Fault::MissedObject { id: 1 },
        });
        let res = run(Architecture::SingleChannel, &spec, &sim, true);
        assert!(res.collided);
        assert!(!res.goal_reached);
        assert!(!res.available());
        // Impact around (130 - 5 - 2.35 - 0.3) / 15 = 8.15 s.
        let t = res.collision_time.unwrap();
        assert!((t - 8.16).abs() < 0.3, "collision at {t}");
        assert!(!res.trace.is_empty());
    }

    #[test]
    fn sighted_channel_avoids_standing_pedestrian() {
        let sim = SimConfig::standard();
        let mut spec = empty_straight(15.0);
        spec.actors.push(ActorScript::stationary(
            1,
            ObjectClass::Pedestrian,
            0.3,
            0.3,
            Vec2::new(130.0, 0.0),
            std::f64::consts::FRAC_PI_2,
        ));
        let res = run(Architecture::SingleChannel, &spec, &sim, false);
        assert!(!res.collided);
        assert!(res.goal_reached, "final station {}", res.final_station);
    }

    #[test]
    fn scenario_toml_round_trip() {
        let mut spec = empty_straight(12.0);
        spec.actors.push(ActorScript::stationary(
            7,
            ObjectClass::Vehicle,
            2.35,
            0.9,
            Vec2::new(60.0, 3.5),
            0.0,
        ));
        spec.faults.push(ChannelFault {
            channel: 1,
            fault: Fault::DelayedDetection { id: 7, reveal_time: 3.2 },
        });
        let text = spec.to_toml().unwrap();
        let back = ScenarioSpec::from_toml(&text).unwrap();
        assert_eq!(spec, back);
    }

    #[test]
    fn wrong_schema_version_is_rejected() {
        let mut spec = empty_straight(12.0);
        spec.schema_version = 99;
        let text = toml::to_string_pretty(&spec).unwrap();
        assert!(ScenarioSpec::from_toml(&text).is_err());
    }
}
