//! Built-in scenario catalog: the fault-injection test matrix.
//!
//! Ten test situations on three road geometries — a straight two-lane road,
//! a three-lane road with a merging vehicle, and a T-junction left turn —
//! each instantiable per target speed and fault variant. Conflicts are timed
//! against the ego's own unobstructed arrival, so a channel that is blind to
//! the conflict object collides at every target speed, while an unobstructed
//! run always reaches the goal inside the time budget.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::{Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::actors::{ActorScript, PoseKnot};
use crate::arch::Architecture;
use crate::channel::Fault;
use crate::config::SimConfig;
use crate::error::{Result, SimError};
use crate::geom::{AaRect, Polyline, Vec2};
use crate::world::{EgoState, ObjectClass};

use super::{run, ChannelFault, ScenarioSpec, StepRecord, SCENARIO_SCHEMA_VERSION};

/// All test ids in the matrix.
pub const TESTS: [u32; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

/// Target speeds of the full sweep (m/s).
pub fn full_speeds() -> Vec<f64> {
    (8..=25).map(|v| v as f64).collect()
}

/// Target speeds of the delayed-detection sweep (m/s).
pub fn delayed_speeds() -> Vec<f64> {
    vec![8.0, 17.0, 25.0]
}

/// Detection lead times of the delayed-detection sweep, in tenths of a
/// second before the expected impact (1 -> 0.1 s, ..., 11 -> 1.1 s).
pub fn detection_leads() -> Vec<u32> {
    (1..=11).collect()
}

/// Which channels are faulted, or how a test is otherwise parameterized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Fault in channel 1 only (tests 8-10 use their fixed assignment).
    Single,
    /// The same fault in channels 1 and 2 (tests 1-7).
    Dual,
    /// Channel 1 never detects, channel 2 detects `lead_tenths`/10 s before
    /// the expected impact, channel 3 is unaffected (tests 2-3).
    Delayed { lead_tenths: u32 },
    /// Ghost perceived only from 2 s before to 0.5 s after the would-be
    /// impact (tests 9-10).
    GhostWindow,
}

impl Variant {
    pub fn label(&self) -> String {
        match self {
            Variant::Single => "single".into(),
            Variant::Dual => "dual".into(),
            Variant::Delayed { lead_tenths } => {
                format!("delayed-{:.1}", *lead_tenths as f64 * 0.1)
            }
            Variant::GhostWindow => "ghost-window".into(),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Whether a (test, variant) pair is part of the matrix.
pub fn applicable(test: u32, variant: Variant) -> bool {
    match variant {
        Variant::Single => (1..=10).contains(&test),
        Variant::Dual => (1..=7).contains(&test),
        Variant::Delayed { lead_tenths } => {
            (test == 2 || test == 3) && (1..=11).contains(&lead_tenths)
        }
        Variant::GhostWindow => test == 9 || test == 10,
    }
}

/// Short descriptive slug per test id.
pub fn test_name(test: u32) -> &'static str {
    match test {
        1 => "merge-wrong-prediction",
        2 => "inlane-ped-missed",
        3 => "oncoming-vehicle-missed",
        4 => "junction-ped-offset",
        5 => "crossing-ped-offset",
        6 => "merge-vehicle-ignored",
        7 => "inlane-ped-ignored",
        8 => "split-perception",
        9 => "ghost-inlane-ped",
        10 => "ghost-junction-ped",
        _ => "unknown",
    }
}

// Shared dimensions (m, m/s).
const WALK_SPEED: f64 = 1.4;
const PED_HALF: f64 = 0.3;
const VEH_HALF_LEN: f64 = 2.35;
const VEH_HALF_WID: f64 = 0.9;
const LANE_WIDTH: f64 = 3.5;
const SHOULDER: f64 = 1.25;
const EGO_START_X: f64 = 5.0;
const SCRIPT_END: f64 = 400.0;

// Straight two-lane road.
const STRAIGHT_GOAL: f64 = 240.0;
const STRAIGHT_PED_X: f64 = 130.0;
/// Lane-edge offset of the in-lane pedestrian: barely overlaps the ego
/// swath, so late evasive steering can still clear it.
const EDGE_PED_Y: f64 = 1.0;
/// The in-lane ghost would be hit this many seconds after the run starts.
const GHOST_IMPACT_TIME: f64 = 4.5;

// Three-lane road with a merging vehicle.
const MERGE_GOAL: f64 = 380.0;
const MERGE_VEHICLE_SPEED: f64 = 6.0;
/// The merging vehicle starts its lane change this long into the run (s).
const CUT_START_TIME: f64 = 4.0;
/// Bumper-to-bumper gap at cut start, per m/s of ego target speed (s).
const CUT_GAP_TIME: f64 = 1.2;

// T-junction with a left turn onto the minor road.
const JUNCTION_X: f64 = 150.0;
const TURN_RADIUS: f64 = 8.0;
const ONCOMING_Y: f64 = 3.5;
const ONCOMING_SPEED: f64 = 10.0;
/// Crosswalk on the minor road, a few meters past the corner exit so the
/// conflict plays out on the straight leg, not mid-turn.
const CROSSWALK_Y: f64 = 12.0;
const JUNCTION_GOAL_Y: f64 = 45.0;

fn ego_start(speed: f64) -> EgoState {
    EgoState {
        pos: Vec2::new(EGO_START_X, 0.0),
        heading: 0.0,
        speed,
        long_accel: 0.0,
    }
}

fn base_spec(
    name: &str,
    road: Vec<AaRect>,
    route: Vec<Vec2>,
    goal_station: f64,
    speed: f64,
) -> ScenarioSpec {
    ScenarioSpec {
        schema_version: SCENARIO_SCHEMA_VERSION,
        name: name.to_string(),
        road,
        route,
        goal_station,
        ego: ego_start(speed),
        target_speed: speed,
        actors: vec![],
        faults: vec![],
        time_budget: ScenarioSpec::standard_budget(goal_station, speed),
    }
}

// ---------------------------------------------------------------------------
// Straight road family (tests 2, 5, 7, 8, 9)
// ---------------------------------------------------------------------------

// Road surfaces extend a full planning horizon past the goal so that plans
// crossing the finish line never look like they run off the pavement.
fn straight_base(speed: f64) -> ScenarioSpec {
    base_spec(
        "straight",
        vec![AaRect::new(-10.0, -LANE_WIDTH / 2.0 - SHOULDER, 360.0, 1.5 * LANE_WIDTH + SHOULDER)],
        vec![Vec2::new(0.0, 0.0), Vec2::new(260.0, 0.0)],
        STRAIGHT_GOAL,
        speed,
    )
}

fn inlane_ped() -> ActorScript {
    ActorScript {
        id: 1,
        class: ObjectClass::Pedestrian,
        half_length: PED_HALF,
        half_width: PED_HALF,
        fixed_heading: None,
        knots: vec![
            PoseKnot::new(0.0, STRAIGHT_PED_X, EDGE_PED_Y),
            PoseKnot::new(
                SCRIPT_END,
                STRAIGHT_PED_X + WALK_SPEED * SCRIPT_END,
                EDGE_PED_Y,
            ),
        ],
    }
}

/// Time at which the ego front would first touch the walking in-lane
/// pedestrian while cruising at `speed`.
fn inlane_impact_time(speed: f64, ego_half_len: f64) -> f64 {
    (STRAIGHT_PED_X - EGO_START_X - ego_half_len - PED_HALF) / (speed - WALK_SPEED)
}

fn crossing_ped(speed: f64) -> ActorScript {
    // Center-to-center conflict: the pedestrian reaches the lane center
    // exactly when an unobstructed cruise does.
    let t_conflict = (STRAIGHT_PED_X - EGO_START_X) / speed;
    let y0 = -WALK_SPEED * t_conflict;
    ActorScript {
        id: 1,
        class: ObjectClass::Pedestrian,
        half_length: PED_HALF,
        half_width: PED_HALF,
        fixed_heading: None,
        knots: vec![
            PoseKnot::new(0.0, STRAIGHT_PED_X, y0),
            PoseKnot::new(SCRIPT_END, STRAIGHT_PED_X, y0 + WALK_SPEED * SCRIPT_END),
        ],
    }
}

fn adjacent_vehicle(speed: f64) -> ActorScript {
    ActorScript {
        id: 2,
        class: ObjectClass::Vehicle,
        half_length: VEH_HALF_LEN,
        half_width: VEH_HALF_WID,
        fixed_heading: None,
        knots: vec![
            PoseKnot::new(0.0, EGO_START_X, LANE_WIDTH),
            PoseKnot::new(SCRIPT_END, EGO_START_X + speed * SCRIPT_END, LANE_WIDTH),
        ],
    }
}

fn inlane_ghost(speed: f64) -> ActorScript {
    ActorScript::stationary(
        901,
        ObjectClass::Pedestrian,
        PED_HALF,
        PED_HALF,
        Vec2::new(EGO_START_X + GHOST_IMPACT_TIME * speed, 0.0),
        std::f64::consts::FRAC_PI_2,
    )
}

// ---------------------------------------------------------------------------
// Merging-vehicle family (tests 1, 6)
// ---------------------------------------------------------------------------

fn merge_base(speed: f64) -> ScenarioSpec {
    // No shoulder on the right: once the ego lane is blocked there is no
    // legal gap on that side, so late reactions must resolve by braking.
    base_spec(
        "merge",
        vec![AaRect::new(
            -10.0,
            -LANE_WIDTH / 2.0,
            490.0,
            1.5 * LANE_WIDTH + SHOULDER,
        )],
        vec![Vec2::new(0.0, 0.0), Vec2::new(400.0, 0.0)],
        MERGE_GOAL,
        speed,
    )
}

/// Vehicle in the center lane that cuts into the ego lane to pass a parked
/// obstacle, travels in-lane for a while, and merges back out.
fn merging_vehicle(speed: f64) -> (ActorScript, [ActorScript; 2]) {
    // At the moment the cut starts the bumper gap to the ego is
    // CUT_GAP_TIME * speed, so faster targets close in before the vehicle
    // finishes crossing while slow ones have time to react.
    let x_cut = EGO_START_X + CUT_START_TIME * speed + 2.0 * VEH_HALF_LEN + CUT_GAP_TIME * speed;
    let x0 = x_cut - MERGE_VEHICLE_SPEED * CUT_START_TIME;
    // The lane change itself is unhurried (3.2 s across), which keeps the
    // vehicle hovering on the lane boundary long enough that only early
    // reactions avoid the closing gap.
    let t_in = CUT_START_TIME + 3.2;
    let x_in = x_cut + MERGE_VEHICLE_SPEED * 3.2;
    let t_depart = t_in + 20.0 / MERGE_VEHICLE_SPEED;
    let t_out = t_depart + 2.5;
    let vehicle = ActorScript {
        id: 1,
        class: ObjectClass::Vehicle,
        half_length: VEH_HALF_LEN,
        half_width: VEH_HALF_WID,
        fixed_heading: None,
        knots: vec![
            PoseKnot::new(0.0, x0, LANE_WIDTH),
            PoseKnot::new(CUT_START_TIME, x_cut, LANE_WIDTH),
            PoseKnot::new(t_in, x_in, 0.0),
            PoseKnot::new(t_depart, x_in + 20.0, 0.0),
            PoseKnot::new(t_out, x_in + 35.0, LANE_WIDTH),
            PoseKnot::new(
                SCRIPT_END,
                x_in + 35.0 + MERGE_VEHICLE_SPEED * (SCRIPT_END - t_out),
                LANE_WIDTH,
            ),
        ],
    };
    // Parked just past the cut-in point: the reason the vehicle changes
    // lane. Two of them keep the neighbour lane closed through the whole
    // in-lane stretch, so the blocked ego cannot slip out and overtake
    // into the path of the returning vehicle.
    let obstacles = [
        ActorScript::stationary(
            2,
            ObjectClass::StaticObstacle,
            VEH_HALF_LEN,
            VEH_HALF_WID,
            Vec2::new(x_cut + 10.0, LANE_WIDTH),
            0.0,
        ),
        ActorScript::stationary(
            3,
            ObjectClass::StaticObstacle,
            VEH_HALF_LEN,
            VEH_HALF_WID,
            Vec2::new(x_cut + 28.0, LANE_WIDTH),
            0.0,
        ),
    ];
    (vehicle, obstacles)
}

// ---------------------------------------------------------------------------
// T-junction family (tests 3, 4, 10)
// ---------------------------------------------------------------------------

/// Route vertices of the left turn: straight east, quarter arc, then north
/// up the minor road.
fn junction_route() -> Vec<Vec2> {
    let north_lane_x = JUNCTION_X + LANE_WIDTH / 2.0;
    let arc_start_x = north_lane_x - TURN_RADIUS;
    // Fine arc sampling: coarse facets would bend the lateral frame enough
    // to show up as phantom accelerations in offset trajectories.
    let mut pts = vec![Vec2::new(0.0, 0.0)];
    for i in 0..=90 {
        let phi = std::f64::consts::FRAC_PI_2 * i as f64 / 90.0;
        pts.push(Vec2::new(
            arc_start_x + TURN_RADIUS * phi.sin(),
            TURN_RADIUS * (1.0 - phi.cos()),
        ));
    }
    pts.push(Vec2::new(north_lane_x, JUNCTION_GOAL_Y + 20.0));
    pts
}

/// Point where the turning route crosses a horizontal line at `y`, on the
/// arc below its apex and on the straight northbound leg above it.
fn turn_crossing(y: f64) -> Vec2 {
    let north_lane_x = JUNCTION_X + LANE_WIDTH / 2.0;
    if y >= TURN_RADIUS {
        return Vec2::new(north_lane_x, y);
    }
    let arc_start_x = north_lane_x - TURN_RADIUS;
    let phi = (1.0 - y / TURN_RADIUS).acos();
    Vec2::new(arc_start_x + TURN_RADIUS * phi.sin(), y)
}

fn junction_base(speed: f64) -> ScenarioSpec {
    let route = junction_route();
    let line = Polyline::new(route.clone());
    let goal_pt = Vec2::new(JUNCTION_X + LANE_WIDTH / 2.0, JUNCTION_GOAL_Y);
    let (goal_station, _) = line.project(goal_pt);
    let major = AaRect::new(
        -10.0,
        -LANE_WIDTH / 2.0 - SHOULDER,
        JUNCTION_X + 60.0,
        1.5 * LANE_WIDTH + SHOULDER,
    );
    let minor = AaRect::new(
        JUNCTION_X - LANE_WIDTH - SHOULDER,
        -LANE_WIDTH / 2.0 - SHOULDER,
        JUNCTION_X + LANE_WIDTH + SHOULDER,
        JUNCTION_GOAL_Y + 30.0,
    );
    base_spec("junction", vec![major, minor], route, goal_station, speed)
}

/// Unobstructed arrival times at the junction conflict points.
#[derive(Debug, Clone, Copy)]
pub struct JunctionTiming {
    /// Ego crossing of the oncoming lane (s).
    pub vehicle_conflict: f64,
    /// Ego crossing of the crosswalk on the minor road (s).
    pub ped_conflict: f64,
    /// Unobstructed time to the goal (s). The turn forces a slowdown the
    /// straight-line budget formula knows nothing about, so junction
    /// scenarios derive their budget from this instead.
    pub completion: f64,
}

fn config_fingerprint(sim: &SimConfig) -> u64 {
    let text = serde_json::to_string(sim).unwrap_or_default();
    let mut h = std::collections::hash_map::DefaultHasher::new();
    text.hash(&mut h);
    h.finish()
}

fn station_crossing_time(trace: &[StepRecord], station: f64) -> Option<f64> {
    let idx = trace.iter().position(|r| r.station >= station)?;
    if idx == 0 {
        return Some(trace[0].time);
    }
    let a = &trace[idx - 1];
    let b = &trace[idx];
    if b.station - a.station < 1e-12 {
        return Some(b.time);
    }
    Some(a.time + (station - a.station) / (b.station - a.station) * (b.time - a.time))
}

/// Reference run: when does an unobstructed single-channel ego reach each
/// junction conflict point at this target speed? Cached per (config, speed).
pub fn junction_timing(sim: &SimConfig, speed: f64) -> Result<JunctionTiming> {
    static CACHE: OnceLock<Mutex<HashMap<(u64, u64), JunctionTiming>>> = OnceLock::new();
    let key = (config_fingerprint(sim), speed.to_bits());
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&key) {
        return Ok(*t);
    }

    let mut spec = junction_base(speed);
    spec.name = format!("junction-reference-v{speed:.0}");
    // Generous budget: the reference only measures how long the route takes.
    spec.time_budget += 30.0;
    let res = run(Architecture::SingleChannel, &spec, sim, true);
    if !res.goal_reached {
        return Err(SimError::Scenario(format!(
            "unobstructed junction reference run at {speed} m/s failed to reach the goal \
             (final station {:.1} of {:.1}, budget {:.1} s)",
            res.final_station, spec.goal_station, spec.time_budget
        )));
    }
    let line = Polyline::new(spec.route.clone());
    let (s_vehicle, _) = line.project(turn_crossing(ONCOMING_Y));
    let (s_ped, _) = line.project(turn_crossing(CROSSWALK_Y));
    let vehicle_conflict = station_crossing_time(&res.trace, s_vehicle).ok_or_else(|| {
        SimError::Scenario("reference run never crossed the oncoming lane".into())
    })?;
    let ped_conflict = station_crossing_time(&res.trace, s_ped)
        .ok_or_else(|| SimError::Scenario("reference run never crossed the crosswalk".into()))?;
    let completion = res
        .completion_time
        .ok_or_else(|| SimError::Scenario("reference run has no completion time".into()))?;
    let timing = JunctionTiming { vehicle_conflict, ped_conflict, completion };
    cache.lock().unwrap().insert(key, timing);
    Ok(timing)
}

fn oncoming_vehicle(t_conflict: f64) -> ActorScript {
    let conflict = turn_crossing(ONCOMING_Y);
    let x0 = conflict.x + ONCOMING_SPEED * t_conflict;
    ActorScript {
        id: 1,
        class: ObjectClass::Vehicle,
        half_length: VEH_HALF_LEN,
        half_width: VEH_HALF_WID,
        fixed_heading: None,
        knots: vec![
            PoseKnot::new(0.0, x0, ONCOMING_Y),
            PoseKnot::new(SCRIPT_END, x0 - ONCOMING_SPEED * SCRIPT_END, ONCOMING_Y),
        ],
    }
}

/// Pedestrian approaching the crosswalk from the east, walking west.
fn junction_ped(t_conflict: f64) -> ActorScript {
    let conflict = turn_crossing(CROSSWALK_Y);
    let x0 = conflict.x + WALK_SPEED * t_conflict;
    ActorScript {
        id: 1,
        class: ObjectClass::Pedestrian,
        half_length: PED_HALF,
        half_width: PED_HALF,
        fixed_heading: None,
        knots: vec![
            PoseKnot::new(0.0, x0, CROSSWALK_Y),
            PoseKnot::new(SCRIPT_END, x0 - WALK_SPEED * SCRIPT_END, CROSSWALK_Y),
        ],
    }
}

/// Ghost pedestrian crossing the crosswalk eastward (same initial heading
/// as the ego).
fn junction_ghost(t_conflict: f64) -> ActorScript {
    let conflict = turn_crossing(CROSSWALK_Y);
    let x0 = conflict.x - WALK_SPEED * t_conflict;
    ActorScript {
        id: 901,
        class: ObjectClass::Pedestrian,
        half_length: PED_HALF,
        half_width: PED_HALF,
        fixed_heading: None,
        knots: vec![
            PoseKnot::new(0.0, x0, CROSSWALK_Y),
            PoseKnot::new(SCRIPT_END, x0 + WALK_SPEED * SCRIPT_END, CROSSWALK_Y),
        ],
    }
}

// ---------------------------------------------------------------------------
// Assembly
// ---------------------------------------------------------------------------

/// The perception or planning fault a test injects into faulted channels.
fn matrix_fault(test: u32) -> Option<Fault> {
    match test {
        1 => Some(Fault::WrongPrediction { id: 1 }),
        2 | 3 => Some(Fault::MissedObject { id: 1 }),
        4 => Some(Fault::LocationOffset { dx: 7.0, dy: 0.0 }),
        5 => Some(Fault::LocationOffset { dx: 0.0, dy: -7.0 }),
        6 | 7 => Some(Fault::DangerousTrajectory { id: 1 }),
        _ => None,
    }
}

/// Expected unobstructed impact time of the conflict object, used to anchor
/// delayed detections and ghost windows.
fn impact_time(test: u32, speed: f64, sim: &SimConfig) -> Result<f64> {
    match test {
        2 => Ok(inlane_impact_time(speed, sim.risk.ego.half_length)),
        3 => Ok(junction_timing(sim, speed)?.vehicle_conflict),
        9 => Ok(GHOST_IMPACT_TIME),
        10 => Ok(junction_timing(sim, speed)?.ped_conflict),
        _ => Err(SimError::Scenario(format!("test {test} has no impact anchor"))),
    }
}

/// Build one scenario of the matrix.
pub fn build(test: u32, variant: Variant, speed: f64, sim: &SimConfig) -> Result<ScenarioSpec> {
    if !TESTS.contains(&test) {
        return Err(SimError::Scenario(format!("unknown test id {test}")));
    }
    if !applicable(test, variant) {
        return Err(SimError::Scenario(format!(
            "test {test} has no {} variant",
            variant.label()
        )));
    }
    if !(1.0..=40.0).contains(&speed) {
        return Err(SimError::Scenario(format!("target speed {speed} out of range")));
    }

    let mut spec = match test {
        1 | 6 => {
            let mut s = merge_base(speed);
            let (vehicle, obstacles) = merging_vehicle(speed);
            s.actors = vec![vehicle, obstacles[0].clone(), obstacles[1].clone()];
            s
        }
        2 | 7 => {
            let mut s = straight_base(speed);
            s.actors = vec![inlane_ped()];
            s
        }
        5 => {
            let mut s = straight_base(speed);
            s.actors = vec![crossing_ped(speed)];
            s
        }
        8 => {
            let mut s = straight_base(speed);
            s.actors = vec![inlane_ped(), adjacent_vehicle(speed)];
            s
        }
        9 => straight_base(speed),
        3 => {
            let timing = junction_timing(sim, speed)?;
            let mut s = junction_base(speed);
            s.time_budget = 1.5 * timing.completion + 5.0;
            s.actors = vec![oncoming_vehicle(timing.vehicle_conflict)];
            s
        }
        4 => {
            let timing = junction_timing(sim, speed)?;
            let mut s = junction_base(speed);
            s.time_budget = 1.5 * timing.completion + 5.0;
            s.actors = vec![junction_ped(timing.ped_conflict)];
            s
        }
        10 => {
            let timing = junction_timing(sim, speed)?;
            let mut s = junction_base(speed);
            s.time_budget = 1.5 * timing.completion + 5.0;
            s
        }
        _ => unreachable!(),
    };

    spec.faults = match (test, variant) {
        (1..=7, Variant::Single) => {
            let fault = matrix_fault(test).expect("tests 1-7 have a fault");
            vec![ChannelFault { channel: 0, fault }]
        }
        (1..=7, Variant::Dual) => {
            let fault = matrix_fault(test).expect("tests 1-7 have a fault");
            vec![
                ChannelFault { channel: 0, fault: fault.clone() },
                ChannelFault { channel: 1, fault },
            ]
        }
        (2 | 3, Variant::Delayed { lead_tenths }) => {
            let lead = lead_tenths as f64 * 0.1;
            let reveal = (impact_time(test, speed, sim)? - lead).max(0.0);
            vec![
                ChannelFault { channel: 0, fault: Fault::MissedObject { id: 1 } },
                ChannelFault {
                    channel: 1,
                    fault: Fault::DelayedDetection { id: 1, reveal_time: reveal },
                },
            ]
        }
        (8, Variant::Single) => vec![
            ChannelFault { channel: 0, fault: Fault::MissedObject { id: 1 } },
            ChannelFault { channel: 1, fault: Fault::MissedObject { id: 2 } },
        ],
        (9 | 10, v @ (Variant::Single | Variant::GhostWindow)) => {
            let t_imp = impact_time(test, speed, sim)?;
            let window = match v {
                Variant::GhostWindow => Some((t_imp - 2.0, t_imp + 0.5)),
                _ => None,
            };
            let script = if test == 9 { inlane_ghost(speed) } else { junction_ghost(t_imp) };
            vec![ChannelFault { channel: 1, fault: Fault::GhostObject { script, window } }]
        }
        _ => unreachable!("applicability already checked"),
    };

    spec.name = format!("t{test:02}-{}-{}-v{:02.0}", test_name(test), variant.label(), speed);
    spec.validate()?;
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn applicability_matrix() {
        assert!(applicable(1, Variant::Single));
        assert!(applicable(10, Variant::Single));
        assert!(applicable(7, Variant::Dual));
        assert!(!applicable(8, Variant::Dual));
        assert!(applicable(2, Variant::Delayed { lead_tenths: 5 }));
        assert!(!applicable(4, Variant::Delayed { lead_tenths: 5 }));
        assert!(!applicable(2, Variant::Delayed { lead_tenths: 12 }));
        assert!(applicable(9, Variant::GhostWindow));
        assert!(!applicable(2, Variant::GhostWindow));
    }

    #[test]
    fn straight_family_builds_and_validates() {
        let sim = SimConfig::standard();
        for test in [2, 5, 7, 8, 9] {
            for &speed in &[8.0, 17.0, 25.0] {
                let spec = build(test, Variant::Single, speed, &sim).unwrap();
                assert!(spec.validate().is_ok());
                assert!(!spec.faults.is_empty(), "test {test} has faults");
            }
        }
    }

    #[test]
    fn merge_family_gap_scales_with_speed() {
        let sim = SimConfig::standard();
        let slow = build(1, Variant::Single, 8.0, &sim).unwrap();
        let fast = build(1, Variant::Single, 25.0, &sim).unwrap();
        let cut_x = |s: &ScenarioSpec| s.actors[0].knots[1].x;
        assert!(cut_x(&fast) - cut_x(&slow) > 50.0);
        // The vehicle starts ahead of the ego and inside the road.
        assert!(slow.actors[0].knots[0].x > EGO_START_X);
    }

    #[test]
    fn dual_variant_mirrors_fault_into_second_channel() {
        let sim = SimConfig::standard();
        let spec = build(6, Variant::Dual, 12.0, &sim).unwrap();
        assert_eq!(spec.faults.len(), 2);
        assert_eq!(spec.faults[0].fault, spec.faults[1].fault);
        assert_eq!(spec.faults[0].channel, 0);
        assert_eq!(spec.faults[1].channel, 1);
    }

    #[test]
    fn inlane_impact_time_matches_cruise_arithmetic() {
        // 122.35 m of closure at (v - 1.4) m/s.
        let t = inlane_impact_time(15.0, 2.35);
        assert!((t - 122.35 / 13.6).abs() < 1e-9);
    }

    #[test]
    fn junction_reference_run_times_are_ordered_and_cached() {
        let sim = SimConfig::standard();
        let t17 = junction_timing(&sim, 17.0).unwrap();
        // Crosswalk lies past the oncoming lane on the turn.
        assert!(t17.ped_conflict > t17.vehicle_conflict);
        let t8 = junction_timing(&sim, 8.0).unwrap();
        assert!(t8.vehicle_conflict > t17.vehicle_conflict);
        // Second lookup hits the cache and agrees exactly.
        let again = junction_timing(&sim, 17.0).unwrap();
        assert_eq!(again.vehicle_conflict.to_bits(), t17.vehicle_conflict.to_bits());
    }

    #[test]
    fn delayed_variant_places_reveal_before_impact() {
        let sim = SimConfig::standard();
        let spec = build(2, Variant::Delayed { lead_tenths: 5 }, 17.0, &sim).unwrap();
        let reveal = spec
            .faults
            .iter()
            .find_map(|cf| match cf.fault {
                Fault::DelayedDetection { reveal_time, .. } => Some(reveal_time),
                _ => None,
            })
            .unwrap();
        let imp = inlane_impact_time(17.0, sim.risk.ego.half_length);
        assert!((imp - reveal - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ghost_window_brackets_impact() {
        let sim = SimConfig::standard();
        let spec = build(9, Variant::GhostWindow, 20.0, &sim).unwrap();
        match &spec.faults[0].fault {
            Fault::GhostObject { window: Some((a, b)), .. } => {
                assert!((a - 2.5).abs() < 1e-9);
                assert!((b - 5.0).abs() < 1e-9);
            }
            other => panic!("expected windowed ghost, got {other:?}"),
        }
        // Full-duration variant has no window.
        let full = build(9, Variant::Single, 20.0, &sim).unwrap();
        assert!(matches!(
            &full.faults[0].fault,
            Fault::GhostObject { window: None, .. }
        ));
    }
}
