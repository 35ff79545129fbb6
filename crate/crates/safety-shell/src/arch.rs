//! The compared vehicle architectures.
//!
//! Every architecture implements [`Controller`]: once per simulation step it
//! senses the scripted world through its own channels (with that channel's
//! injected faults), plans, and returns the trajectory to execute. The run
//! harness applies `states[1]` of the returned trajectory as the next ego
//! state, so controllers are pure state machines over ground truth inputs.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::actors::ActorScript;
use crate::channel::{dangerous_target, sense, Fault, LatticePlanner, PlanOutcome};
use crate::clock::SimClock;
use crate::config::SimConfig;
use crate::risk::{
    escape_trajectory_with_delay, grid_all_below, last_safe_intervention, RiskConfig,
};
use crate::shell::{arbitrate, ArbiterState, Decision, PreferenceState, ShellConfig};
use crate::world::{EgoState, Road, Route, Tau, Trajectory, WorldModel};

/// Track-id offset for fused duplicates that disagree between channels.
const SPLIT_TRACK_ID_OFFSET: u32 = 1_000_000;

/// The architectures under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Architecture {
    /// One sense-plan-act channel, no supervision.
    SingleChannel,
    /// Channel 1 acts; an independent monitor (channel 2's world model)
    /// triggers a latched emergency stop when the actor's plan looks risky.
    MonitorActuator,
    /// Both channels' perceptions are fused into one world model for a
    /// single planner; planning failure latches an emergency stop.
    FusedWorldModel,
    /// Channel 1 acts; formal distance rules checked against all channels'
    /// world models force braking while violated.
    RuleChecker,
    /// Safety shell arbitrating channels 1-2.
    Shell2,
    /// Safety shell arbitrating channels 1-3.
    Shell3,
}

impl Architecture {
    pub const ALL: [Architecture; 6] = [
        Architecture::SingleChannel,
        Architecture::MonitorActuator,
        Architecture::FusedWorldModel,
        Architecture::RuleChecker,
        Architecture::Shell2,
        Architecture::Shell3,
    ];

    /// Number of sense-and-plan channels the architecture instantiates.
    pub fn channels(&self) -> usize {
        match self {
            Architecture::SingleChannel => 1,
            Architecture::MonitorActuator
            | Architecture::FusedWorldModel
            | Architecture::Shell2 => 2,
            Architecture::RuleChecker | Architecture::Shell3 => 3,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Architecture::SingleChannel => "SC",
            Architecture::MonitorActuator => "MA",
            Architecture::FusedWorldModel => "FWM",
            Architecture::RuleChecker => "RSS",
            Architecture::Shell2 => "Shell-2",
            Architecture::Shell3 => "Shell-3",
        }
    }
}

impl fmt::Display for Architecture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Architecture {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sc" => Ok(Architecture::SingleChannel),
            "ma" => Ok(Architecture::MonitorActuator),
            "fwm" => Ok(Architecture::FusedWorldModel),
            "rss" => Ok(Architecture::RuleChecker),
            "shell2" | "shell-2" => Ok(Architecture::Shell2),
            "shell3" | "shell-3" => Ok(Architecture::Shell3),
            other => Err(format!(
                "unknown architecture '{other}' (expected sc, ma, fwm, rss, shell2 or shell3)"
            )),
        }
    }
}

/// Everything a controller needs to run one scenario instance.
#[derive(Debug, Clone)]
pub struct RunSetup {
    pub sim: SimConfig,
    pub road: Arc<Road>,
    pub route: Arc<Route>,
    pub actors: Vec<ActorScript>,
    /// Injected faults per channel index (always three entries; each
    /// architecture uses as many as it has channels).
    pub faults: Vec<Vec<Fault>>,
    pub target_speed: f64,
    pub initial_ego: EgoState,
}

/// What an architecture did at one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepLabel {
    /// Executing a nominal channel plan.
    Nominal,
    /// Shell moved to a more preferred channel.
    PreferenceSwitch,
    /// Shell left a channel that could no longer be aborted in time.
    SafetySwitch,
    /// Shell executes the escape maneuver.
    Escape,
    /// Latched emergency stop (monitor-actuator / fused-world-model).
    Fallback,
    /// Rule checker braking while a distance rule is violated.
    RuleBrake,
}

/// Per-step controller output consumed by the run harness.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub trajectory: Trajectory,
    pub label: StepLabel,
    pub active_channel: usize,
    /// Last safe intervention step per channel (shell architectures only).
    pub tau_l: Vec<Tau>,
    /// Consideration time per channel in steps (shell architectures only).
    pub tau_c: Vec<u32>,
}

pub trait Controller {
    fn step(&mut self, k: u32, time: f64, ego: &EgoState) -> StepOutcome;
    fn architecture(&self) -> Architecture;
}

/// Instantiate a controller for `arch` on the given run.
pub fn build_controller(arch: Architecture, setup: &RunSetup) -> Box<dyn Controller> {
    match arch {
        Architecture::SingleChannel => Box::new(SingleChannel::new(setup)),
        Architecture::MonitorActuator => Box::new(MonitorActuator::new(setup)),
        Architecture::FusedWorldModel => Box::new(FusedWorldModel::new(setup)),
        Architecture::RuleChecker => Box::new(RuleChecker::new(setup)),
        Architecture::Shell2 => Box::new(ShellController::new(setup, 2, Architecture::Shell2)),
        Architecture::Shell3 => Box::new(ShellController::new(setup, 3, Architecture::Shell3)),
    }
}

/// Shared per-channel planning equipment.
struct ChannelRig {
    planner: LatticePlanner,
    faults: Vec<Fault>,
    ignored: Option<u32>,
}

impl ChannelRig {
    fn new(setup: &RunSetup, channel: usize) -> Self {
        let faults = setup.faults.get(channel).cloned().unwrap_or_default();
        let ignored = dangerous_target(&faults);
        let planner = LatticePlanner::new(
            setup.route.clone(),
            setup.sim.channels[channel],
            setup.sim.planner,
            setup.sim.risk.clone(),
            setup.sim.clock(),
        );
        ChannelRig { planner, faults, ignored }
    }

    fn sense(&self, common: &Common, time: f64) -> WorldModel {
        sense(&common.actors, time, &self.faults, &common.template, &common.clock)
    }

    fn plan(&self, common: &Common, ego: &EgoState, wm: &WorldModel) -> PlanOutcome {
        self.planner.plan(ego, wm, common.target_speed, self.ignored)
    }
}

/// State shared by every architecture.
struct Common {
    actors: Vec<ActorScript>,
    template: WorldModel,
    clock: SimClock,
    risk: RiskConfig,
    target_speed: f64,
    escape_delay_steps: u32,
    prev_exec: Option<Trajectory>,
}

impl Common {
    fn new(setup: &RunSetup) -> Self {
        let clock = setup.sim.clock();
        Common {
            actors: setup.actors.clone(),
            template: WorldModel {
                tracks: vec![],
                road: setup.road.clone(),
                route: setup.route.clone(),
            },
            clock,
            risk: setup.sim.risk.clone(),
            target_speed: setup.target_speed,
            escape_delay_steps: clock.steps_of(setup.sim.risk.escape_delay),
            prev_exec: None,
        }
    }

    fn finish(&mut self, outcome: StepOutcome) -> StepOutcome {
        self.prev_exec = Some(outcome.trajectory.clone());
        outcome
    }

    /// Base trajectory for a continued emergency stop: last step's executed
    /// trajectory shifted to the present.
    fn carried_base(&self, fallback: &Trajectory) -> Trajectory {
        match &self.prev_exec {
            Some(t) => t.advance(),
            None => fallback.clone(),
        }
    }
}

fn plain_outcome(trajectory: Trajectory, label: StepLabel, channel: usize) -> StepOutcome {
    StepOutcome { trajectory, label, active_channel: channel, tau_l: vec![], tau_c: vec![] }
}

// ---------------------------------------------------------------------------
// Single channel
// ---------------------------------------------------------------------------

struct SingleChannel {
    common: Common,
    rig: ChannelRig,
}

impl SingleChannel {
    fn new(setup: &RunSetup) -> Self {
        SingleChannel { common: Common::new(setup), rig: ChannelRig::new(setup, 0) }
    }
}

impl Controller for SingleChannel {
    fn step(&mut self, _k: u32, time: f64, ego: &EgoState) -> StepOutcome {
        let wm = self.rig.sense(&self.common, time);
        let plan = self.rig.plan(&self.common, ego, &wm);
        self.common
            .finish(plain_outcome(plan.trajectory, StepLabel::Nominal, 0))
    }

    fn architecture(&self) -> Architecture {
        Architecture::SingleChannel
    }
}

// ---------------------------------------------------------------------------
// Monitor-actuator
// ---------------------------------------------------------------------------

/// Latched emergency-stop state: once engaged it never releases, and the
/// actuation delay is consumed across consecutive braking steps instead of
/// restarting on every replan.
struct AebLatch {
    active: bool,
    hold: u32,
}

impl AebLatch {
    fn new() -> Self {
        AebLatch { active: false, hold: 0 }
    }

    fn engage(&mut self, delay_steps: u32) {
        if !self.active {
            self.active = true;
            self.hold = delay_steps;
        }
    }

    fn braking_trajectory(
        &mut self,
        base: &Trajectory,
        clock: &SimClock,
        risk: &RiskConfig,
    ) -> Trajectory {
        let t = escape_trajectory_with_delay(base, 0, self.hold, clock, risk);
        self.hold = self.hold.saturating_sub(1);
        t
    }
}

struct MonitorActuator {
    common: Common,
    rig: ChannelRig,
    monitor_faults: Vec<Fault>,
    latch: AebLatch,
}

impl MonitorActuator {
    fn new(setup: &RunSetup) -> Self {
        MonitorActuator {
            common: Common::new(setup),
            rig: ChannelRig::new(setup, 0),
            monitor_faults: setup.faults.get(1).cloned().unwrap_or_default(),
            latch: AebLatch::new(),
        }
    }
}

impl Controller for MonitorActuator {
    fn step(&mut self, _k: u32, time: f64, ego: &EgoState) -> StepOutcome {
        let c = &self.common;
        if !self.latch.active {
            let wm1 = self.rig.sense(c, time);
            let plan = self.rig.plan(c, ego, &wm1);
            let wm2 = sense(&c.actors, time, &self.monitor_faults, &c.template, &c.clock);
            let monitor_ok = grid_all_below(
                &plan.trajectory,
                &[&wm2],
                &c.clock,
                &c.risk,
                c.risk.r_threshold,
            );
            if monitor_ok {
                return self
                    .common
                    .finish(plain_outcome(plan.trajectory, StepLabel::Nominal, 0));
            }
            self.latch.engage(c.escape_delay_steps);
            let traj =
                self.latch
                    .braking_trajectory(&plan.trajectory, &c.clock, &c.risk);
            return self.common.finish(plain_outcome(traj, StepLabel::Fallback, 0));
        }
        let base = c.carried_base(&straight_hold(ego, &c.clock));
        let traj = self.latch.braking_trajectory(&base, &c.clock, &c.risk);
        self.common.finish(plain_outcome(traj, StepLabel::Fallback, 0))
    }

    fn architecture(&self) -> Architecture {
        Architecture::MonitorActuator
    }
}

/// Constant-speed straight-line trajectory from the current state; only used
/// as a braking base when no plan has ever been executed.
fn straight_hold(ego: &EgoState, clock: &SimClock) -> Trajectory {
    let n = clock.tau_h() as usize + 1;
    let dir = crate::geom::Vec2::from_heading(ego.heading);
    let dp = clock.delta_p();
    let states = (0..n)
        .map(|tau| EgoState {
            pos: ego.pos + dir.scale(ego.speed * tau as f64 * dp),
            heading: ego.heading,
            speed: ego.speed,
            long_accel: 0.0,
        })
        .collect();
    Trajectory { states }
}

// ---------------------------------------------------------------------------
// Fused world model
// ---------------------------------------------------------------------------

struct FusedWorldModel {
    common: Common,
    rig: ChannelRig,
    second_faults: Vec<Fault>,
    latch: AebLatch,
}

impl FusedWorldModel {
    fn new(setup: &RunSetup) -> Self {
        FusedWorldModel {
            common: Common::new(setup),
            rig: ChannelRig::new(setup, 0),
            second_faults: setup.faults.get(1).cloned().unwrap_or_default(),
            latch: AebLatch::new(),
        }
    }
}

/// Union fusion: keep every track either channel perceives. Tracks with the
/// same id and matching state are deduplicated; disagreeing duplicates are
/// kept as separate hypotheses under a shifted id.
fn fuse(wm1: &WorldModel, wm2: &WorldModel) -> WorldModel {
    let mut tracks = wm1.tracks.clone();
    for t2 in &wm2.tracks {
        match tracks.iter().find(|t1| t1.id == t2.id) {
            Some(t1)
                if !t1.states.is_empty()
                    && !t2.states.is_empty()
                    && t1.states[0].pos.dist(t2.states[0].pos) < 1e-6
                    && (t1.states[0].speed - t2.states[0].speed).abs() < 1e-9 => {}
            Some(_) => {
                let mut split = t2.clone();
                split.id += SPLIT_TRACK_ID_OFFSET;
                tracks.push(split);
            }
            None => tracks.push(t2.clone()),
        }
    }
    WorldModel { tracks, road: wm1.road.clone(), route: wm1.route.clone() }
}

impl Controller for FusedWorldModel {
    fn step(&mut self, _k: u32, time: f64, ego: &EgoState) -> StepOutcome {
        let c = &self.common;
        let wm1 = self.rig.sense(c, time);
        let wm2 = sense(&c.actors, time, &self.second_faults, &c.template, &c.clock);
        let fused = fuse(&wm1, &wm2);
        let plan = self.rig.plan(c, ego, &fused);
        let safe = plan.feasible
            && grid_all_below(
                &plan.trajectory,
                &[&fused],
                &c.clock,
                &c.risk,
                c.risk.r_threshold,
            );
        // The brake releases once a fused-model plan is viable again and any
        // fresh engagement has at least run through its reaction delay.
        if safe && (!self.latch.active || self.latch.hold == 0) {
            self.latch = AebLatch::new();
            return self
                .common
                .finish(plain_outcome(plan.trajectory, StepLabel::Nominal, 0));
        }
        let fresh = !self.latch.active;
        self.latch.engage(c.escape_delay_steps);
        let base = if fresh {
            plan.trajectory
        } else {
            c.carried_base(&straight_hold(ego, &c.clock))
        };
        let traj = self.latch.braking_trajectory(&base, &c.clock, &c.risk);
        self.common.finish(plain_outcome(traj, StepLabel::Fallback, 0))
    }

    fn architecture(&self) -> Architecture {
        Architecture::FusedWorldModel
    }
}

// ---------------------------------------------------------------------------
// Rule checker
// ---------------------------------------------------------------------------

/// Lateral slack added to the corridor test so small perception jitter does
/// not flip the rule decision (m).
const LATERAL_FLUCTUATION_MARGIN: f64 = 0.5;

/// Standoff kept short of an occupied conflict zone (m). Without it a
/// stopped vehicle would creep right up to the zone edge while it is still
/// claimed.
const CROSSING_HOLD_MARGIN: f64 = 2.0;

struct RuleChecker {
    common: Common,
    rig: ChannelRig,
    all_faults: Vec<Vec<Fault>>,
    rule_cfg: crate::config::RuleCheckerConfig,
    braking: bool,
    hold: u32,
}

impl RuleChecker {
    fn new(setup: &RunSetup) -> Self {
        RuleChecker {
            common: Common::new(setup),
            rig: ChannelRig::new(setup, 0),
            all_faults: setup.faults.clone(),
            rule_cfg: setup.sim.rule_checker,
            braking: false,
            hold: 0,
        }
    }

    /// True when any perceived object violates a right-of-way rule.
    ///
    /// Traffic that enters the ego's route corridor and stays there is held
    /// to the longitudinal distance rule with credit for its own braking
    /// capability. Crossing or oncoming traffic instead claims a conflict
    /// zone on the route for its predicted occupancy window; the rule fires
    /// while the ego can neither stop short of the zone nor clear it before
    /// the window opens.
    fn rules_violated(&self, ego: &EgoState, wms: &[WorldModel]) -> bool {
        let line = &wms[0].route.line; // all channels share road and route
        let cfg = &self.rule_cfg;
        let clock = &self.common.clock;
        let risk = &self.common.risk;
        let (s_ego, _) = line.project(ego.pos);
        let v_r = ego.speed.max(0.0);
        let dp = clock.delta_p();
        let rho = cfg.response_time;
        // Proper-response stopping distance: worst-case acceleration through
        // the response time, then sustained braking at the guaranteed rate.
        let d_stop = v_r * rho
            + 0.5 * cfg.a_max_accel * rho * rho
            + (v_r + rho * cfg.a_max_accel).powi(2) / (2.0 * cfg.b_min_brake);

        for wm in wms {
            for track in &wm.tracks {
                if track.states.is_empty() {
                    continue;
                }
                // Corridor occupancy window over the whole prediction.
                let mut entry: Option<usize> = None;
                let mut exit = track.states.len();
                let mut s_lo = f64::INFINITY;
                let mut s_hi = f64::NEG_INFINITY;
                let mut v_along_entry = 0.0;
                let mut cos_entry = 1.0;
                for (tau, st) in track.states.iter().enumerate() {
                    let (s_obj, lat) = line.project(st.pos);
                    let route_heading = line.heading(s_obj);
                    let rel = st.heading - route_heading;
                    let lat_extent =
                        rel.sin().abs() * track.half_length + rel.cos().abs() * track.half_width;
                    let inside = lat.abs()
                        <= risk.ego.half_width + lat_extent + LATERAL_FLUCTUATION_MARGIN;
                    if inside {
                        let long_extent =
                            rel.cos().abs() * track.half_length + rel.sin().abs() * track.half_width;
                        if entry.is_none() {
                            entry = Some(tau);
                            v_along_entry = st.speed * rel.cos();
                            cos_entry = rel.cos();
                        }
                        s_lo = s_lo.min(s_obj - long_extent);
                        s_hi = s_hi.max(s_obj + long_extent);
                        exit = tau + 1;
                    } else if entry.is_some() {
                        break;
                    }
                }
                let Some(entry) = entry else { continue };
                if s_hi < s_ego - 5.0 || s_lo - s_ego > 160.0 {
                    continue;
                }

                let t_in = entry as f64 * dp;
                let stays = exit == track.states.len();
                if stays && cos_entry > 0.5 && t_in <= cfg.intent_window {
                    // Following case: the object travels the corridor ahead.
                    let s_ego_then = s_ego + v_r * t_in;
                    let gap = s_lo - s_ego_then - risk.ego.half_length;
                    let v_front = v_along_entry.max(0.0);
                    let d_min =
                        (d_stop - v_front * v_front / (2.0 * cfg.b_max_brake)).max(0.0);
                    if gap < d_min {
                        return true;
                    }
                } else {
                    // Conflict zone [s_lo, s_hi], claimed from t_in until the
                    // prediction leaves the corridor. Proceed only when the
                    // zone can be cleared before the window opens; otherwise
                    // hold short of it while it is claimed.
                    let d_zone = s_lo - s_ego - risk.ego.half_length;
                    let t_clear = if v_r > 0.1 {
                        (s_hi - s_ego + risk.ego.half_length).max(0.0) / v_r
                    } else {
                        f64::INFINITY
                    };
                    let can_clear = t_in > t_clear + rho;
                    if !can_clear && d_zone < d_stop + CROSSING_HOLD_MARGIN {
                        return true;
                    }
                }
            }
        }
        false
    }
}

impl Controller for RuleChecker {
    fn step(&mut self, _k: u32, time: f64, ego: &EgoState) -> StepOutcome {
        let c = &self.common;
        let wms: Vec<WorldModel> = (0..3)
            .map(|i| {
                sense(
                    &c.actors,
                    time,
                    self.all_faults.get(i).map(|f| f.as_slice()).unwrap_or(&[]),
                    &c.template,
                    &c.clock,
                )
            })
            .collect();

        if self.rules_violated(ego, &wms) {
            if !self.braking {
                self.braking = true;
                self.hold = c.escape_delay_steps;
            }
            let base = c.carried_base(&straight_hold(ego, &c.clock));
            let traj = escape_trajectory_with_delay(&base, 0, self.hold, &c.clock, &c.risk);
            self.hold = self.hold.saturating_sub(1);
            return self.common.finish(plain_outcome(traj, StepLabel::RuleBrake, 0));
        }
        self.braking = false;
        let plan = self.rig.plan(c, ego, &wms[0]);
        self.common
            .finish(plain_outcome(plan.trajectory, StepLabel::Nominal, 0))
    }

    fn architecture(&self) -> Architecture {
        Architecture::RuleChecker
    }
}

// ---------------------------------------------------------------------------
// Safety shell
// ---------------------------------------------------------------------------

struct ShellController {
    arch: Architecture,
    common: Common,
    rigs: Vec<ChannelRig>,
    shell_cfg: ShellConfig,
    arbiter: ArbiterState,
    prefs: PreferenceState,
    escaping: bool,
    escape_hold: u32,
}

impl ShellController {
    fn new(setup: &RunSetup, channels: usize, arch: Architecture) -> Self {
        assert!(setup.sim.channels.len() >= channels, "config must define every channel");
        let mut shell_cfg = setup.sim.shell_config();
        shell_cfg.tau_c_star.truncate(channels);
        let rigs = (0..channels).map(|i| ChannelRig::new(setup, i)).collect();
        ShellController {
            arch,
            common: Common::new(setup),
            rigs,
            prefs: PreferenceState::new(channels, shell_cfg.k_r),
            shell_cfg,
            arbiter: ArbiterState::new(0),
            escaping: false,
            escape_hold: 0,
        }
    }
}

impl Controller for ShellController {
    fn step(&mut self, k: u32, time: f64, ego: &EgoState) -> StepOutcome {
        let c = &self.common;
        let wms: Vec<WorldModel> = self.rigs.iter().map(|r| r.sense(c, time)).collect();
        let wm_refs: Vec<&WorldModel> = wms.iter().collect();
        let plans: Vec<PlanOutcome> =
            self.rigs.iter().enumerate().map(|(i, r)| r.plan(c, ego, &wms[i])).collect();

        let tau_l: Vec<Tau> = plans
            .iter()
            .map(|p| last_safe_intervention(&p.trajectory, &wm_refs, &c.clock, &c.risk).tau_l)
            .collect();
        let tau_c = self.prefs.update_preferences(&tau_l, &self.shell_cfg);
        let decision = arbitrate(&mut self.arbiter, k, &tau_l, &tau_c, &self.shell_cfg);

        let (trajectory, label) = match decision {
            Decision::Escape { channel } => {
                let remaining =
                    if self.escaping { self.escape_hold } else { c.escape_delay_steps };
                let traj = escape_trajectory_with_delay(
                    &plans[channel].trajectory,
                    0,
                    remaining,
                    &c.clock,
                    &c.risk,
                );
                self.escaping = true;
                self.escape_hold = remaining.saturating_sub(1);
                (traj, StepLabel::Escape)
            }
            Decision::Continue { channel } => {
                self.escaping = false;
                (plans[channel].trajectory.clone(), StepLabel::Nominal)
            }
            Decision::PreferenceSwitch { channel } => {
                self.escaping = false;
                (plans[channel].trajectory.clone(), StepLabel::PreferenceSwitch)
            }
            Decision::SafetySwitch { channel } => {
                self.escaping = false;
                (plans[channel].trajectory.clone(), StepLabel::SafetySwitch)
            }
        };

        self.common.finish(StepOutcome {
            trajectory,
            label,
            active_channel: decision.channel(),
            tau_l,
            tau_c,
        })
    }

    fn architecture(&self) -> Architecture {
        self.arch
    }
}
