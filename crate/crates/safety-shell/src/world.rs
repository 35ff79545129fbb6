//! World-model value types: ego state, object tracks with predictions,
//! drivable area, route, and candidate trajectories.
//!
//! Everything here is an immutable value type; world models are rebuilt from
//! ground truth every step, so instances can be shared freely across channels
//! and runs without interior mutability.

use crate::geom::{AaRect, Footprint, Polyline, Vec2};
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Ego vehicle state at one time step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoState {
    pub pos: Vec2,
    /// Heading in radians, CCW from +x.
    pub heading: f64,
    /// Ground speed in m/s (non-negative).
    pub speed: f64,
    /// Longitudinal acceleration in m/s^2 realized over the step starting
    /// at this state.
    pub long_accel: f64,
}

impl EgoState {
    pub fn footprint(&self, shape: &EgoShape) -> Footprint {
        Footprint::new(self.pos, self.heading, shape.half_length, shape.half_width)
    }
}

/// Ego footprint dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EgoShape {
    pub half_length: f64,
    pub half_width: f64,
}

impl Default for EgoShape {
    fn default() -> Self {
        // 4.7 m x 1.8 m passenger car.
        EgoShape { half_length: 2.35, half_width: 0.9 }
    }
}

/// Object classification, selecting the severity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObjectClass {
    Vehicle,
    Pedestrian,
    StaticObstacle,
}

/// Pose and speed of a tracked object at one prediction step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjState {
    pub pos: Vec2,
    pub heading: f64,
    pub speed: f64,
}

impl ObjState {
    pub fn velocity(&self) -> Vec2 {
        Vec2::from_heading(self.heading).scale(self.speed)
    }
}

/// A tracked object with its predicted motion.
///
/// `states[tau]` is the predicted state `tau` prediction steps ahead;
/// `states[0]` is the current state. The vector always holds `tau_h + 1`
/// entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub id: u32,
    pub class: ObjectClass,
    pub half_length: f64,
    pub half_width: f64,
    /// Existence confidence in [0, 1].
    pub existence: f64,
    pub states: Vec<ObjState>,
}

impl ObjectTrack {
    pub fn footprint_at(&self, tau: usize) -> Footprint {
        let s = &self.states[tau.min(self.states.len() - 1)];
        Footprint::new(s.pos, s.heading, self.half_length, self.half_width)
    }

    pub fn circumradius(&self) -> f64 {
        (self.half_length * self.half_length + self.half_width * self.half_width).sqrt()
    }
}

/// Drivable area as a union of axis-aligned rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Road {
    pub rects: Vec<AaRect>,
}

impl Road {
    /// Containment margin of a footprint inside the drivable area.
    ///
    /// Each corner (and the center) is scored by the rectangle that holds it
    /// deepest; the footprint margin is the weakest such point. Scoring
    /// per-point rather than per-rectangle keeps a footprint that straddles
    /// two overlapping rectangles — e.g. mid-turn through a junction — from
    /// reporting a spuriously small margin. Negative when some corner lies
    /// outside every rectangle.
    pub fn margin(&self, fp: &Footprint) -> f64 {
        let mut points = fp.corners().to_vec();
        points.push(fp.center);
        let mut worst = f64::INFINITY;
        for p in points {
            let mut best = f64::NEG_INFINITY;
            for r in &self.rects {
                best = best.max(r.containment_margin(p));
            }
            worst = worst.min(best);
        }
        worst
    }
}

/// Route the ego is asked to follow: a reference line plus the goal station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub line: Polyline,
    /// Station along `line` at which the journey counts as completed.
    pub goal_station: f64,
}

/// One channel's view of the world at the current step.
#[derive(Debug, Clone)]
pub struct WorldModel {
    pub tracks: Vec<ObjectTrack>,
    pub road: Arc<Road>,
    pub route: Arc<Route>,
}

/// A planned ego trajectory over the prediction horizon.
///
/// Always holds exactly `tau_h + 1` states; `states[0]` is the state the
/// trajectory starts from and `states[1]` is what the ego executes next.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<EgoState>,
}

impl Trajectory {
    /// Path polyline through the trajectory positions.
    pub fn path(&self) -> Polyline {
        Polyline::new(self.states.iter().map(|s| s.pos).collect())
    }

    /// Shift the trajectory one step forward in time, extrapolating the final
    /// state with constant speed along its heading. Used when a controller
    /// re-anchors last step's plan at the ego's new state.
    pub fn advance(&self) -> Trajectory {
        let mut states: Vec<EgoState> = self.states[1..].to_vec();
        let last = *states.last().expect("trajectory is never empty");
        // One prediction step at constant speed; step size is implied by the
        // spacing already present in the trajectory.
        let dt = infer_step_seconds(&self.states);
        let pos = last.pos + Vec2::from_heading(last.heading).scale(last.speed * dt);
        states.push(EgoState { pos, heading: last.heading, speed: last.speed, long_accel: 0.0 });
        Trajectory { states }
    }
}

/// Infer the time step from speeds and spacing; falls back to 0.1 s when the
/// trajectory is stationary.
fn infer_step_seconds(states: &[EgoState]) -> f64 {
    for w in states.windows(2) {
        if w[0].speed > 0.5 {
            let d = w[0].pos.dist(w[1].pos);
            let dt = d / w[0].speed;
            if dt.is_finite() && dt > 1e-6 {
                return dt;
            }
        }
    }
    0.1
}

/// Prediction-step count that is either finite or unbounded.
///
/// Ordering treats `Infinite` as greater than every finite value, which is
/// exactly how risk-free horizons compare in the arbitration rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tau {
    Finite(u32),
    Infinite,
}

impl Tau {
    pub fn is_infinite(&self) -> bool {
        matches!(self, Tau::Infinite)
    }

    /// Finite value accessor; panics on `Infinite`.
    pub fn finite(&self) -> u32 {
        match self {
            Tau::Finite(v) => *v,
            Tau::Infinite => panic!("expected finite step count"),
        }
    }

    /// Compare against a finite threshold: `self >= Finite(t)`.
    pub fn at_least(&self, t: u32) -> bool {
        match self {
            Tau::Finite(v) => *v >= t,
            Tau::Infinite => true,
        }
    }

    /// Compare against a finite threshold: `self <= Finite(t)`.
    pub fn at_most(&self, t: u32) -> bool {
        match self {
            Tau::Finite(v) => *v <= t,
            Tau::Infinite => false,
        }
    }
}

impl PartialOrd for Tau {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tau {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use Tau::*;
        match (self, other) {
            (Infinite, Infinite) => std::cmp::Ordering::Equal,
            (Infinite, Finite(_)) => std::cmp::Ordering::Greater,
            (Finite(_), Infinite) => std::cmp::Ordering::Less,
            (Finite(a), Finite(b)) => a.cmp(b),
        }
    }
}

impl std::fmt::Display for Tau {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Tau::Finite(v) => write!(f, "{v}"),
            Tau::Infinite => write!(f, "inf"),
        }
    }
}
