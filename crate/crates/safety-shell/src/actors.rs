//! Scripted traffic participants.
//!
//! Actors move along time-stamped waypoint scripts with piecewise-constant
//! speed. Scripts are plain data — fully deterministic and serializable —
//! and double as the motion source for injected ghost objects.

use serde::{Deserialize, Serialize};

use crate::geom::{Footprint, Vec2};
use crate::world::{ObjState, ObjectClass};

/// One time-stamped waypoint of an actor script.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseKnot {
    /// Simulation time at which the actor is at this waypoint (s).
    pub time: f64,
    pub x: f64,
    pub y: f64,
}

impl PoseKnot {
    pub fn new(time: f64, x: f64, y: f64) -> Self {
        PoseKnot { time, x, y }
    }

    fn pos(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }
}

/// Deterministic scripted motion of one traffic participant.
///
/// Between consecutive knots the actor moves in a straight line at constant
/// speed; before the first and after the last knot it stands still. Repeated
/// positions with increasing times encode waiting phases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorScript {
    pub id: u32,
    pub class: ObjectClass,
    pub half_length: f64,
    pub half_width: f64,
    /// Heading override for actors whose orientation is not implied by
    /// motion (standing obstacles, waiting pedestrians).
    pub fixed_heading: Option<f64>,
    /// Waypoints in strictly increasing time order.
    pub knots: Vec<PoseKnot>,
}

impl ActorScript {
    /// Convenience constructor for a stationary actor.
    pub fn stationary(id: u32, class: ObjectClass, half_length: f64, half_width: f64, pos: Vec2, heading: f64) -> Self {
        ActorScript {
            id,
            class,
            half_length,
            half_width,
            fixed_heading: Some(heading),
            knots: vec![PoseKnot::new(0.0, pos.x, pos.y)],
        }
    }

    /// Ground-truth kinematic state at simulation time `t`.
    pub fn state_at(&self, t: f64) -> ObjState {
        assert!(!self.knots.is_empty(), "actor script needs at least one knot");
        let n = self.knots.len();
        if n == 1 || t <= self.knots[0].time {
            return ObjState {
                pos: self.knots[0].pos(),
                heading: self.heading_near(0),
                speed: 0.0,
            };
        }
        if t >= self.knots[n - 1].time {
            return ObjState {
                pos: self.knots[n - 1].pos(),
                heading: self.heading_near(n.saturating_sub(2)),
                speed: 0.0,
            };
        }
        // Index of the segment containing t.
        let seg = self.knots.partition_point(|k| k.time <= t) - 1;
        let a = &self.knots[seg];
        let b = &self.knots[seg + 1];
        let dt = b.time - a.time;
        let alpha = (t - a.time) / dt;
        let pos = a.pos() + (b.pos() - a.pos()).scale(alpha);
        let dist = a.pos().dist(b.pos());
        if dist < 1e-9 {
            // Waiting phase.
            ObjState { pos, heading: self.heading_near(seg), speed: 0.0 }
        } else {
            let dir = (b.pos() - a.pos()).scale(1.0 / dist);
            ObjState { pos, heading: dir.y.atan2(dir.x), speed: dist / dt }
        }
    }

    /// Ground-truth footprint at simulation time `t`.
    pub fn footprint_at_time(&self, t: f64) -> Footprint {
        let st = self.state_at(t);
        Footprint {
            center: st.pos,
            heading: st.heading,
            half_length: self.half_length,
            half_width: self.half_width,
        }
    }

    /// Heading of the closest non-degenerate segment to `seg`, searching
    /// forward first; falls back to the fixed heading, then to zero.
    fn heading_near(&self, seg: usize) -> f64 {
        if let Some(h) = self.fixed_heading {
            return h;
        }
        let n = self.knots.len();
        let dir_of = |i: usize| -> Option<f64> {
            let a = self.knots[i].pos();
            let b = self.knots[i + 1].pos();
            if a.dist(b) < 1e-9 {
                None
            } else {
                let d = b - a;
                Some(d.y.atan2(d.x))
            }
        };
        for i in seg..n.saturating_sub(1) {
            if let Some(h) = dir_of(i) {
                return h;
            }
        }
        for i in (0..seg.min(n.saturating_sub(1))).rev() {
            if let Some(h) = dir_of(i) {
                return h;
            }
        }
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn walks_between_knots_at_constant_speed() {
        let script = ActorScript {
            id: 7,
            class: ObjectClass::Pedestrian,
            half_length: 0.3,
            half_width: 0.3,
            fixed_heading: None,
            knots: vec![PoseKnot::new(2.0, 0.0, 0.0), PoseKnot::new(12.0, 14.0, 0.0)],
        };
        let before = script.state_at(0.0);
        assert_eq!(before.speed, 0.0);
        assert_eq!(before.pos, Vec2::new(0.0, 0.0));

        let mid = script.state_at(7.0);
        assert!((mid.speed - 1.4).abs() < 1e-12);
        assert!((mid.pos.x - 7.0).abs() < 1e-12);

        let after = script.state_at(20.0);
        assert_eq!(after.speed, 0.0);
        assert!((after.pos.x - 14.0).abs() < 1e-12);
    }

    #[test]
    fn waiting_phase_keeps_heading_of_next_leg() {
        let script = ActorScript {
            id: 1,
            class: ObjectClass::Pedestrian,
            half_length: 0.3,
            half_width: 0.3,
            fixed_heading: None,
            knots: vec![
                PoseKnot::new(0.0, 5.0, 1.0),
                PoseKnot::new(4.0, 5.0, 1.0),
                PoseKnot::new(9.0, 5.0, 8.0),
            ],
        };
        let waiting = script.state_at(2.0);
        assert_eq!(waiting.speed, 0.0);
        assert!((waiting.heading - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
    }
}
