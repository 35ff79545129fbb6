//! Channel perception with scripted fault injection.
//!
//! A channel senses the ground-truth actors, predicts each of them forward
//! over the prediction horizon, and assembles its world model. Faults are
//! deterministic transforms of that process: objects can be dropped,
//! displaced, revealed late, given wrong predictions, or invented outright.

use serde::{Deserialize, Serialize};

use crate::actors::ActorScript;
use crate::clock::SimClock;
use crate::geom::Vec2;
use crate::world::{ObjState, ObjectTrack, WorldModel};

/// One scripted perception or planning fault of a single channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fault {
    /// The object never appears in this channel's world model.
    MissedObject { id: u32 },
    /// A non-existent object is perceived, moving per the embedded script;
    /// optionally limited to a time window (s).
    GhostObject {
        script: ActorScript,
        window: Option<(f64, f64)>,
    },
    /// Every perceived object is displaced by a constant offset (m).
    LocationOffset { dx: f64, dy: f64 },
    /// The object's prediction wrongly assumes it keeps its lane: it is
    /// predicted parallel to the route at its current speed, so lateral
    /// intent such as an onset merge is lost.
    WrongPrediction { id: u32 },
    /// The channel's planner ignores the object when choosing a trajectory,
    /// even though the channel still perceives it.
    DangerousTrajectory { id: u32 },
    /// The object stays invisible until the reveal time (s).
    DelayedDetection { id: u32, reveal_time: f64 },
}

/// Constant-velocity prediction from a perceived state.
pub fn predict_constant_velocity(state: ObjState, steps: usize, dp: f64) -> Vec<ObjState> {
    let vel = state.velocity();
    (0..steps)
        .map(|tau| ObjState {
            pos: state.pos + vel.scale(tau as f64 * dp),
            heading: state.heading,
            speed: state.speed,
        })
        .collect()
}

/// Prediction that wrongly assumes the object keeps to its lane: constant
/// scalar speed parallel to the route direction from its current position.
fn predict_lane_keeping(
    state: ObjState,
    steps: usize,
    dp: f64,
    route: &crate::world::Route,
) -> Vec<ObjState> {
    let (s, _) = route.line.project(state.pos);
    let tangent = route.line.tangent(s);
    let vel = state.velocity();
    let sign = if vel.x * tangent.x + vel.y * tangent.y < 0.0 { -1.0 } else { 1.0 };
    let dir = tangent.scale(sign);
    let heading = dir.y.atan2(dir.x);
    (0..steps)
        .map(|tau| ObjState {
            pos: state.pos + dir.scale(state.speed * tau as f64 * dp),
            heading,
            speed: state.speed,
        })
        .collect()
}

/// Target of a planning fault, if this channel has one.
pub fn dangerous_target(faults: &[Fault]) -> Option<u32> {
    faults.iter().find_map(|f| match f {
        Fault::DangerousTrajectory { id } => Some(*id),
        _ => None,
    })
}

/// Build this channel's world model at simulation time `time`.
///
/// `faults` holds only the faults injected into this channel. The returned
/// tracks carry predictions over the full horizon (`tau_h + 1` states).
pub fn sense(
    actors: &[ActorScript],
    time: f64,
    faults: &[Fault],
    template: &WorldModel,
    clock: &SimClock,
) -> WorldModel {
    let steps = clock.tau_h() as usize + 1;
    let dp = clock.delta_p();

    let mut offset = Vec2::new(0.0, 0.0);
    for f in faults {
        if let Fault::LocationOffset { dx, dy } = f {
            offset = offset + Vec2::new(*dx, *dy);
        }
    }
    let missed = |id: u32| {
        faults.iter().any(|f| match f {
            Fault::MissedObject { id: m } => *m == id,
            Fault::DelayedDetection { id: m, reveal_time } => *m == id && time < reveal_time - 1e-9,
            _ => false,
        })
    };
    let wrong_prediction = |id: u32| {
        faults
            .iter()
            .any(|f| matches!(f, Fault::WrongPrediction { id: m } if *m == id))
    };

    let mut tracks = Vec::with_capacity(actors.len() + 1);
    let mut push_track = |script: &ActorScript| {
        let mut state = script.state_at(time);
        state.pos = state.pos + offset;
        let states = if wrong_prediction(script.id) {
            predict_lane_keeping(state, steps, dp, &template.route)
        } else {
            predict_constant_velocity(state, steps, dp)
        };
        tracks.push(ObjectTrack {
            id: script.id,
            class: script.class,
            half_length: script.half_length,
            half_width: script.half_width,
            existence: 1.0,
            states,
        });
    };

    for actor in actors {
        if !missed(actor.id) {
            push_track(actor);
        }
    }
    for f in faults {
        if let Fault::GhostObject { script, window } = f {
            let visible = window.map_or(true, |(a, b)| time >= a - 1e-9 && time <= b + 1e-9);
            if visible {
                push_track(script);
            }
        }
    }

    WorldModel {
        tracks,
        road: template.road.clone(),
        route: template.route.clone(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Polyline;
    use crate::world::{ObjectClass, Road, Route};
    use crate::geom::AaRect;
    use std::sync::Arc;

    fn template() -> WorldModel {
        WorldModel {
            tracks: vec![],
            road: Arc::new(Road { rects: vec![AaRect::new(0.0, -5.0, 100.0, 5.0)] }),
            route: Arc::new(Route {
                line: Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(100.0, 0.0)]),
                goal_station: 90.0,
            }),
        }
    }

    fn walker() -> ActorScript {
        ActorScript {
            id: 3,
            class: ObjectClass::Pedestrian,
            half_length: 0.3,
            half_width: 0.3,
            fixed_heading: None,
            knots: vec![
                crate::actors::PoseKnot::new(0.0, 50.0, 0.0),
                crate::actors::PoseKnot::new(10.0, 64.0, 0.0),
            ],
        }
    }

    #[test]
    fn delayed_detection_hides_then_reveals() {
        let clock = SimClock::new(0.1, 0.1, 30);
        let actors = [walker()];
        let faults = [Fault::DelayedDetection { id: 3, reveal_time: 4.0 }];
        let early = sense(&actors, 3.9, &faults, &template(), &clock);
        assert!(early.tracks.is_empty());
        let late = sense(&actors, 4.0, &faults, &template(), &clock);
        assert_eq!(late.tracks.len(), 1);
        // Revealed at the true position, not where it was at fault onset.
        assert!((late.tracks[0].states[0].pos.x - 55.6).abs() < 1e-9);
    }

    #[test]
    fn location_offset_displaces_all_predictions() {
        let clock = SimClock::new(0.1, 0.1, 30);
        let actors = [walker()];
        let faults = [Fault::LocationOffset { dx: 0.0, dy: -7.0 }];
        let wm = sense(&actors, 0.0, &faults, &template(), &clock);
        assert!((wm.tracks[0].states[0].pos.y + 7.0).abs() < 1e-12);
        assert!((wm.tracks[0].states[30].pos.y + 7.0).abs() < 1e-12);
    }
}
