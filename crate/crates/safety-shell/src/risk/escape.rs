//! The escape maneuver: an emergency stop spliced onto a base trajectory.
//!
//! From the splice step onward the ego keeps tracing the base trajectory's
//! path by arc length but replaces the speed profile with an actuation delay
//! (constant speed) followed by maximum braking until standstill. Splicing
//! never shortcuts across the path geometry, so lateral behavior is exactly
//! inherited from the base plan.

use crate::clock::SimClock;
use crate::geom::{Polyline, Vec2};
use crate::world::{EgoState, Trajectory};

use super::RiskConfig;

/// Escape spliced at `theta` with the configured actuation delay.
pub fn escape_trajectory(
    base: &Trajectory,
    theta: u32,
    clock: &SimClock,
    cfg: &RiskConfig,
) -> Trajectory {
    let delay_steps = clock.steps_of(cfg.escape_delay);
    escape_trajectory_with_delay(base, theta, delay_steps, clock, cfg)
}

/// Escape spliced at `theta` with an explicit remaining actuation delay.
///
/// Controllers that keep executing an escape from one step to the next pass
/// the already-elapsed portion of the delay here so braking is not deferred
/// anew on every replan.
pub fn escape_trajectory_with_delay(
    base: &Trajectory,
    theta: u32,
    delay_steps: u32,
    clock: &SimClock,
    cfg: &RiskConfig,
) -> Trajectory {
    let n = base.states.len();
    let theta = (theta as usize).min(n - 1);
    let dp = clock.delta_p();
    let brake = cfg.escape_decel;

    // Arc-length table of the base trajectory, for resampling positions.
    let mut cum = Vec::with_capacity(n);
    let mut acc = 0.0;
    cum.push(0.0);
    for w in base.states.windows(2) {
        acc += w[0].pos.dist(w[1].pos);
        cum.push(acc);
    }
    let path = Polyline::new(base.states.iter().map(|s| s.pos).collect());
    let path_len = path.length();

    let mut states: Vec<EgoState> = base.states[..=theta].to_vec();
    let mut speed = base.states[theta].speed;
    let mut station = cum[theta];
    let mut heading = base.states[theta].heading;

    for step in 0..(n - 1 - theta) {
        // Exact kinematics over one step: distance advanced and end speed.
        let (ds, next_speed, accel) = if (step as u32) < delay_steps {
            (speed * dp, speed, 0.0)
        } else if speed - brake * dp >= 0.0 {
            (speed * dp - 0.5 * brake * dp * dp, speed - brake * dp, -brake)
        } else {
            // Final partial step: stop exactly after v^2 / (2 a).
            (speed * speed / (2.0 * brake), 0.0, -speed / dp)
        };
        let last = states.last_mut().expect("splice prefix is never empty");
        last.long_accel = accel;

        station += ds;
        speed = next_speed;
        let pos;
        if path_len > 1e-9 && station <= path_len {
            pos = path.position(station);
            heading = path.heading(station);
        } else if path_len > 1e-9 {
            // Past the base path's end: continue straight along its final
            // tangent.
            heading = path.heading(path_len);
            pos = path.position(path_len) + Vec2::from_heading(heading).scale(station - path_len);
        } else {
            pos = states.last().expect("non-empty").pos;
        }
        states.push(EgoState { pos, heading, speed, long_accel: 0.0 });
    }

    Trajectory { states }
}
