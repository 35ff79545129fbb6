//! Risk engine: surrogate safety indicators, collision probability and
//! severity models, per-trajectory risk grids, and the two safety horizons
//! derived from them (first unreasonable-risk step and last safe
//! intervention step).
//!
//! The engine is purely functional over immutable inputs: given a candidate
//! trajectory, a set of world models and a configuration, every function
//! returns bit-identical results on every call.

mod escape;
mod indicators;

pub use escape::{escape_trajectory, escape_trajectory_with_delay};
pub use indicators::{compute_indicators, Indicators, TrajectoryFrame};

use crate::clock::SimClock;
use crate::world::{EgoShape, ObjectClass, Tau, Trajectory, WorldModel};
use serde::{Deserialize, Serialize};

/// Logistic shape of one indicator-to-probability mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorParams {
    /// Steepness of the logistic (1 / indicator unit).
    pub beta: f64,
    /// Indicator value at which the raw score reaches half its ceiling.
    pub x0: f64,
}

/// Collision severity model parameters for one object class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeverityParams {
    pub lambda0: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Closing-speed midpoint (m/s, negative while approaching).
    pub dv0: f64,
}

/// Full risk-engine configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskConfig {
    /// Risk level at or above which a predicted step counts as unreasonable.
    pub r_threshold: f64,
    pub ttc: IndicatorParams,
    pub pet: IndicatorParams,
    pub distance: IndicatorParams,
    /// Containment margin of the drivable-area event. Much steeper and
    /// closer to zero than the object-distance indicator: a vehicle keeping
    /// an ordinary lane runs with well under a metre of margin to the lane
    /// group edge, which must not register as risk on its own.
    pub road: IndicatorParams,
    pub severity_vehicle: SeverityParams,
    pub severity_pedestrian: SeverityParams,
    pub severity_static: SeverityParams,
    /// Emergency deceleration of the escape maneuver (m/s^2, positive).
    pub escape_decel: f64,
    /// Actuation delay before the escape deceleration builds up (s).
    pub escape_delay: f64,
    pub ego: EgoShape,
    /// Raster cell size for encroachment-time bookkeeping (m).
    pub pet_cell_size: f64,
    /// Closing speeds below this leave time-to-collision undefined (m/s).
    pub min_closing_speed: f64,
}

impl Default for RiskConfig {
    fn default() -> Self {
        RiskConfig {
            r_threshold: 0.25,
            ttc: IndicatorParams { beta: 4.0, x0: 2.5 },
            pet: IndicatorParams { beta: 20.0, x0: 0.3 },
            distance: IndicatorParams { beta: 11.0, x0: 0.5 },
            road: IndicatorParams { beta: 20.0, x0: 0.15 },
            severity_vehicle: SeverityParams {
                lambda0: 2.0,
                lambda1: 0.5,
                lambda2: 0.2,
                dv0: -15.0,
            },
            severity_pedestrian: SeverityParams {
                lambda0: 2.0,
                lambda1: 0.5,
                lambda2: 0.35,
                dv0: -8.0,
            },
            severity_static: SeverityParams {
                lambda0: 2.0,
                lambda1: 0.5,
                lambda2: 0.2,
                dv0: -15.0,
            },
            escape_decel: 8.0,
            escape_delay: 0.2,
            ego: EgoShape::default(),
            pet_cell_size: 0.5,
            min_closing_speed: 0.05,
        }
    }
}

impl RiskConfig {
    pub fn severity_params(&self, class: ObjectClass) -> &SeverityParams {
        match class {
            ObjectClass::Vehicle => &self.severity_vehicle,
            ObjectClass::Pedestrian => &self.severity_pedestrian,
            ObjectClass::StaticObstacle => &self.severity_static,
        }
    }
}

/// Raw per-interval score of one indicator: `(1/delta_p) * logistic`.
///
/// The score falls as the indicator grows (large TTC/PET/distance means low
/// collision probability) and may exceed 1; the per-event combination clamps.
pub fn indicator_probability(x: f64, params: &IndicatorParams, delta_p: f64) -> f64 {
    (1.0 / delta_p) / (1.0 + (params.beta * (x - params.x0)).exp())
}

/// Combine per-indicator scores into an event probability in [0, 1]:
/// clamp the sum at 1, then weight by the track existence confidence.
pub fn event_probability(scores: &[f64], existence: f64) -> f64 {
    let sum: f64 = scores.iter().sum();
    sum.min(1.0) * existence
}

/// Collision severity as a function of closing speed `dv` (negative while
/// approaching). Ranges over (lambda0*(1-lambda1), lambda0).
pub fn severity(dv: f64, params: &SeverityParams) -> f64 {
    params.lambda0 * (1.0 - params.lambda1 / (1.0 + (-params.lambda2 * (dv - params.dv0)).exp()))
}

/// Risk of one trajectory evaluated against several world models.
///
/// `rows[i][tau]` is the summed event risk of the trajectory at prediction
/// step `tau` under world model `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct RiskGrid {
    pub rows: Vec<Vec<f64>>,
}

impl RiskGrid {
    /// Largest risk value anywhere in the grid.
    pub fn max(&self) -> f64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter().copied())
            .fold(0.0, f64::max)
    }
}

/// Evaluate the full risk grid of `traj` against every world model.
pub fn risk_grid(
    traj: &Trajectory,
    wms: &[&WorldModel],
    clock: &SimClock,
    cfg: &RiskConfig,
) -> RiskGrid {
    let frame = TrajectoryFrame::new(traj, cfg);
    let n_tau = traj.states.len();
    let mut rows = Vec::with_capacity(wms.len());
    // The drivable-area event depends only on the trajectory; share it.
    let road_risk = frame.road_risk_row(wms.first().map(|w| w.road.as_ref()), cfg, clock);
    for wm in wms {
        let mut row = road_risk.clone();
        for track in &wm.tracks {
            frame.add_track_risk(track, cfg, clock, &mut row, f64::INFINITY);
        }
        debug_assert_eq!(row.len(), n_tau);
        rows.push(row);
    }
    RiskGrid { rows }
}

/// True when every cell of the risk grid stays strictly below `threshold`.
/// Aborts early on the first violation, which keeps intervention searches
/// cheap.
pub fn grid_all_below(
    traj: &Trajectory,
    wms: &[&WorldModel],
    clock: &SimClock,
    cfg: &RiskConfig,
    threshold: f64,
) -> bool {
    let frame = TrajectoryFrame::new(traj, cfg);
    let road_risk = frame.road_risk_row(wms.first().map(|w| w.road.as_ref()), cfg, clock);
    if road_risk.iter().any(|&r| r >= threshold) {
        return false;
    }
    for wm in wms {
        let mut row = road_risk.clone();
        for track in &wm.tracks {
            if !frame.add_track_risk(track, cfg, clock, &mut row, threshold) {
                return false;
            }
        }
    }
    true
}

/// First prediction step at which any world model sees risk at or above the
/// threshold; `Infinite` when the whole grid stays below it.
pub fn first_unreasonable(grid: &RiskGrid, threshold: f64) -> Tau {
    let n_tau = grid.rows.first().map(|r| r.len()).unwrap_or(0);
    for tau in 0..n_tau {
        if grid.rows.iter().any(|row| row[tau] >= threshold) {
            return Tau::Finite(tau as u32);
        }
    }
    Tau::Infinite
}

/// Safety horizons of one trajectory under cross-channel evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyAssessment {
    /// First step with unreasonable risk under any world model.
    pub tau_u: Tau,
    /// Latest step at which switching to the escape maneuver still removes
    /// all unreasonable risk.
    pub tau_l: Tau,
}

/// Compute both safety horizons of `traj` against `wms`.
///
/// The intervention search walks `theta` downward from
/// `min(tau_u - 1, tau_h)` and stops at the first splice whose entire risk
/// grid stays below the threshold — that first hit is by construction the
/// maximum qualifying step, identical to an ascending exhaustive scan.
pub fn last_safe_intervention(
    traj: &Trajectory,
    wms: &[&WorldModel],
    clock: &SimClock,
    cfg: &RiskConfig,
) -> SafetyAssessment {
    let grid = risk_grid(traj, wms, clock, cfg);
    let tau_u = first_unreasonable(&grid, cfg.r_threshold);
    let tau_l = match tau_u {
        Tau::Infinite => Tau::Infinite,
        Tau::Finite(0) => Tau::Finite(0),
        Tau::Finite(u) => {
            let top = (u - 1).min(clock.tau_h());
            let mut found = 0u32;
            for theta in (0..=top).rev() {
                let spliced = escape_trajectory(traj, theta, clock, cfg);
                if grid_all_below(&spliced, wms, clock, cfg, cfg.r_threshold) {
                    found = theta;
                    break;
                }
            }
            Tau::Finite(found)
        }
    };
    SafetyAssessment { tau_u, tau_l }
}
