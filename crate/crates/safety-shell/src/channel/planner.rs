//! Deterministic lattice planner.
//!
//! Candidates are built on a lattice of terminal lateral offsets (relative
//! to the route line) and terminal speeds. The lateral transition is a cubic
//! Hermite blend over traveled distance from the current offset and heading,
//! so a slow vehicle steers over instead of sliding sideways; the speed
//! profile moves toward the terminal speed at comfort rates and is capped by
//! an anticipatory curve-speed limit derived from route curvature.
//! Candidates are tried in score order and the first one whose predicted
//! risk against the channel's own world model stays below the threshold is
//! returned.

use std::sync::Arc;

use crate::clock::SimClock;
use crate::config::{ChannelConfig, PlannerConfig};
use crate::geom::Vec2;
use crate::risk::{grid_all_below, risk_grid, RiskConfig};
use crate::world::{EgoState, Route, Trajectory, WorldModel};

/// Distance at which passing an object stops costing score (m).
const CLEARANCE_REF: f64 = 4.0;

/// Shortest distance over which a lateral transition may complete (m).
/// Keeps near-stopped vehicles from commanding sideways motion that no
/// steering geometry could deliver.
const MIN_TRANSITION_DIST: f64 = 6.0;

/// Squared clearance shortfall against every considered track, summed.
fn clearance_penalty(traj: &Trajectory, wm: &WorldModel, ignored_track: Option<u32>) -> f64 {
    let mut pen = 0.0;
    for track in &wm.tracks {
        let m = track.states.len();
        if m == 0 || ignored_track == Some(track.id) {
            continue;
        }
        let mut dmin = f64::INFINITY;
        for (tau, st) in traj.states.iter().enumerate() {
            dmin = dmin.min(st.pos.dist(track.states[tau.min(m - 1)].pos));
        }
        let shortfall = (CLEARANCE_REF - dmin).max(0.0);
        pen += shortfall * shortfall;
    }
    pen
}

/// Result of one planning call.
#[derive(Debug, Clone)]
pub struct PlanOutcome {
    pub trajectory: Trajectory,
    /// False when no lattice candidate kept predicted risk below the
    /// threshold; the returned trajectory is then merely the best-scoring
    /// candidate.
    pub feasible: bool,
}

/// Planner instance bound to one route and one channel's limits.
pub struct LatticePlanner {
    route: Arc<Route>,
    channel: ChannelConfig,
    cfg: PlannerConfig,
    risk: RiskConfig,
    clock: SimClock,
    /// Anticipatory curve-speed limit sampled every `limit_ds` meters of
    /// route station, after a backward pass at the channel's comfort
    /// deceleration.
    limits: Vec<f64>,
    limit_ds: f64,
}

impl LatticePlanner {
    pub fn new(
        route: Arc<Route>,
        channel: ChannelConfig,
        cfg: PlannerConfig,
        risk: RiskConfig,
        clock: SimClock,
    ) -> Self {
        let limit_ds = 0.5;
        let len = route.line.length();
        let n = (len / limit_ds).ceil() as usize + 1;
        let mut limits: Vec<f64> = (0..n)
            .map(|i| {
                let s = (i as f64 * limit_ds).min(len);
                let kappa = route.line.curvature(s, 2.0);
                if kappa > 1e-6 { (cfg.lat_accel_cap / kappa).sqrt() } else { 1e9 }
            })
            .collect();
        for i in (0..n.saturating_sub(1)).rev() {
            let reachable =
                (limits[i + 1] * limits[i + 1] + 2.0 * channel.comfort_decel * limit_ds).sqrt();
            limits[i] = limits[i].min(reachable);
        }
        LatticePlanner { route, channel, cfg, risk, clock, limits, limit_ds }
    }

    /// Curve-speed limit at a station (linear interpolation on the table).
    fn curve_limit(&self, s: f64) -> f64 {
        if self.limits.is_empty() {
            return 1e9;
        }
        let x = (s / self.limit_ds).clamp(0.0, (self.limits.len() - 1) as f64);
        let i = x.floor() as usize;
        if i + 1 >= self.limits.len() {
            return self.limits[self.limits.len() - 1];
        }
        let t = x - i as f64;
        self.limits[i] * (1.0 - t) + self.limits[i + 1] * t
    }

    /// Route point and tangent at a station, extrapolating straight past the
    /// route end.
    ///
    /// The tangent is taken over a short chord window rather than from the
    /// facet under `s`: the polyline's facet tangent jumps at vertices, and
    /// at a lateral offset those jumps displace the reconstructed point by
    /// more than a slow candidate advances per step, which would fold the
    /// offset path back on itself. The windowed tangent rotates continuously,
    /// so offset paths stay smooth and forward-pointing at any speed.
    fn route_frame(&self, s: f64) -> (Vec2, Vec2) {
        let len = self.route.line.length();
        let sc = s.min(len);
        let w = 0.75;
        let a = self.route.line.position((sc - w).max(0.0));
        let b = self.route.line.position((sc + w).min(len));
        let chord = b - a;
        let tangent = if chord.norm() > 1e-9 {
            chord.scale(1.0 / chord.norm())
        } else {
            self.route.line.tangent(sc)
        };
        let point = if s <= len {
            self.route.line.position(s)
        } else {
            self.route.line.position(len) + tangent.scale(s - len)
        };
        (point, tangent)
    }

    /// Local tangential advance of the offset curve `p(s) + n(s) * d` per
    /// meter of centerline station. Inside a curve an offset toward the
    /// center moves less than the centerline; feeding an uncorrected lateral
    /// slope there would make the executed heading error grow step over step
    /// instead of decaying.
    fn offset_stretch(&self, s0: f64, d0: f64, tangent0: Vec2) -> f64 {
        let w = 0.5;
        let sa = (s0 - w).max(0.0);
        let sb = s0 + w;
        let (pa, ta) = self.route_frame(sa);
        let (pb, tb) = self.route_frame(sb);
        let qa = pa + ta.perp().scale(d0);
        let qb = pb + tb.perp().scale(d0);
        (tangent0.dot(qb - qa) / (sb - sa)).clamp(0.15, 2.0)
    }

    /// Build one lattice candidate. Returns the trajectory, the accumulated
    /// squared-acceleration penalty, and the terminal station.
    fn build_candidate(
        &self,
        ego: &EgoState,
        s0: f64,
        d0: f64,
        slope0: f64,
        d_f: f64,
        v_f: f64,
    ) -> (Trajectory, f64, f64) {
        let dt = self.clock.delta_p();
        let n = self.clock.tau_h() as usize + 1;
        let accel = self.cfg.comfort_accel;
        let decel = self.channel.comfort_decel;
        let transition_dist =
            (ego.speed * self.cfg.transition_time).max(MIN_TRANSITION_DIST);

        let mut positions = Vec::with_capacity(n);
        // First point from the same frame reconstruction as the rest of the
        // candidate, so consecutive chords stay consistent even where the
        // route polyline bends.
        let (p0, t0) = self.route_frame(s0);
        positions.push(p0 + t0.perp().scale(d0));
        let mut s = s0;
        let mut v = ego.speed.max(0.0);
        let mut accel_pen = 0.0;
        for _ in 1..n {
            let cap = self.curve_limit(s + v * dt);
            let mut v_next =
                if v_f > v { (v + accel * dt).min(v_f) } else { (v - decel * dt).max(v_f) };
            v_next = v_next.min(cap);
            // Never demand more braking than the channel's own limit, even
            // when the ego enters faster than the curve table allows.
            v_next = v_next.max(v - decel * dt).max(0.0);
            accel_pen += ((v_next - v) / dt).powi(2) * dt;
            s += 0.5 * (v + v_next) * dt;
            v = v_next;
            let d = hermite_offset(d0, slope0, d_f, transition_dist, s - s0);
            let (point, tangent) = self.route_frame(s);
            positions.push(point + tangent.perp().scale(d));
        }

        // Assemble states with path-consistent chord speeds and headings.
        let mut speeds = Vec::with_capacity(n);
        for tau in 0..n {
            if tau + 1 < n {
                speeds.push(positions[tau].dist(positions[tau + 1]) / dt);
            } else {
                speeds.push(v);
            }
        }
        let mut states = Vec::with_capacity(n);
        let mut prev_heading = ego.heading;
        for tau in 0..n {
            let heading = if tau == 0 {
                ego.heading
            } else if tau + 1 < n {
                let chord = positions[tau + 1] - positions[tau];
                if chord.norm() > 1e-9 { chord.y.atan2(chord.x) } else { prev_heading }
            } else {
                prev_heading
            };
            prev_heading = heading;
            let long_accel = if tau + 1 < n { (speeds[tau + 1] - speeds[tau]) / dt } else { 0.0 };
            states.push(EgoState { pos: positions[tau], heading, speed: speeds[tau], long_accel });
        }
        (Trajectory { states }, accel_pen, s)
    }

    /// Plan from the ego state against the channel's own world model.
    ///
    /// `ignored_track` engages the planning fault: that track is dropped
    /// from both the clearance score and the feasibility check, so the
    /// planner behaves as if the object were not there and returns the
    /// progress-optimal candidate regardless of it.
    pub fn plan(
        &self,
        ego: &EgoState,
        wm: &WorldModel,
        target_speed: f64,
        ignored_track: Option<u32>,
    ) -> PlanOutcome {
        let (s0, d0) = self.route.line.project(ego.pos);
        let (_, tangent0) = self.route_frame(s0);
        let route_heading = tangent0.y.atan2(tangent0.x);
        // Lateral slope per meter of route station, from the heading error,
        // scaled so the candidate's first chord reproduces the ego heading
        // rather than amplifying the error where the offset curve is shorter
        // than the centerline.
        let slope0 =
            (ego.heading - route_heading).sin() * self.offset_stretch(s0, d0, tangent0);
        let v_max = self.channel.speed_cap.unwrap_or(f64::INFINITY).min(target_speed);

        struct Cand {
            traj: Trajectory,
            score: f64,
            idx: usize,
        }

        let nl = self.cfg.n_lateral.max(1);
        let nsp = self.cfg.n_speeds.max(2);
        let mut cands = Vec::with_capacity(nl * nsp);
        let mut spill = Vec::new();
        for i in 0..nl {
            let d_f = if nl == 1 {
                0.0
            } else {
                -self.cfg.lateral_span
                    + 2.0 * self.cfg.lateral_span * i as f64 / (nl - 1) as f64
            };
            for j in 0..nsp {
                let v_f = v_max * j as f64 / (nsp - 1) as f64;
                let (traj, accel_pen, s_end) =
                    self.build_candidate(ego, s0, d0, slope0, d_f, v_f);

                // Leaving the pavement is not an option the planner weighs,
                // it is outside the drivable set. Off-road candidates are
                // kept only as a spill pool for the degenerate case where
                // the start pose itself is already outside.
                let on_road = traj
                    .states
                    .iter()
                    .all(|st| wm.road.margin(&st.footprint(&self.risk.ego)) >= 0.0);
                if !on_road {
                    spill.push((traj, accel_pen, s_end, d_f));
                    continue;
                }

                let clearance_pen = clearance_penalty(&traj, wm, ignored_track);
                let score = (s_end - s0)
                    - self.cfg.accel_weight * accel_pen
                    - self.cfg.offset_weight * d_f.abs()
                    - self.cfg.clearance_weight * clearance_pen;
                cands.push(Cand { traj, score, idx: cands.len() });
            }
        }
        if cands.is_empty() {
            for (traj, accel_pen, s_end, d_f) in spill {
                let clearance_pen = clearance_penalty(&traj, wm, ignored_track);
                let score = (s_end - s0)
                    - self.cfg.accel_weight * accel_pen
                    - self.cfg.offset_weight * d_f.abs()
                    - self.cfg.clearance_weight * clearance_pen;
                cands.push(Cand { traj, score, idx: cands.len() });
            }
        }

        cands.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("scores are never NaN")
                .then(a.idx.cmp(&b.idx))
        });

        // The planning fault stays blind to its target: feasibility is
        // checked against the world model without it.
        let feasibility_wm;
        let check_wm = if let Some(id) = ignored_track {
            feasibility_wm = WorldModel {
                tracks: wm.tracks.iter().filter(|t| t.id != id).cloned().collect(),
                road: wm.road.clone(),
                route: wm.route.clone(),
            };
            &feasibility_wm
        } else {
            wm
        };

        for (i, c) in cands.iter().enumerate() {
            if grid_all_below(&c.traj, &[check_wm], &self.clock, &self.risk, self.risk.r_threshold)
            {
                return PlanOutcome { trajectory: cands.swap_remove(i).traj, feasible: true };
            }
        }
        // Nothing stays below the threshold: fall back to the candidate with
        // the smallest worst-case risk so the degraded plan is still the
        // least dangerous one available.
        let safest = cands
            .iter()
            .enumerate()
            .map(|(i, c)| {
                (i, risk_grid(&c.traj, &[check_wm], &self.clock, &self.risk).max())
            })
            .min_by(|a, b| a.1.partial_cmp(&b.1).expect("risks are never NaN"))
            .map(|(i, _)| i)
            .expect("lattice always has candidates");
        PlanOutcome { trajectory: cands.swap_remove(safest).traj, feasible: false }
    }
}

/// Cubic Hermite lateral offset over traveled distance: starts at `d0` with
/// slope `slope0` (per meter), arrives at `d_f` with zero slope once `x`
/// reaches `span`, constant afterwards.
fn hermite_offset(d0: f64, slope0: f64, d_f: f64, span: f64, x: f64) -> f64 {
    if x >= span {
        return d_f;
    }
    let u = (x / span).max(0.0);
    let u2 = u * u;
    let u3 = u2 * u;
    let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
    let h10 = u3 - 2.0 * u2 + u;
    let h01 = -2.0 * u3 + 3.0 * u2;
    h00 * d0 + h10 * span * slope0 + h01 * d_f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SimConfig;
    use crate::geom::{AaRect, Polyline};
    use crate::world::{Road, Route};

    fn straight_route() -> Arc<Route> {
        Arc::new(Route {
            line: Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(300.0, 0.0)]),
            goal_station: 280.0,
        })
    }

    fn empty_wm(route: Arc<Route>) -> WorldModel {
        WorldModel {
            tracks: vec![],
            road: Arc::new(Road { rects: vec![AaRect::new(0.0, -3.0, 300.0, 6.5)] }),
            route,
        }
    }

    #[test]
    fn clear_road_yields_full_speed_straight_plan() {
        let sim = SimConfig::standard();
        let route = straight_route();
        let planner = LatticePlanner::new(
            route.clone(),
            sim.channels[0],
            sim.planner,
            sim.risk.clone(),
            sim.clock(),
        );
        let ego = EgoState {
            pos: Vec2::new(5.0, 0.0),
            heading: 0.0,
            speed: 15.0,
            long_accel: 0.0,
        };
        let out = planner.plan(&ego, &empty_wm(route), 15.0, None);
        assert!(out.feasible);
        let last = out.trajectory.states.last().unwrap();
        // Keeps speed and lane.
        assert!((last.speed - 15.0).abs() < 0.2);
        assert!(last.pos.y.abs() < 1e-6);
        assert!(last.pos.x > 5.0 + 15.0 * 3.0 - 1.0);
    }

    #[test]
    fn debug_parked_corner_probe() {
        let sim = SimConfig::standard();
        let spec = crate::scenario::catalog::build(
            4,
            crate::scenario::catalog::Variant::Single,
            8.0,
            &sim,
        )
        .unwrap();
        let setup = spec.setup(&sim);
        let route = setup.route.clone();
        let template = WorldModel {
            tracks: vec![],
            road: setup.road.clone(),
            route: setup.route.clone(),
        };
        let ego = EgoState {
            pos: Vec2::new(147.09, 4.72),
            heading: 1.337,
            speed: 0.0,
            long_accel: 0.0,
        };
        let planner = LatticePlanner::new(
            route.clone(),
            sim.channels[1],
            sim.planner,
            sim.risk.clone(),
            sim.clock(),
        );
        let (s0, d0) = route.line.project(ego.pos);
        let route_heading = route.line.heading(s0);
        let slope0 = (ego.heading - route_heading).sin();
        println!("s0={s0:.2} d0={d0:.2} slope0={slope0:.3}");
        for &t in &[21.0f64, 27.0, 35.0] {
            let wm = crate::channel::injector::sense(
                &setup.actors,
                t,
                &setup.faults[1],
                &template,
                &sim.clock(),
            );
            for tr in &wm.tracks {
                let st0 = &tr.states[0];
                println!(
                    "t={t}: track id={} pos=({:.2},{:.2}) v={:.2}",
                    tr.id, st0.pos.x, st0.pos.y, st0.speed
                );
            }
            for &d_f in &[0.0f64] {
                for &v_f in &[8.0f64] {
                    let (traj, pen, s_end) =
                        planner.build_candidate(&ego, s0, d0, slope0, d_f, v_f);
                    let ok = grid_all_below(
                        &traj,
                        &[&wm],
                        &sim.clock(),
                        &sim.risk,
                        sim.risk.r_threshold,
                    );
                    let grid = risk_grid(&traj, &[&wm], &sim.clock(), &sim.risk);
                    let frame = crate::risk::TrajectoryFrame::new(&traj, &sim.risk);
                    let road_row =
                        frame.road_risk_row(Some(wm.road.as_ref()), &sim.risk, &sim.clock());
                    let road_max = road_row.iter().cloned().fold(0.0, f64::max);
                    let (argmax, maxv) = grid.rows[0]
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                        .map(|(i, v)| (i, *v))
                        .unwrap();
                    let mut detail = String::new();
                    if let Some(track) = wm.tracks.first() {
                        let inds = frame.indicators(track, &sim.risk, &sim.clock());
                        let ind = &inds[argmax];
                        detail = format!(
                            " ind[tau{argmax}]: ttc={:?} pet={:?} dist={:.2}",
                            ind.ttc, ind.pet, ind.distance
                        );
                    }
                    println!(
                        "t={t} d_f={d_f} v_f={v_f}: s_end={s_end:.2} pen={pen:.2} risk_ok={ok} max={maxv:.3}@tau{argmax} road_max={road_max:.3}{detail}"
                    );
                    for (tau, st) in traj.states.iter().enumerate().take(10) {
                        let m = wm.road.margin(&st.footprint(&sim.risk.ego));
                        println!(
                            "  tau{tau}: pos=({:.3},{:.3}) h={:.3} v={:.3} margin={:.3} road_risk={:.3}",
                            st.pos.x, st.pos.y, st.heading, st.speed, m, road_row[tau]
                        );
                    }
                }
            }
            let out = planner.plan(&ego, &wm, 8.0, None);
            let last = out.trajectory.states.last().unwrap();
            println!(
                "t={t}: feasible={} end=({:.2},{:.2}) v_end={:.2}",
                out.feasible, last.pos.x, last.pos.y, last.speed
            );
        }
    }

    #[test]
    fn hermite_blend_hits_boundary_conditions() {
        let d = hermite_offset(1.0, 0.5, -2.0, 2.5, 0.0);
        assert!((d - 1.0).abs() < 1e-12);
        let d = hermite_offset(1.0, 0.5, -2.0, 2.5, 2.5);
        assert!((d + 2.0).abs() < 1e-12);
        // Initial rate is honored: small forward difference.
        let eps = 1e-6;
        let rate = (hermite_offset(1.0, 0.5, -2.0, 2.5, eps) - 1.0) / eps;
        assert!((rate - 0.5).abs() < 1e-4);
    }
}
