//! Surrogate safety indicators evaluated between a candidate ego trajectory
//! and predicted object tracks: time-to-collision, post-encroachment time,
//! and boundary distance, plus the drivable-area containment check.
//!
//! All computations are step-synchronous: index `tau` addresses the same
//! prediction instant in the trajectory and in every track.

use std::collections::HashMap;

use crate::clock::SimClock;
use crate::geom::{boundary_distance, Footprint, Polyline, Vec2};
use crate::world::{ObjectTrack, Road, Trajectory};

use super::{event_probability, indicator_probability, severity, RiskConfig};

/// Indicator values for one (prediction step, object track) pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Indicators {
    /// Time-to-collision (s). `None` when the object is not ahead on the
    /// ego path or the closing speed is below the defined minimum.
    pub ttc: Option<f64>,
    /// Post-encroachment time (s). `None` when ego and object never share a
    /// raster cell; zero when they share one within a single step.
    pub pet: Option<f64>,
    /// Minimum distance between the footprint boundaries (m); zero when the
    /// footprints overlap.
    pub distance: f64,
}

/// Integer cell-coordinate bounding box used to gate encroachment lookups.
#[derive(Debug, Clone, Copy)]
struct CellBounds {
    min_i: i32,
    max_i: i32,
    min_j: i32,
    max_j: i32,
}

impl CellBounds {
    fn empty() -> Self {
        CellBounds { min_i: i32::MAX, max_i: i32::MIN, min_j: i32::MAX, max_j: i32::MIN }
    }

    fn include(&mut self, i0: i32, i1: i32, j0: i32, j1: i32) {
        self.min_i = self.min_i.min(i0);
        self.max_i = self.max_i.max(i1);
        self.min_j = self.min_j.min(j0);
        self.max_j = self.max_j.max(j1);
    }

    fn intersects(&self, other: &CellBounds) -> bool {
        self.min_i <= other.max_i
            && other.min_i <= self.max_i
            && self.min_j <= other.max_j
            && other.min_j <= self.max_j
    }
}

/// Conservative cell-coordinate bounds of a footprint inflated by `inflate`.
fn cell_bounds_of(fp: &Footprint, cell: f64, inflate: f64) -> (i32, i32, i32, i32) {
    let r = fp.circumradius() + inflate;
    (
        ((fp.center.x - r) / cell).floor() as i32,
        ((fp.center.x + r) / cell).floor() as i32,
        ((fp.center.y - r) / cell).floor() as i32,
        ((fp.center.y + r) / cell).floor() as i32,
    )
}

/// Cells whose center lies within the footprint inflated by `inflate`
/// (a cell is "occupied" as soon as the footprint can touch any part of it).
fn raster_cells(fp: &Footprint, cell: f64, inflate: f64, out: &mut Vec<(i32, i32)>) {
    let (i0, i1, j0, j1) = cell_bounds_of(fp, cell, inflate);
    for i in i0..=i1 {
        for j in j0..=j1 {
            let center = Vec2::new((i as f64 + 0.5) * cell, (j as f64 + 0.5) * cell);
            if fp.contains_inflated(center, inflate) {
                out.push((i, j));
            }
        }
    }
}

/// Per-trajectory precomputation shared across all tracks and world models:
/// the driven path, cumulative stations, footprints, and raster occupancy.
pub struct TrajectoryFrame {
    n: usize,
    path: Polyline,
    station: Vec<f64>,
    speeds: Vec<f64>,
    footprints: Vec<Footprint>,
    cells: Vec<Vec<(i32, i32)>>,
    bounds: CellBounds,
    cell_size: f64,
    inflate: f64,
}

impl TrajectoryFrame {
    pub fn new(traj: &Trajectory, cfg: &RiskConfig) -> Self {
        let n = traj.states.len();
        assert!(n >= 2, "trajectory must span at least two steps");
        let mut pts: Vec<Vec2> = traj.states.iter().map(|s| s.pos).collect();
        // Extend past the final state along its heading so the path keeps a
        // defined tangent even when the trajectory ends stopped.
        let last = traj.states[n - 1];
        pts.push(last.pos + Vec2::from_heading(last.heading).scale(1.0 + last.speed));
        let path = Polyline::new(pts);

        let mut station = Vec::with_capacity(n);
        let mut acc = 0.0;
        station.push(0.0);
        for w in traj.states.windows(2) {
            acc += w[0].pos.dist(w[1].pos);
            station.push(acc);
        }

        let speeds = traj.states.iter().map(|s| s.speed).collect();
        let footprints: Vec<Footprint> =
            traj.states.iter().map(|s| s.footprint(&cfg.ego)).collect();

        let cell_size = cfg.pet_cell_size;
        let inflate = cell_size * std::f64::consts::FRAC_1_SQRT_2;
        let mut cells = Vec::with_capacity(n);
        let mut bounds = CellBounds::empty();
        for fp in &footprints {
            let mut v = Vec::new();
            raster_cells(fp, cell_size, inflate, &mut v);
            let (i0, i1, j0, j1) = cell_bounds_of(fp, cell_size, inflate);
            bounds.include(i0, i1, j0, j1);
            cells.push(v);
        }

        TrajectoryFrame {
            n,
            path,
            station,
            speeds,
            footprints,
            cells,
            bounds,
            cell_size,
            inflate,
        }
    }

    /// Risk row of the leaving-the-drivable-area event (severity fixed at 1).
    pub fn road_risk_row(
        &self,
        road: Option<&Road>,
        cfg: &RiskConfig,
        clock: &SimClock,
    ) -> Vec<f64> {
        let mut row = vec![0.0; self.n];
        let Some(road) = road else { return row };
        let dp = clock.delta_p();
        for (tau, fp) in self.footprints.iter().enumerate() {
            let margin = road.margin(fp).max(0.0);
            let score = indicator_probability(margin, &cfg.road, dp);
            row[tau] = score.min(1.0);
        }
        row
    }

    /// Add the risk contribution of `track` to `row`. Returns `false` as
    /// soon as any accumulated cell reaches `abort`, which lets callers
    /// searching for an all-safe trajectory stop early; pass `f64::INFINITY`
    /// to always complete the row.
    pub fn add_track_risk(
        &self,
        track: &ObjectTrack,
        cfg: &RiskConfig,
        clock: &SimClock,
        row: &mut [f64],
        abort: f64,
    ) -> bool {
        if track.states.is_empty() {
            return true;
        }
        let dp = clock.delta_p();
        let scan = TrackScan::new(self, track);
        let sev_params = cfg.severity_params(track.class);
        for tau in 0..self.n {
            let mut scores = [0.0f64; 3];
            let mut k = 0;
            scores[k] = indicator_probability(scan.d[tau], &cfg.distance, dp);
            k += 1;
            if let Some(ttc) = scan.ttc(tau, cfg) {
                scores[k] = indicator_probability(ttc, &cfg.ttc, dp);
                k += 1;
            }
            if let Some(pet) = scan.pet(tau, dp) {
                scores[k] = indicator_probability(pet, &cfg.pet, dp);
                k += 1;
            }
            let p_event = event_probability(&scores[..k], track.existence);
            let sev = severity(scan.dv(tau, dp), sev_params);
            row[tau] += p_event * sev;
            if row[tau] >= abort {
                return false;
            }
        }
        true
    }

    /// Indicator values of `track` at every prediction step.
    pub fn indicators(
        &self,
        track: &ObjectTrack,
        cfg: &RiskConfig,
        clock: &SimClock,
    ) -> Vec<Indicators> {
        let dp = clock.delta_p();
        let scan = TrackScan::new(self, track);
        (0..self.n)
            .map(|tau| Indicators {
                ttc: scan.ttc(tau, cfg),
                pet: scan.pet(tau, dp),
                distance: scan.d[tau],
            })
            .collect()
    }
}

/// Per-(trajectory, track) working data: footprint distances and the raster
/// occupancy map of the track over the prediction horizon.
struct TrackScan<'a> {
    frame: &'a TrajectoryFrame,
    track: &'a ObjectTrack,
    d: Vec<f64>,
    occupancy: Option<HashMap<(i32, i32), Vec<u32>>>,
}

impl<'a> TrackScan<'a> {
    fn new(frame: &'a TrajectoryFrame, track: &'a ObjectTrack) -> Self {
        let n = frame.n;
        let m = track.states.len();
        let fps: Vec<Footprint> = (0..n).map(|t| track.footprint_at(t.min(m - 1))).collect();

        let d: Vec<f64> = (0..n)
            .map(|t| boundary_distance(&frame.footprints[t], &fps[t]))
            .collect();

        // Encroachment cells only matter when the swept areas can touch at
        // all; the bounding-box gate is conservative, so skipping is exact.
        let mut track_bounds = CellBounds::empty();
        for fp in &fps {
            let (i0, i1, j0, j1) = cell_bounds_of(fp, frame.cell_size, frame.inflate);
            track_bounds.include(i0, i1, j0, j1);
        }
        let occupancy = if track_bounds.intersects(&frame.bounds) {
            let mut occ: HashMap<(i32, i32), Vec<u32>> = HashMap::new();
            let mut buf = Vec::new();
            for (t, fp) in fps.iter().enumerate() {
                buf.clear();
                raster_cells(fp, frame.cell_size, frame.inflate, &mut buf);
                for &c in &buf {
                    occ.entry(c).or_default().push(t as u32);
                }
            }
            Some(occ)
        } else {
            None
        };

        TrackScan { frame, track, d, occupancy }
    }

    /// Time-to-collision at step `tau`: defined when the object's footprint
    /// overlaps the ego path laterally, lies ahead of the ego's current
    /// station, and the path-aligned closing speed is positive. The lateral
    /// reach uses the footprint extent across the path heading, so a car in
    /// the neighbour lane does not read as an obstacle ahead while a
    /// diagonally crossing one does.
    fn ttc(&self, tau: usize, cfg: &RiskConfig) -> Option<f64> {
        let m = self.track.states.len();
        let obj = &self.track.states[tau.min(m - 1)];
        let (s_obj, lateral) = self.frame.path.project(obj.pos);
        let path_heading = self.frame.path.heading(s_obj);
        let rel = obj.heading - path_heading;
        let lat_extent =
            rel.sin().abs() * self.track.half_length + rel.cos().abs() * self.track.half_width;
        if lateral.abs() > cfg.ego.half_width + lat_extent {
            return None;
        }
        if s_obj <= self.frame.station[tau] + 1e-9 {
            return None;
        }
        let closing = self.frame.speeds[tau] - obj.speed * rel.cos();
        if closing <= cfg.min_closing_speed {
            return None;
        }
        Some(self.d[tau] / closing)
    }

    /// Post-encroachment time at step `tau`: the smallest step gap between
    /// the ego occupying a raster cell at `tau` and the object occupying the
    /// same cell at any step. Gaps of at most one step count as zero.
    fn pet(&self, tau: usize, dp: f64) -> Option<f64> {
        let occ = self.occupancy.as_ref()?;
        let t = tau as u32;
        let mut best: Option<u32> = None;
        for c in &self.frame.cells[tau] {
            if let Some(steps) = occ.get(c) {
                let k = steps.partition_point(|&x| x < t);
                let mut gap = u32::MAX;
                if k < steps.len() {
                    gap = gap.min(steps[k] - t);
                }
                if k > 0 {
                    gap = gap.min(t - steps[k - 1]);
                }
                best = Some(best.map_or(gap, |b| b.min(gap)));
            }
        }
        best.map(|gap| if gap <= 1 { 0.0 } else { f64::from(gap) * dp })
    }

    /// Closing speed at step `tau`: forward difference of the boundary
    /// distance, negative while approaching. The final step reuses the last
    /// defined difference.
    fn dv(&self, tau: usize, dp: f64) -> f64 {
        let n = self.d.len();
        if n < 2 {
            return 0.0;
        }
        if tau + 1 < n {
            (self.d[tau + 1] - self.d[tau]) / dp
        } else {
            (self.d[n - 1] - self.d[n - 2]) / dp
        }
    }
}

/// Indicator values of `track` against `traj` at every prediction step.
pub fn compute_indicators(
    traj: &Trajectory,
    track: &ObjectTrack,
    clock: &SimClock,
    cfg: &RiskConfig,
) -> Vec<Indicators> {
    TrajectoryFrame::new(traj, cfg).indicators(track, cfg, clock)
}
