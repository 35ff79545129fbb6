//! Planar geometry primitives: vectors, oriented rectangular footprints,
//! axis-aligned rectangles, and arc-length parameterized polylines.
//!
//! All footprint math is exact (separating-axis overlap tests, segment-pair
//! boundary distances); nothing here samples or approximates, so the rest of
//! the crate can rely on `boundary_distance == 0.0 <=> footprint_overlap`.

use serde::{Deserialize, Serialize};

/// A 2-D vector / point in meters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// Counter-clockwise perpendicular.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    /// Unit vector for a heading angle (radians, CCW from +x).
    pub fn from_heading(heading: f64) -> Vec2 {
        Vec2::new(heading.cos(), heading.sin())
    }

    pub fn scale(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

/// An oriented rectangle: the swept outline of a road user.
///
/// `heading` is the direction of the long axis; `half_length` extends along
/// the heading, `half_width` across it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Footprint {
    pub center: Vec2,
    pub heading: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Footprint {
    pub fn new(center: Vec2, heading: f64, half_length: f64, half_width: f64) -> Self {
        Footprint { center, heading, half_length, half_width }
    }

    /// Corner points in CCW order.
    pub fn corners(&self) -> [Vec2; 4] {
        let u = Vec2::from_heading(self.heading).scale(self.half_length);
        let v = Vec2::from_heading(self.heading).perp().scale(self.half_width);
        [
            self.center + u + v,
            self.center - u + v,
            self.center - u - v,
            self.center + u - v,
        ]
    }

    /// Radius of the circumscribed circle (half diagonal).
    pub fn circumradius(&self) -> f64 {
        (self.half_length * self.half_length + self.half_width * self.half_width).sqrt()
    }

    /// True when `p` lies inside or on the rectangle, after inflating both
    /// half-extents by `inflate`.
    pub fn contains_inflated(&self, p: Vec2, inflate: f64) -> bool {
        let d = p - self.center;
        let u = Vec2::from_heading(self.heading);
        let lx = d.dot(u).abs();
        let ly = d.dot(u.perp()).abs();
        lx <= self.half_length + inflate && ly <= self.half_width + inflate
    }
}

/// Exact overlap test between two oriented rectangles (separating axis
/// theorem over the four edge normals). Touching boundaries count as overlap.
pub fn footprint_overlap(a: &Footprint, b: &Footprint) -> bool {
    let ca = a.corners();
    let cb = b.corners();
    let axes = [
        Vec2::from_heading(a.heading),
        Vec2::from_heading(a.heading).perp(),
        Vec2::from_heading(b.heading),
        Vec2::from_heading(b.heading).perp(),
    ];
    for axis in axes {
        let (mut amin, mut amax) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in ca {
            let p = c.dot(axis);
            amin = amin.min(p);
            amax = amax.max(p);
        }
        let (mut bmin, mut bmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for c in cb {
            let p = c.dot(axis);
            bmin = bmin.min(p);
            bmax = bmax.max(p);
        }
        if amax < bmin || bmax < amin {
            return false;
        }
    }
    true
}

/// Shortest distance between two segments `p1p2` and `q1q2`.
fn segment_distance(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    point_segment_distance(p1, q1, q2)
        .min(point_segment_distance(p2, q1, q2))
        .min(point_segment_distance(q1, p1, p2))
        .min(point_segment_distance(q2, p1, p2))
}

fn point_segment_distance(p: Vec2, a: Vec2, b: Vec2) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 <= 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab.scale(t))
}

fn segments_intersect(p1: Vec2, p2: Vec2, q1: Vec2, q2: Vec2) -> bool {
    let d = |a: Vec2, b: Vec2, c: Vec2| (b - a).perp().dot(c - a);
    let d1 = d(q1, q2, p1);
    let d2 = d(q1, q2, p2);
    let d3 = d(p1, p2, q1);
    let d4 = d(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    let on = |a: Vec2, b: Vec2, c: Vec2, dc: f64| {
        dc == 0.0
            && c.x >= a.x.min(b.x)
            && c.x <= a.x.max(b.x)
            && c.y >= a.y.min(b.y)
            && c.y <= a.y.max(b.y)
    };
    on(q1, q2, p1, d1) || on(q1, q2, p2, d2) || on(p1, p2, q1, d3) || on(p1, p2, q2, d4)
}

/// Shortest distance between footprint boundaries; `0.0` exactly when the
/// footprints overlap or touch. Symmetric in its arguments.
pub fn boundary_distance(a: &Footprint, b: &Footprint) -> f64 {
    if footprint_overlap(a, b) {
        return 0.0;
    }
    let ca = a.corners();
    let cb = b.corners();
    let mut best = f64::INFINITY;
    for i in 0..4 {
        let p1 = ca[i];
        let p2 = ca[(i + 1) % 4];
        for j in 0..4 {
            let q1 = cb[j];
            let q2 = cb[(j + 1) % 4];
            best = best.min(segment_distance(p1, p2, q1, q2));
        }
    }
    best
}

/// Axis-aligned rectangle, used for drivable-area pieces.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AaRect {
    pub min: Vec2,
    pub max: Vec2,
}

impl AaRect {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Self {
        AaRect { min: Vec2::new(min_x, min_y), max: Vec2::new(max_x, max_y) }
    }

    /// Smallest distance from `p` to the rectangle boundary, positive inside,
    /// negative outside (L-infinity style containment margin).
    pub fn containment_margin(&self, p: Vec2) -> f64 {
        let dx = (p.x - self.min.x).min(self.max.x - p.x);
        let dy = (p.y - self.min.y).min(self.max.y - p.y);
        dx.min(dy)
    }
}

/// Polyline with cumulative arc length, used for routes and trajectory paths.
///
/// Stations are arc-length positions in meters from the first vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polyline {
    pts: Vec<Vec2>,
    cum: Vec<f64>,
}

impl Polyline {
    /// Build from at least two vertices. Zero-length duplicate vertices are
    /// kept but contribute no arc length.
    pub fn new(pts: Vec<Vec2>) -> Self {
        assert!(pts.len() >= 2, "polyline needs at least two points");
        let mut cum = Vec::with_capacity(pts.len());
        let mut s = 0.0;
        cum.push(0.0);
        for w in pts.windows(2) {
            s += w[0].dist(w[1]);
            cum.push(s);
        }
        Polyline { pts, cum }
    }

    pub fn points(&self) -> &[Vec2] {
        &self.pts
    }

    pub fn length(&self) -> f64 {
        *self.cum.last().unwrap()
    }

    fn segment_at(&self, station: f64) -> (usize, f64) {
        let s = station.clamp(0.0, self.length());
        // Binary search for the segment containing this station.
        let mut idx = match self.cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        idx = idx.min(self.pts.len() - 2);
        // Skip zero-length segments.
        while idx > 0 && self.cum[idx + 1] - self.cum[idx] <= 0.0 && self.cum[idx] > s {
            idx -= 1;
        }
        let seg_len = self.cum[idx + 1] - self.cum[idx];
        let t = if seg_len > 0.0 { (s - self.cum[idx]) / seg_len } else { 0.0 };
        (idx, t)
    }

    /// Position at a station (clamped to the polyline extent).
    pub fn position(&self, station: f64) -> Vec2 {
        let (idx, t) = self.segment_at(station);
        let a = self.pts[idx];
        let b = self.pts[idx + 1];
        a + (b - a).scale(t)
    }

    /// Unit tangent at a station; falls back to the nearest non-degenerate
    /// segment direction.
    pub fn tangent(&self, station: f64) -> Vec2 {
        let (mut idx, _) = self.segment_at(station);
        loop {
            let d = self.pts[idx + 1] - self.pts[idx];
            let n = d.norm();
            if n > 1e-12 {
                return d.scale(1.0 / n);
            }
            if idx + 2 >= self.pts.len() {
                return Vec2::new(1.0, 0.0);
            }
            idx += 1;
        }
    }

    /// Heading angle of the tangent at a station.
    pub fn heading(&self, station: f64) -> f64 {
        let t = self.tangent(station);
        t.y.atan2(t.x)
    }

    /// Project a point onto the polyline: returns `(station, signed lateral
    /// offset)` of the closest point. Positive lateral offsets are to the
    /// left of the travel direction.
    pub fn project(&self, p: Vec2) -> (f64, f64) {
        let mut best_d2 = f64::INFINITY;
        let mut best_station = 0.0;
        for i in 0..self.pts.len() - 1 {
            let a = self.pts[i];
            let b = self.pts[i + 1];
            let ab = b - a;
            let len2 = ab.dot(ab);
            if len2 <= 0.0 {
                continue;
            }
            let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
            let q = a + ab.scale(t);
            let d2 = (p - q).dot(p - q);
            if d2 < best_d2 {
                best_d2 = d2;
                best_station = self.cum[i] + t * len2.sqrt();
            }
        }
        let q = self.position(best_station);
        let tan = self.tangent(best_station);
        let lateral = tan.perp().dot(p - q);
        (best_station, lateral)
    }

    /// Absolute curvature near a station, estimated from tangent rotation
    /// over a small arc-length window.
    pub fn curvature(&self, station: f64, window: f64) -> f64 {
        let s0 = (station - 0.5 * window).max(0.0);
        let s1 = (station + 0.5 * window).min(self.length());
        if s1 - s0 < 1e-9 {
            return 0.0;
        }
        let t0 = self.tangent(s0);
        let t1 = self.tangent(s1);
        let cross = t0.x * t1.y - t0.y * t1.x;
        let dot = t0.dot(t1).clamp(-1.0, 1.0);
        let dtheta = cross.atan2(dot);
        (dtheta / (s1 - s0)).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overlap_is_symmetric_for_rotated_pair() {
        let a = Footprint::new(Vec2::new(0.0, 0.0), 0.0, 2.0, 1.0);
        let b = Footprint::new(Vec2::new(2.5, 0.5), 0.7, 2.0, 1.0);
        assert_eq!(footprint_overlap(&a, &b), footprint_overlap(&b, &a));
    }

    #[test]
    fn polyline_roundtrip_projection() {
        let line = Polyline::new(vec![Vec2::new(0.0, 0.0), Vec2::new(10.0, 0.0)]);
        let (s, l) = line.project(Vec2::new(3.0, 1.5));
        assert!((s - 3.0).abs() < 1e-12);
        assert!((l - 1.5).abs() < 1e-12);
    }
}
