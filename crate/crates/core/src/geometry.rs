//! Planar primitives shared by the street, mobility and rendering code.

use std::collections::HashMap;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Absolute tolerance for point coincidence and tie detection.
pub const TOLERANCE: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    #[inline]
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    #[inline]
    pub fn dot(self, other: Point) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3d cross product.
    #[inline]
    pub fn cross(self, other: Point) -> f64 {
        self.x * other.y - self.y * other.x
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    #[inline]
    pub fn distance(self, other: Point) -> f64 {
        (self - other).norm()
    }

    #[inline]
    pub fn lerp(self, other: Point, t: f64) -> Point {
        Point::new(
            self.x + (other.x - self.x) * t,
            self.y + (other.y - self.y) * t,
        )
    }
}

impl Add for Point {
    type Output = Point;
    #[inline]
    fn add(self, rhs: Point) -> Point {
        Point::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point {
    type Output = Point;
    #[inline]
    fn sub(self, rhs: Point) -> Point {
        Point::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    #[inline]
    fn mul(self, rhs: f64) -> Point {
        Point::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point {
    type Output = Point;
    #[inline]
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Axis-aligned square `[min.x, min.x + side] x [min.y, min.y + side]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub min: Point,
    pub side: f64,
}

impl Window {
    pub fn new(min: Point, side: f64) -> Self {
        Window { min, side }
    }

    /// The square of side `side` centred at the origin.
    pub fn centered(side: f64) -> Self {
        Window {
            min: Point::new(-side / 2.0, -side / 2.0),
            side,
        }
    }

    pub fn max(&self) -> Point {
        Point::new(self.min.x + self.side, self.min.y + self.side)
    }

    pub fn center(&self) -> Point {
        Point::new(self.min.x + self.side / 2.0, self.min.y + self.side / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    /// Grow (or shrink, for negative `by`) on every side.
    pub fn inflate(&self, by: f64) -> Window {
        Window {
            min: Point::new(self.min.x - by, self.min.y - by),
            side: self.side + 2.0 * by,
        }
    }

    /// Concentric square with side `fraction * side`.
    pub fn scaled(&self, fraction: f64) -> Window {
        self.inflate(-(1.0 - fraction) * self.side / 2.0)
    }

    pub fn contains(&self, p: Point, tol: f64) -> bool {
        let max = self.max();
        p.x >= self.min.x - tol
            && p.x <= max.x + tol
            && p.y >= self.min.y - tol
            && p.y <= max.y + tol
    }

    /// Distance from `p` (assumed inside) to the nearest window edge.
    pub fn distance_to_boundary(&self, p: Point) -> f64 {
        let max = self.max();
        (p.x - self.min.x)
            .min(max.x - p.x)
            .min(p.y - self.min.y)
            .min(max.y - p.y)
    }

    /// Liang-Barsky clipping. Endpoints that land on the boundary are snapped
    /// onto it exactly so boundary tests downstream need no tolerance.
    pub fn clip_segment(&self, a: Point, b: Point) -> Option<(Point, Point)> {
        let max = self.max();
        let d = b - a;
        let mut t0 = 0.0f64;
        let mut t1 = 1.0f64;
        let checks = [
            (-d.x, a.x - self.min.x),
            (d.x, max.x - a.x),
            (-d.y, a.y - self.min.y),
            (d.y, max.y - a.y),
        ];
        for (p, q) in checks {
            if p == 0.0 {
                if q < 0.0 {
                    return None;
                }
            } else {
                let r = q / p;
                if p < 0.0 {
                    if r > t1 {
                        return None;
                    }
                    t0 = t0.max(r);
                } else {
                    if r < t0 {
                        return None;
                    }
                    t1 = t1.min(r);
                }
            }
        }
        let snap = |p: Point, clipped: bool| {
            if !clipped {
                return p;
            }
            let mut q = p;
            for (v, lo, hi) in [(&mut q.x, self.min.x, max.x), (&mut q.y, self.min.y, max.y)] {
                if (*v - lo).abs() <= TOLERANCE * self.side.max(1.0) || *v < lo {
                    *v = lo;
                } else if (*v - hi).abs() <= TOLERANCE * self.side.max(1.0) || *v > hi {
                    *v = hi;
                }
            }
            q
        };
        let p0 = snap(a + d * t0, t0 > 0.0);
        let p1 = snap(a + d * t1, t1 < 1.0);
        Some((p0, p1))
    }
}

/// Result of intersecting two closed segments.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SegmentIntersection {
    None,
    /// A single common point, with the parameters along each segment.
    Point {
        point: Point,
        s: f64,
        t: f64,
    },
    /// Collinear segments sharing a sub-segment of positive length.
    Overlap,
}

/// Intersect `[a0, a1]` with `[b0, b1]`. Points within [`TOLERANCE`] of an
/// endpoint are reported as that endpoint exactly.
pub fn intersect_segments(a0: Point, a1: Point, b0: Point, b1: Point) -> SegmentIntersection {
    let da = a1 - a0;
    let db = b1 - b0;
    let la = da.norm();
    let lb = db.norm();
    if la == 0.0 || lb == 0.0 {
        return SegmentIntersection::None;
    }
    let denom = da.cross(db);
    let w = b0 - a0;

    // Parallel (or nearly): distance of b's line from a's line decides.
    if denom.abs() <= TOLERANCE * la * lb * 1e-3 {
        if (w.cross(da) / la).abs() > TOLERANCE {
            return SegmentIntersection::None;
        }
        let s0 = w.dot(da) / (la * la);
        let s1 = (b1 - a0).dot(da) / (la * la);
        let (lo, hi) = if s0 <= s1 { (s0, s1) } else { (s1, s0) };
        let tol_a = TOLERANCE / la;
        let overlap_lo = lo.max(0.0);
        let overlap_hi = hi.min(1.0);
        if overlap_hi - overlap_lo > tol_a {
            return SegmentIntersection::Overlap;
        }
        if overlap_hi < overlap_lo - tol_a {
            return SegmentIntersection::None;
        }
        // Touching at a single endpoint.
        let s = overlap_lo.clamp(0.0, 1.0);
        let point = a0 + da * s;
        return snap_to_endpoints(point, [a0, a1, b0, b1], a0, da, la, b0, db, lb);
    }

    let s = w.cross(db) / denom;
    let t = w.cross(da) / denom;
    let tol_a = TOLERANCE / la;
    let tol_b = TOLERANCE / lb;
    if s < -tol_a || s > 1.0 + tol_a || t < -tol_b || t > 1.0 + tol_b {
        return SegmentIntersection::None;
    }
    let point = a0 + da * s.clamp(0.0, 1.0);
    snap_to_endpoints(point, [a0, a1, b0, b1], a0, da, la, b0, db, lb)
}

#[allow(clippy::too_many_arguments)]
fn snap_to_endpoints(
    point: Point,
    ends: [Point; 4],
    a0: Point,
    da: Point,
    la: f64,
    b0: Point,
    db: Point,
    lb: f64,
) -> SegmentIntersection {
    let point = ends
        .into_iter()
        .find(|e| e.distance(point) <= TOLERANCE)
        .unwrap_or(point);
    let s = ((point - a0).dot(da) / (la * la)).clamp(0.0, 1.0);
    let t = ((point - b0).dot(db) / (lb * lb)).clamp(0.0, 1.0);
    SegmentIntersection::Point { point, s, t }
}

/// Merges points closer than a tolerance into a single id. The first
/// inserted representative keeps its coordinates.
#[derive(Debug)]
pub struct PointMerger {
    tol: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
    points: Vec<Point>,
}

impl PointMerger {
    pub fn new(tol: f64) -> Self {
        PointMerger {
            tol,
            cells: HashMap::new(),
            points: Vec::new(),
        }
    }

    fn cell(&self, p: Point) -> (i64, i64) {
        (
            (p.x / self.tol).floor() as i64,
            (p.y / self.tol).floor() as i64,
        )
    }

    pub fn insert(&mut self, p: Point) -> usize {
        let (cx, cy) = self.cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = self.cells.get(&(cx + dx, cy + dy)) {
                    for &id in ids {
                        if self.points[id].distance(p) <= self.tol {
                            return id;
                        }
                    }
                }
            }
        }
        let id = self.points.len();
        self.points.push(p);
        self.cells.entry((cx, cy)).or_default().push(id);
        id
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }
}

/// Uniform bucket grid over axis-aligned boxes, used as a broad phase for
/// segment/segment and ball/segment queries.
#[derive(Clone, Debug)]
pub struct BoxGrid {
    origin: Point,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl BoxGrid {
    /// `boxes` are `(min, max)` corners. `cell` is the bucket side.
    pub fn new(boxes: &[(Point, Point)], cell: f64) -> Self {
        let mut lo = Point::new(f64::INFINITY, f64::INFINITY);
        let mut hi = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for (a, b) in boxes {
            lo = Point::new(lo.x.min(a.x), lo.y.min(a.y));
            hi = Point::new(hi.x.max(b.x), hi.y.max(b.y));
        }
        if boxes.is_empty() {
            lo = Point::ORIGIN;
            hi = Point::ORIGIN;
        }
        let cell = if cell.is_finite() && cell > 0.0 {
            cell
        } else {
            1.0
        };
        // Cap the bucket count so degenerate inputs cannot blow up memory.
        let span = (hi.x - lo.x).max(hi.y - lo.y);
        let cell = cell.max(span / 2048.0);
        let nx = (((hi.x - lo.x) / cell).floor() as usize) + 1;
        let ny = (((hi.y - lo.y) / cell).floor() as usize) + 1;
        let mut grid = BoxGrid {
            origin: lo,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (i, (a, b)) in boxes.iter().enumerate() {
            let (x0, y0) = grid.cell_of(*a);
            let (x1, y1) = grid.cell_of(*b);
            for cy in y0..=y1 {
                for cx in x0..=x1 {
                    grid.buckets[cy * nx + cx].push(i as u32);
                }
            }
        }
        grid
    }

    fn cell_of(&self, p: Point) -> (usize, usize) {
        let cx = ((p.x - self.origin.x) / self.cell).floor();
        let cy = ((p.y - self.origin.y) / self.cell).floor();
        (
            (cx.max(0.0) as usize).min(self.nx - 1),
            (cy.max(0.0) as usize).min(self.ny - 1),
        )
    }

    /// Ids of boxes whose buckets overlap the query box, sorted and unique.
    pub fn query(&self, min: Point, max: Point) -> Vec<u32> {
        if max.x < self.origin.x || max.y < self.origin.y {
            return Vec::new();
        }
        let (x0, y0) = self.cell_of(min);
        let (x1, y1) = self.cell_of(max);
        let mut out = Vec::new();
        for cy in y0..=y1 {
            for cx in x0..=x1 {
                out.extend_from_slice(&self.buckets[cy * self.nx + cx]);
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Every unordered pair of boxes sharing at least one bucket, each
    /// reported once, in ascending `(i, j)` order.
    pub fn candidate_pairs(&self) -> Vec<(u32, u32)> {
        let mut pairs = Vec::new();
        for bucket in &self.buckets {
            for (k, &i) in bucket.iter().enumerate() {
                for &j in &bucket[k + 1..] {
                    pairs.push(if i < j { (i, j) } else { (j, i) });
                }
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        pairs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crossing_segments_meet_once() {
        let hit = intersect_segments(
            Point::new(0.0, 0.0),
            Point::new(2.0, 2.0),
            Point::new(0.0, 2.0),
            Point::new(2.0, 0.0),
        );
        match hit {
            SegmentIntersection::Point { point, s, t } => {
                assert!((point.x - 1.0).abs() < 1e-12 && (point.y - 1.0).abs() < 1e-12);
                assert!((s - 0.5).abs() < 1e-12 && (t - 0.5).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn shared_endpoint_snaps_exactly() {
        let p = Point::new(0.1, 0.7);
        let hit = intersect_segments(p, Point::new(3.3, 1.9), Point::new(-2.0, 4.0), p);
        assert!(matches!(hit, SegmentIntersection::Point { point, .. } if point == p));
    }

    #[test]
    fn collinear_overlap_and_touch() {
        let a0 = Point::new(0.0, 0.0);
        let a1 = Point::new(2.0, 0.0);
        assert_eq!(
            intersect_segments(a0, a1, Point::new(1.0, 0.0), Point::new(3.0, 0.0)),
            SegmentIntersection::Overlap
        );
        assert!(matches!(
            intersect_segments(a0, a1, Point::new(2.0, 0.0), Point::new(3.0, 0.0)),
            SegmentIntersection::Point { point, .. } if point == a1
        ));
        assert_eq!(
            intersect_segments(a0, a1, Point::new(2.5, 0.0), Point::new(3.0, 0.0)),
            SegmentIntersection::None
        );
    }

    #[test]
    fn parallel_disjoint() {
        assert_eq!(
            intersect_segments(
                Point::new(0.0, 0.0),
                Point::new(1.0, 0.0),
                Point::new(0.0, 1.0),
                Point::new(1.0, 1.0)
            ),
            SegmentIntersection::None
        );
    }

    #[test]
    fn clipping_snaps_to_boundary() {
        let w = Window::new(Point::new(0.0, 0.0), 1.0);
        let (a, b) = w
            .clip_segment(Point::new(-1.0, 0.3), Point::new(0.5, 0.3))
            .unwrap();
        assert_eq!(a, Point::new(0.0, 0.3));
        assert_eq!(b, Point::new(0.5, 0.3));
        assert!(w
            .clip_segment(Point::new(-1.0, -1.0), Point::new(-0.5, 2.0))
            .is_none());
    }

    #[test]
    fn merger_joins_close_points() {
        let mut m = PointMerger::new(1e-9);
        let a = m.insert(Point::new(1.0, 1.0));
        let b = m.insert(Point::new(1.0 + 5e-10, 1.0));
        let c = m.insert(Point::new(1.0 + 5e-9, 1.0));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn grid_pairs_are_unique() {
        let boxes = vec![
            (Point::new(0.0, 0.0), Point::new(3.0, 3.0)),
            (Point::new(1.0, 1.0), Point::new(4.0, 4.0)),
            (Point::new(10.0, 10.0), Point::new(11.0, 11.0)),
        ];
        let g = BoxGrid::new(&boxes, 0.5);
        assert_eq!(g.candidate_pairs(), vec![(0, 1)]);
        assert_eq!(
            g.query(Point::new(9.0, 9.0), Point::new(12.0, 12.0)),
            vec![2]
        );
    }
}
