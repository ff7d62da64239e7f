use serde::{Deserialize, Serialize};

use super::system::{segment_grid, Segment, SegmentSystem};
use crate::geometry::{
    intersect_segments, BoxGrid, Point, PointMerger, SegmentIntersection, Window, TOLERANCE,
};
use crate::union_find::UnionFind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StreetId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CrossingId(pub u32);

impl StreetId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl CrossingId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// A maximal unintersected straight piece of the street system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Street {
    pub from: CrossingId,
    pub to: CrossingId,
    pub start: Point,
    pub end: Point,
    pub length: f64,
}

impl Street {
    /// Plane point at arclength `offset` from `from`.
    pub fn point_at(&self, offset: f64) -> Point {
        if self.length == 0.0 {
            return self.start;
        }
        self.start.lerp(self.end, offset / self.length)
    }

    pub fn geometry(&self) -> [Point; 2] {
        [self.start, self.end]
    }

    /// Unit vector from `start` to `end`.
    pub fn direction(&self) -> Point {
        (self.end - self.start) * (1.0 / self.length)
    }

    pub fn other_end(&self, c: CrossingId) -> CrossingId {
        if c == self.from {
            self.to
        } else {
            self.from
        }
    }
}

/// Canonical coordinate of a point of the street system.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StreetPoint {
    pub street: StreetId,
    pub offset: f64,
}

impl StreetPoint {
    pub fn new(street: StreetId, offset: f64) -> Self {
        StreetPoint { street, offset }
    }
}

/// Streets, crossings and their incidence, plus a spatial index.
#[derive(Clone, Debug)]
pub struct StreetGraph {
    crossings: Vec<Point>,
    streets: Vec<Street>,
    adjacency: Vec<Vec<StreetId>>,
    /// Connected-component label per crossing.
    component: Vec<u32>,
    window: Window,
    index: BoxGrid,
}

impl StreetGraph {
    fn assemble(crossings: Vec<Point>, streets: Vec<Street>, window: Window) -> Self {
        let mut adjacency = vec![Vec::new(); crossings.len()];
        let mut uf = UnionFind::new(crossings.len());
        for (i, s) in streets.iter().enumerate() {
            adjacency[s.from.index()].push(StreetId(i as u32));
            if s.to != s.from {
                adjacency[s.to.index()].push(StreetId(i as u32));
            }
            uf.union(s.from.index(), s.to.index());
        }
        let boxes: Vec<_> = streets
            .iter()
            .map(|s| Segment::new(s.start, s.end).bbox())
            .collect();
        let mean = if streets.is_empty() {
            1.0
        } else {
            streets.iter().map(|s| s.length).sum::<f64>() / streets.len() as f64
        };
        StreetGraph {
            component: uf.labels(),
            crossings,
            streets,
            adjacency,
            window,
            index: BoxGrid::new(&boxes, mean),
        }
    }

    pub fn crossings(&self) -> &[Point] {
        &self.crossings
    }

    pub fn streets(&self) -> &[Street] {
        &self.streets
    }

    pub fn street(&self, id: StreetId) -> &Street {
        &self.streets[id.index()]
    }

    pub fn crossing(&self, id: CrossingId) -> Point {
        self.crossings[id.index()]
    }

    /// Streets incident to a crossing.
    pub fn incident(&self, c: CrossingId) -> &[StreetId] {
        &self.adjacency[c.index()]
    }

    pub fn window(&self) -> Window {
        self.window
    }

    pub fn total_length(&self) -> f64 {
        self.streets.iter().map(|s| s.length).sum()
    }

    /// Component label of the street (that of its crossings).
    pub fn street_component(&self, s: StreetId) -> u32 {
        self.component[self.street(s).from.index()]
    }

    pub fn crossing_component(&self, c: CrossingId) -> u32 {
        self.component[c.index()]
    }

    pub fn position(&self, p: StreetPoint) -> Point {
        self.street(p.street).point_at(p.offset)
    }

    /// Streets that may come within `radius` of `center`.
    pub fn streets_near(&self, center: Point, radius: f64) -> impl Iterator<Item = StreetId> + '_ {
        let r = Point::new(radius, radius);
        self.index
            .query(center - r, center + r)
            .into_iter()
            .map(StreetId)
    }

    /// Streets of length at least `a`; crossings left without streets are
    /// dropped and ids are compacted.
    pub fn thin_by_length(&self, a: f64) -> StreetGraph {
        let keep: Vec<&Street> = self.streets.iter().filter(|s| s.length >= a).collect();
        let mut remap = vec![u32::MAX; self.crossings.len()];
        let mut crossings = Vec::new();
        let mut map = |c: CrossingId, crossings: &mut Vec<Point>| {
            if remap[c.index()] == u32::MAX {
                remap[c.index()] = crossings.len() as u32;
                crossings.push(self.crossings[c.index()]);
            }
            CrossingId(remap[c.index()])
        };
        let streets = keep
            .into_iter()
            .map(|s| Street {
                from: map(s.from, &mut crossings),
                to: map(s.to, &mut crossings),
                ..*s
            })
            .collect();
        StreetGraph::assemble(crossings, streets, self.window)
    }

    /// The streets as plain segments, in street order.
    pub fn to_segments(&self) -> Vec<Segment> {
        self.streets
            .iter()
            .map(|s| Segment::new(s.start, s.end))
            .collect()
    }
}

/// Split every segment at all intersection points and merge coincident
/// points (within [`TOLERANCE`]) into crossings. Crossings are numbered in
/// order of first appearance along the input segments.
pub fn build_graph(system: &SegmentSystem) -> StreetGraph {
    let segments = system.segments();
    let mut merger = PointMerger::new(TOLERANCE);
    // (parameter along segment, crossing id)
    let mut cuts: Vec<Vec<(f64, usize)>> = segments
        .iter()
        .map(|s| vec![(0.0, merger.insert(s.a)), (1.0, merger.insert(s.b))])
        .collect();

    for (i, j) in segment_grid(segments).candidate_pairs() {
        let (i, j) = (i as usize, j as usize);
        let (s, t) = (&segments[i], &segments[j]);
        if let SegmentIntersection::Point { point, s: u, t: v } =
            intersect_segments(s.a, s.b, t.a, t.b)
        {
            let id = merger.insert(point);
            cuts[i].push((u, id));
            cuts[j].push((v, id));
        }
    }

    let crossings = merger.into_points();
    let mut streets = Vec::new();
    for mut cut in cuts {
        cut.sort_by(|a, b| a.0.total_cmp(&b.0));
        cut.dedup_by_key(|c| c.1);
        for w in cut.windows(2) {
            let (a, b) = (w[0].1, w[1].1);
            if a == b {
                continue;
            }
            let (start, end) = (crossings[a], crossings[b]);
            streets.push(Street {
                from: CrossingId(a as u32),
                to: CrossingId(b as u32),
                start,
                end,
                length: start.distance(end),
            });
        }
    }
    StreetGraph::assemble(crossings, streets, system.window())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Segment {
        Segment::new(Point::new(x1, y1), Point::new(x2, y2))
    }

    fn graph(segs: Vec<Segment>) -> StreetGraph {
        build_graph(&SegmentSystem::fixture(segs, Window::centered(10.0)).unwrap())
    }

    #[test]
    fn crossing_pair_splits_into_four() {
        let g = graph(vec![seg(-1.0, 0.0, 1.0, 0.0), seg(0.0, -1.0, 0.0, 1.0)]);
        assert_eq!(g.streets().len(), 4);
        assert_eq!(g.crossings().len(), 5);
        for s in g.streets() {
            assert!((s.length - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_segments_stay_whole() {
        let g = graph(vec![seg(-1.0, 0.0, 1.0, 0.0), seg(-1.0, 1.0, 1.0, 1.0)]);
        assert_eq!(g.streets().len(), 2);
        assert_eq!(g.crossings().len(), 4);
        assert_ne!(
            g.street_component(StreetId(0)),
            g.street_component(StreetId(1))
        );
    }

    #[test]
    fn t_junction_splits_the_bar() {
        let g = graph(vec![seg(-2.0, 0.0, 2.0, 0.0), seg(0.5, 0.0, 0.5, 3.0)]);
        assert_eq!(g.streets().len(), 3);
        let lengths: Vec<f64> = g.streets().iter().map(|s| s.length).collect();
        assert!(lengths.iter().any(|&l| (l - 2.5).abs() < 1e-12));
        assert!(lengths.iter().any(|&l| (l - 1.5).abs() < 1e-12));
        assert!(lengths.iter().any(|&l| (l - 3.0).abs() < 1e-12));
    }

    #[test]
    fn adjacency_is_symmetric() {
        let g = graph(vec![
            seg(-3.0, -3.0, 3.0, 3.0),
            seg(-3.0, 3.0, 3.0, -3.0),
            seg(-3.0, 0.0, 3.0, 0.0),
        ]);
        for (i, s) in g.streets().iter().enumerate() {
            assert!(g.incident(s.from).contains(&StreetId(i as u32)));
            assert!(g.incident(s.to).contains(&StreetId(i as u32)));
        }
    }

    #[test]
    fn thinning() {
        let g = graph(vec![
            seg(0.0, 0.0, 1.0, 0.0),
            seg(0.0, 1.0, 2.0, 1.0),
            seg(0.0, 2.0, 3.0, 2.0),
        ]);
        assert_eq!(g.thin_by_length(0.0).streets().len(), 3);
        let t = g.thin_by_length(2.0);
        let mut lengths: Vec<f64> = t.streets().iter().map(|s| s.length).collect();
        lengths.sort_by(f64::total_cmp);
        assert_eq!(lengths, vec![2.0, 3.0]);
        assert_eq!(t.crossings().len(), 4);
        let empty = g.thin_by_length(10.0);
        assert!(empty.streets().is_empty() && empty.crossings().is_empty());
    }
}
