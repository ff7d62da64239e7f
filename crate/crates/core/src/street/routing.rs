//! Shortest routes along the street system.
//!
//! The two query points are inserted as temporary nodes that split their
//! streets. Routes whose lengths agree within a relative `1e-9` are all
//! kept: the result is the DAG of tied shortest routes, from which routes
//! can be enumerated or sampled uniformly.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{CrossingId, StreetGraph, StreetId, StreetPoint};
use crate::error::{Error, Result};
use crate::geometry::TOLERANCE;

/// Relative tolerance under which two route lengths count as tied.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Straight traversal of (part of) one street, in street offsets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Leg {
    pub street: StreetId,
    pub from: f64,
    pub to: f64,
}

impl Leg {
    pub fn length(&self) -> f64 {
        (self.to - self.from).abs()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub legs: Vec<Leg>,
    pub length: f64,
}

impl Route {
    pub fn polyline(&self, g: &StreetGraph) -> Vec<crate::geometry::Point> {
        let mut pts = Vec::with_capacity(self.legs.len() + 1);
        for (k, leg) in self.legs.iter().enumerate() {
            let s = g.street(leg.street);
            if k == 0 {
                pts.push(s.point_at(leg.from));
            }
            pts.push(s.point_at(leg.to));
        }
        pts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
enum Node {
    Crossing(CrossingId),
    Source,
    Target,
}

/// A street point snapped onto a crossing when it sits within tolerance
/// of one.
#[derive(Clone, Copy, Debug)]
enum Anchor {
    At(CrossingId),
    Inside(StreetPoint),
}

fn anchor(g: &StreetGraph, p: StreetPoint) -> Anchor {
    let s = g.street(p.street);
    if p.offset <= TOLERANCE {
        Anchor::At(s.from)
    } else if p.offset >= s.length - TOLERANCE {
        Anchor::At(s.to)
    } else {
        Anchor::Inside(p)
    }
}

#[derive(Clone, Copy, Debug)]
struct Key(f64);

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

struct Label {
    node: Node,
    dist: f64,
    settled: bool,
    preds: Vec<(usize, Leg)>,
    count: f64,
}

/// Every tied shortest route between two street points.
#[derive(Debug)]
pub struct ShortestPaths {
    length: f64,
    /// `preds[v]` lists `(u, leg)` with `u` one step closer to the source.
    preds: Vec<Vec<(usize, Leg)>>,
    counts: Vec<f64>,
    source: usize,
    target: usize,
}

impl ShortestPaths {
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Number of tied routes (as a float; grids can have very many).
    pub fn count(&self) -> f64 {
        self.counts[self.target]
    }

    /// The first route in predecessor order.
    pub fn route(&self) -> Route {
        let mut legs = Vec::new();
        let mut v = self.target;
        while v != self.source {
            let (u, leg) = self.preds[v][0];
            legs.push(leg);
            v = u;
        }
        self.finish(legs)
    }

    /// Enumerate up to `limit` tied routes.
    pub fn routes(&self, limit: usize) -> Vec<Route> {
        let mut out = Vec::new();
        let mut stack = Vec::new();
        self.enumerate(self.target, &mut stack, &mut out, limit);
        out
    }

    fn enumerate(&self, v: usize, stack: &mut Vec<Leg>, out: &mut Vec<Route>, limit: usize) {
        if out.len() >= limit {
            return;
        }
        if v == self.source {
            out.push(self.finish(stack.clone()));
            return;
        }
        for &(u, leg) in &self.preds[v] {
            stack.push(leg);
            self.enumerate(u, stack, out, limit);
            stack.pop();
        }
    }

    /// A route drawn uniformly among the tied ones.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Route {
        let mut legs = Vec::new();
        let mut v = self.target;
        while v != self.source {
            let preds = &self.preds[v];
            let (u, leg) = if preds.len() == 1 {
                preds[0]
            } else {
                let total: f64 = preds.iter().map(|&(u, _)| self.counts[u]).sum();
                let mut pick = rng.random::<f64>() * total;
                let mut chosen = preds[preds.len() - 1];
                for &p in preds {
                    pick -= self.counts[p.0];
                    if pick < 0.0 {
                        chosen = p;
                        break;
                    }
                }
                chosen
            };
            legs.push(leg);
            v = u;
        }
        self.finish(legs)
    }

    fn finish(&self, mut legs: Vec<Leg>) -> Route {
        legs.reverse();
        let length = legs.iter().map(Leg::length).sum();
        Route { legs, length }
    }
}

struct Search<'g> {
    g: &'g StreetGraph,
    source: Anchor,
    target: Anchor,
}

impl Search<'_> {
    fn node_of(&self, a: Anchor, virtual_node: Node) -> Node {
        match a {
            Anchor::At(c) => Node::Crossing(c),
            Anchor::Inside(_) => virtual_node,
        }
    }

    /// Ordered stops along a street: its two crossings plus any temporary
    /// node inside it.
    fn stops(&self, s: StreetId) -> Vec<(f64, Node)> {
        let street = self.g.street(s);
        let mut stops = vec![(0.0, Node::Crossing(street.from))];
        for (a, node) in [(self.source, Node::Source), (self.target, Node::Target)] {
            if let Anchor::Inside(p) = a {
                if p.street == s {
                    stops.push((p.offset, node));
                }
            }
        }
        stops.push((street.length, Node::Crossing(street.to)));
        stops.sort_by(|a, b| a.0.total_cmp(&b.0));
        stops
    }

    fn edges(&self, node: Node, out: &mut Vec<(Node, Leg)>) {
        out.clear();
        let streets: Vec<StreetId> = match node {
            Node::Crossing(c) => self.g.incident(c).to_vec(),
            Node::Source => match self.source {
                Anchor::Inside(p) => vec![p.street],
                Anchor::At(_) => unreachable!(),
            },
            Node::Target => match self.target {
                Anchor::Inside(p) => vec![p.street],
                Anchor::At(_) => unreachable!(),
            },
        };
        for s in streets {
            let stops = self.stops(s);
            for (k, &(off, n)) in stops.iter().enumerate() {
                if n != node {
                    continue;
                }
                if k > 0 {
                    let (o, m) = stops[k - 1];
                    out.push((
                        m,
                        Leg {
                            street: s,
                            from: off,
                            to: o,
                        },
                    ));
                }
                if k + 1 < stops.len() {
                    let (o, m) = stops[k + 1];
                    out.push((
                        m,
                        Leg {
                            street: s,
                            from: off,
                            to: o,
                        },
                    ));
                }
            }
        }
    }
}

fn component_of(g: &StreetGraph, p: StreetPoint) -> u32 {
    g.street_component(p.street)
}

/// Shortest route(s) from `x` to `y` along the streets.
pub fn shortest_path(g: &StreetGraph, x: StreetPoint, y: StreetPoint) -> Result<ShortestPaths> {
    for p in [x, y] {
        let len = g
            .streets()
            .get(p.street.index())
            .ok_or_else(|| {
                Error::invalid("street point", format!("unknown street {}", p.street.0))
            })?
            .length;
        if !(p.offset >= -TOLERANCE && p.offset <= len + TOLERANCE) {
            return Err(Error::invalid(
                "street point",
                format!("offset {} outside [0, {len}]", p.offset),
            ));
        }
    }
    if component_of(g, x) != component_of(g, y) {
        return Err(Error::NoPath);
    }
    let search = Search {
        g,
        source: anchor(g, x),
        target: anchor(g, y),
    };
    let source = search.node_of(search.source, Node::Source);
    let target = search.node_of(search.target, Node::Target);
    let same = match (search.source, search.target) {
        (Anchor::At(a), Anchor::At(b)) => a == b,
        (Anchor::Inside(a), Anchor::Inside(b)) => {
            a.street == b.street && (a.offset - b.offset).abs() <= TOLERANCE
        }
        _ => false,
    };
    if same {
        return Ok(ShortestPaths {
            length: 0.0,
            preds: vec![Vec::new()],
            counts: vec![1.0],
            source: 0,
            target: 0,
        });
    }

    let mut labels: Vec<Label> = Vec::new();
    let mut index: HashMap<Node, usize> = HashMap::new();
    let mut slot = |node: Node, labels: &mut Vec<Label>| -> usize {
        *index.entry(node).or_insert_with(|| {
            labels.push(Label {
                node,
                dist: f64::INFINITY,
                settled: false,
                preds: Vec::new(),
                count: 0.0,
            });
            labels.len() - 1
        })
    };
    let s = slot(source, &mut labels);
    labels[s].dist = 0.0;
    labels[s].count = 1.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse((Key(0.0), s)));
    let mut edges = Vec::new();
    let mut target_slot = None;

    while let Some(Reverse((Key(d), u))) = heap.pop() {
        if labels[u].settled || d > labels[u].dist {
            continue;
        }
        labels[u].settled = true;
        if u != s {
            labels[u].count = labels[u].preds.iter().map(|&(p, _)| labels[p].count).sum();
        }
        if labels[u].node == target {
            target_slot = Some(u);
            break;
        }
        search.edges(labels[u].node, &mut edges);
        for &(node, leg) in &edges {
            let v = slot(node, &mut labels);
            if labels[v].settled {
                continue;
            }
            let nd = d + leg.length();
            let cur = labels[v].dist;
            let tol = TIE_TOLERANCE * nd.max(cur.min(f64::MAX)).max(1.0);
            if nd < cur - tol {
                labels[v].dist = nd;
                labels[v].preds.clear();
                labels[v].preds.push((u, leg));
                heap.push(Reverse((Key(nd), v)));
            } else if (nd - cur).abs() <= tol {
                labels[v].preds.push((u, leg));
                if nd < cur {
                    labels[v].dist = nd;
                    heap.push(Reverse((Key(nd), v)));
                }
            }
        }
    }

    let t = target_slot.ok_or(Error::NoPath)?;
    Ok(ShortestPaths {
        length: labels[t].dist,
        counts: labels.iter().map(|l| l.count).collect(),
        preds: labels.into_iter().map(|l| l.preds).collect(),
        source: s,
        target: t,
    })
}

/// Shortest-route distances from `x` to each crossing in `wanted`
/// (`f64::INFINITY` when unreachable). Stops as soon as all are settled.
pub fn crossing_distances(
    g: &StreetGraph,
    x: StreetPoint,
    wanted: &[CrossingId],
) -> HashMap<CrossingId, f64> {
    let mut dist: HashMap<CrossingId, f64> = HashMap::new();
    let mut settled: HashMap<CrossingId, f64> = HashMap::new();
    let mut remaining: std::collections::HashSet<CrossingId> = wanted.iter().copied().collect();
    let mut heap = BinaryHeap::new();
    let street = g.street(x.street);
    for (c, d) in [
        (street.from, x.offset),
        (street.to, street.length - x.offset),
    ] {
        let e = dist.entry(c).or_insert(f64::INFINITY);
        if d < *e {
            *e = d;
            heap.push(Reverse((Key(d), c)));
        }
    }
    while let Some(Reverse((Key(d), c))) = heap.pop() {
        if remaining.is_empty() {
            break;
        }
        if settled.contains_key(&c) || d > dist[&c] {
            continue;
        }
        settled.insert(c, d);
        remaining.remove(&c);
        for &s in g.incident(c) {
            let st = g.street(s);
            let other = st.other_end(c);
            let nd = d + st.length;
            let e = dist.entry(other).or_insert(f64::INFINITY);
            if nd < *e {
                *e = nd;
                heap.push(Reverse((Key(nd), other)));
            }
        }
    }
    wanted
        .iter()
        .map(|&c| (c, settled.get(&c).copied().unwrap_or(f64::INFINITY)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, Window};
    use crate::street::{build_graph, Segment, SegmentSystem};

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Segment {
        Segment::new(Point::new(x1, y1), Point::new(x2, y2))
    }

    fn graph(segs: Vec<Segment>) -> StreetGraph {
        build_graph(&SegmentSystem::fixture(segs, Window::centered(20.0)).unwrap())
    }

    fn locate(g: &StreetGraph, p: Point) -> StreetPoint {
        for (i, s) in g.streets().iter().enumerate() {
            let d = s.direction();
            let off = (p - s.start).dot(d);
            if off >= -1e-12 && off <= s.length + 1e-12 && s.point_at(off).distance(p) < 1e-9 {
                return StreetPoint::new(StreetId(i as u32), off.clamp(0.0, s.length));
            }
        }
        panic!("{p:?} not on the streets")
    }

    #[test]
    fn identical_points_have_zero_length() {
        let g = graph(vec![seg(0.0, 0.0, 4.0, 0.0)]);
        let p = StreetPoint::new(StreetId(0), 1.5);
        let sp = shortest_path(&g, p, p).unwrap();
        assert_eq!(sp.length(), 0.0);
        assert_eq!(sp.count(), 1.0);
        assert!(sp.route().legs.is_empty());
    }

    #[test]
    fn h_fixture_goes_through_the_rung() {
        // Two verticals of length 4 joined at mid-height by a rung of length 2.
        let g = graph(vec![
            seg(0.0, 0.0, 0.0, 4.0),
            seg(2.0, 0.0, 2.0, 4.0),
            seg(0.0, 2.0, 2.0, 2.0),
        ]);
        let x = locate(&g, Point::new(0.0, 0.0));
        let y = locate(&g, Point::new(2.0, 0.0));
        let sp = shortest_path(&g, x, y).unwrap();
        assert!((sp.length() - 6.0).abs() < 1e-12);
        assert_eq!(sp.count(), 1.0);
        let poly = sp.route().polyline(&g);
        assert_eq!(poly.len(), 4);
    }

    #[test]
    fn square_corners_tie() {
        let g = graph(vec![
            seg(0.0, 0.0, 1.0, 0.0),
            seg(1.0, 0.0, 1.0, 1.0),
            seg(1.0, 1.0, 0.0, 1.0),
            seg(0.0, 1.0, 0.0, 0.0),
        ]);
        let x = locate(&g, Point::new(0.0, 0.0));
        let y = locate(&g, Point::new(1.0, 1.0));
        let sp = shortest_path(&g, x, y).unwrap();
        assert!((sp.length() - 2.0).abs() < 1e-12);
        let routes = sp.routes(10);
        assert_eq!(routes.len(), 2);
        assert_ne!(routes[0], routes[1]);
    }

    #[test]
    fn same_street_interior_points() {
        let g = graph(vec![seg(0.0, 0.0, 10.0, 0.0)]);
        let sp = shortest_path(
            &g,
            StreetPoint::new(StreetId(0), 7.0),
            StreetPoint::new(StreetId(0), 2.0),
        )
        .unwrap();
        assert_eq!(sp.length(), 5.0);
        assert_eq!(
            sp.route().legs,
            vec![Leg {
                street: StreetId(0),
                from: 7.0,
                to: 2.0
            }]
        );
    }

    #[test]
    fn disconnected_is_no_path() {
        let g = graph(vec![seg(0.0, 0.0, 1.0, 0.0), seg(0.0, 1.0, 1.0, 1.0)]);
        let r = shortest_path(
            &g,
            StreetPoint::new(StreetId(0), 0.5),
            StreetPoint::new(StreetId(1), 0.5),
        );
        assert!(matches!(r, Err(Error::NoPath)));
    }

    #[test]
    fn crossing_distances_on_a_line() {
        let g = graph(vec![seg(0.0, 0.0, 3.0, 0.0), seg(3.0, 0.0, 5.0, 0.0)]);
        let far = g.street(StreetId(1)).to;
        let d = crossing_distances(&g, StreetPoint::new(StreetId(0), 1.0), &[far]);
        assert!((d[&far] - 4.0).abs() < 1e-12);
    }
}
