//! Contact times between moving devices, the static connectivity graph and
//! the geostatistical degree bound.

use std::collections::HashMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BoxGrid, Point};
use crate::mobility::{MotionPiece, Trajectory, WaypointKernel};
use crate::points::DeviceId;
use crate::street::{crossing_distances, StreetGraph, StreetPoint};

/// Open time interval `(start, end)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub start: f64,
    pub end: f64,
}

impl Interval {
    pub fn new(start: f64, end: f64) -> Self {
        Interval { start, end }
    }

    /// The interval that never closes.
    pub fn permanent() -> Self {
        Interval {
            start: 0.0,
            end: f64::INFINITY,
        }
    }

    pub fn length(&self) -> f64 {
        self.end - self.start
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start < t && t < self.end
    }
}

/// Maximal open contact intervals of one unordered pair, sorted.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContactSet {
    pub pair: (DeviceId, DeviceId),
    pub intervals: Vec<Interval>,
}

impl ContactSet {
    pub fn has_edge(&self, rho: f64) -> bool {
        has_edge(&self.intervals, rho)
    }
}

/// Whether a closed window of length `rho` fits inside one of the open
/// `intervals`.
pub fn has_edge(intervals: &[Interval], rho: f64) -> bool {
    witness(intervals, rho).is_some()
}

fn witness(intervals: &[Interval], rho: f64) -> Option<Interval> {
    intervals.iter().copied().find(|iv| iv.length() > rho)
}

fn push_merged(out: &mut Vec<Interval>, iv: Interval) {
    if let Some(last) = out.last_mut() {
        if last.end == iv.start {
            last.end = iv.end;
            return;
        }
    }
    out.push(iv);
}

/// Contact intervals between two piecewise-linear schedules: times when
/// both are on the same street with offsets less than `r` apart.
pub fn contact_intervals_from_pieces(
    a: &[MotionPiece],
    b: &[MotionPiece],
    r: f64,
) -> Vec<Interval> {
    let mut out = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (pa, pb) = (&a[i], &b[j]);
        let s = pa.t0.max(pb.t0);
        let e = pa.t1.min(pb.t1);
        if e > s && pa.street == pb.street {
            let delta = pa.offset_at(s) - pb.offset_at(s);
            let beta = pa.velocity - pb.velocity;
            let span = if beta == 0.0 {
                (delta.abs() < r).then_some((s, e))
            } else {
                let u1 = (-r - delta) / beta;
                let u2 = (r - delta) / beta;
                let lo = s + u1.min(u2).max(0.0);
                let hi = s + u1.max(u2);
                let hi = hi.min(e);
                (hi > lo).then_some((lo.max(s), hi))
            };
            if let Some((lo, hi)) = span {
                push_merged(&mut out, Interval::new(lo, hi));
            }
        }
        if pa.t1 <= pb.t1 {
            i += 1;
        }
        if pb.t1 <= pa.t1 {
            j += 1;
        }
    }
    out
}

/// Exact contact set of two trajectories over their common horizon.
pub fn contact_intervals(a: &Trajectory, b: &Trajectory, r: f64) -> ContactSet {
    ContactSet {
        pair: (a.device, b.device),
        intervals: contact_intervals_from_pieces(&a.pieces(), &b.pieces(), r),
    }
}

/// Contact sets of all pairs of a population. Pairs not stored have no
/// contact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ContactStore {
    n: usize,
    horizon: f64,
    sets: HashMap<(DeviceId, DeviceId), Vec<Interval>>,
}

fn key(i: DeviceId, j: DeviceId) -> (DeviceId, DeviceId) {
    if i < j {
        (i, j)
    } else {
        (j, i)
    }
}

impl ContactStore {
    pub fn new(n: usize, horizon: f64) -> Self {
        ContactStore {
            n,
            horizon,
            sets: HashMap::new(),
        }
    }

    /// Contact that never ends between every listed pair.
    pub fn permanent(n: usize, pairs: impl IntoIterator<Item = (DeviceId, DeviceId)>) -> Self {
        let mut store = ContactStore::new(n, f64::INFINITY);
        for (i, j) in pairs {
            store.insert(i, j, vec![Interval::permanent()]);
        }
        store
    }

    pub fn insert(&mut self, i: DeviceId, j: DeviceId, intervals: Vec<Interval>) {
        if i != j && !intervals.is_empty() {
            self.sets.insert(key(i, j), intervals);
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn get(&self, i: DeviceId, j: DeviceId) -> Result<&[Interval]> {
        for id in [i, j] {
            if id as usize >= self.n {
                return Err(Error::UnknownDevice(id));
            }
        }
        Ok(self.sets.get(&key(i, j)).map_or(&[], Vec::as_slice))
    }

    /// Pairs `(i, j)` with `i < j` and at least one contact, sorted.
    pub fn pairs(&self) -> Vec<(DeviceId, DeviceId)> {
        let mut pairs: Vec<_> = self.sets.keys().copied().collect();
        pairs.sort_unstable();
        pairs
    }

    /// Partners of every device, sorted by id.
    pub fn neighbours(&self) -> Vec<Vec<DeviceId>> {
        let mut adj = vec![Vec::new(); self.n];
        for (i, j) in self.pairs() {
            adj[i as usize].push(j);
            adj[j as usize].push(i);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    /// CSV with columns `i,j,t_start,t_end`, one line per interval.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,j,t_start,t_end\n");
        for (i, j) in self.pairs() {
            for iv in &self.sets[&(i, j)] {
                let _ = writeln!(out, "{i},{j},{:.12e},{:.12e}", iv.start, iv.end);
            }
        }
        out
    }
}

/// Pairs whose start points are close enough that their trajectories might
/// ever come within `r`, as `(i, j)` with `i < j`.
pub fn candidate_pairs(
    g: &StreetGraph,
    trajectories: &[Trajectory],
    r: f64,
) -> Vec<(usize, usize)> {
    let starts: Vec<Point> = trajectories.iter().map(|t| g.position(t.start)).collect();
    let reach: Vec<f64> = trajectories
        .iter()
        .map(|t| t.excursion(g) + r / 2.0)
        .collect();
    let boxes: Vec<(Point, Point)> = starts
        .iter()
        .zip(&reach)
        .map(|(&p, &e)| (p - Point::new(e, e), p + Point::new(e, e)))
        .collect();
    let cell = reach.iter().copied().fold(0.0, f64::max).max(r) * 2.0;
    BoxGrid::new(&boxes, cell)
        .candidate_pairs()
        .into_iter()
        .map(|(i, j)| (i as usize, j as usize))
        .filter(|&(i, j)| starts[i].distance(starts[j]) <= reach[i] + reach[j])
        .collect()
}

/// Contact sets of every pair, computed in parallel over pruned candidate
/// pairs. Trajectory `k` must belong to device `k`.
pub fn build_contacts(g: &StreetGraph, trajectories: &[Trajectory], r: f64) -> ContactStore {
    let horizon = trajectories
        .iter()
        .map(|t| t.horizon)
        .fold(f64::INFINITY, f64::min);
    let pieces: Vec<Vec<MotionPiece>> = trajectories.par_iter().map(Trajectory::pieces).collect();
    let found: Vec<(usize, usize, Vec<Interval>)> = candidate_pairs(g, trajectories, r)
        .into_par_iter()
        .map(|(i, j)| {
            (
                i,
                j,
                contact_intervals_from_pieces(&pieces[i], &pieces[j], r),
            )
        })
        .collect();
    let mut store = ContactStore::new(trajectories.len(), horizon);
    for (i, j, ivs) in found {
        store.insert(i as DeviceId, j as DeviceId, ivs);
    }
    store
}

/// Undirected edge with the first contact interval longer than `rho`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub i: DeviceId,
    pub j: DeviceId,
    pub witness: Option<Interval>,
}

/// The static graph on devices and knights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectivityGraph {
    n: usize,
    edges: Vec<Edge>,
    adjacency: Vec<Vec<DeviceId>>,
}

impl ConnectivityGraph {
    /// Self-loops and duplicates are dropped; edges are normalized to
    /// `i < j` and sorted.
    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut list: Vec<Edge> = Vec::new();
        for e in edges {
            for id in [e.i, e.j] {
                if id as usize >= n {
                    return Err(Error::UnknownDevice(id));
                }
            }
            if e.i == e.j {
                continue;
            }
            let (i, j) = key(e.i, e.j);
            list.push(Edge {
                i,
                j,
                witness: e.witness,
            });
        }
        list.sort_by_key(|e| (e.i, e.j));
        list.dedup_by_key(|e| (e.i, e.j));
        let mut adjacency = vec![Vec::new(); n];
        for e in &list {
            adjacency[e.i as usize].push(e.j);
            adjacency[e.j as usize].push(e.i);
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        Ok(ConnectivityGraph {
            n,
            edges: list,
            adjacency,
        })
    }

    pub fn from_pairs(n: usize, pairs: &[(DeviceId, DeviceId)]) -> Result<Self> {
        Self::from_edges(
            n,
            pairs.iter().map(|&(i, j)| Edge {
                i,
                j,
                witness: None,
            }),
        )
    }

    /// Edges of every pair with a contact interval longer than `rho`.
    pub fn from_contacts(store: &ContactStore, rho: f64) -> Self {
        let edges = store.pairs().into_iter().filter_map(|(i, j)| {
            witness(store.get(i, j).expect("stored pair"), rho).map(|w| Edge {
                i,
                j,
                witness: Some(w),
            })
        });
        Self::from_edges(store.len(), edges).expect("store ids are in range")
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn neighbours(&self, i: DeviceId) -> &[DeviceId] {
        &self.adjacency[i as usize]
    }

    pub fn degree(&self, i: DeviceId) -> usize {
        self.adjacency[i as usize].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    pub fn has(&self, i: DeviceId, j: DeviceId) -> bool {
        self.adjacency
            .get(i as usize)
            .is_some_and(|a| a.binary_search(&j).is_ok())
    }

    /// Graph restricted to `keep` (by old id), relabelled in increasing id
    /// order. Returns the graph and the old id of each new vertex.
    pub fn induced(&self, keep: &[bool]) -> (ConnectivityGraph, Vec<DeviceId>) {
        let mut new_id = vec![u32::MAX; self.n];
        let mut old = Vec::new();
        for (i, &k) in keep.iter().enumerate().take(self.n) {
            if k {
                new_id[i] = old.len() as u32;
                old.push(i as DeviceId);
            }
        }
        let edges = self.edges.iter().filter_map(|e| {
            let (a, b) = (new_id[e.i as usize], new_id[e.j as usize]);
            (a != u32::MAX && b != u32::MAX).then_some(Edge {
                i: a,
                j: b,
                witness: e.witness,
            })
        });
        (
            ConnectivityGraph::from_edges(old.len(), edges).expect("relabelled ids are in range"),
            old,
        )
    }

    /// Edge list CSV `i,j,t_start,t_end`, with empty witness fields for
    /// edges without one. A `# vertices=n` comment comes first.
    pub fn to_csv(&self) -> String {
        let mut out = format!("# vertices={}\ni,j,t_start,t_end\n", self.n);
        for e in &self.edges {
            match e.witness {
                Some(w) => {
                    let _ = writeln!(out, "{},{},{:.12e},{:.12e}", e.i, e.j, w.start, w.end);
                }
                None => {
                    let _ = writeln!(out, "{},{},,", e.i, e.j);
                }
            }
        }
        out
    }

    /// Parse an edge list. Lines are `i,j` or `i,j,t_start,t_end`; `#`
    /// comments and a header line are skipped. The vertex count comes from
    /// a `# vertices=n` comment or else from the largest id.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut n: Option<usize> = None;
        let mut edges = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                for field in comment.split_whitespace() {
                    if let Some(v) = field.strip_prefix("vertices=") {
                        n = Some(
                            v.parse()
                                .map_err(|e| Error::Parse(format!("vertices: {e}")))?,
                        );
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields[0] == "i" {
                continue;
            }
            let bad = |what: &str| Error::Parse(format!("edge list line {}: {what}", lineno + 1));
            if fields.len() != 2 && fields.len() != 4 {
                return Err(bad("expected 2 or 4 fields"));
            }
            let i: DeviceId = fields[0].parse().map_err(|_| bad("bad vertex id"))?;
            let j: DeviceId = fields[1].parse().map_err(|_| bad("bad vertex id"))?;
            let witness = if fields.len() == 4 && !fields[2].is_empty() {
                let s: f64 = fields[2].parse().map_err(|_| bad("bad t_start"))?;
                let e: f64 = fields[3].parse().map_err(|_| bad("bad t_end"))?;
                Some(Interval::new(s, e))
            } else {
                None
            };
            edges.push(Edge { i, j, witness });
        }
        let n = n.unwrap_or_else(|| {
            edges
                .iter()
                .map(|e| e.i.max(e.j) as usize + 1)
                .max()
                .unwrap_or(0)
        });
        Self::from_edges(n, edges)
    }
}

/// Contacts of all pairs followed by the `rho` edge filter.
pub fn build_connectivity_graph(
    g: &StreetGraph,
    trajectories: &[Trajectory],
    rho: f64,
    r: f64,
) -> ConnectivityGraph {
    ConnectivityGraph::from_contacts(&build_contacts(g, trajectories, r), rho)
}

/// Largest shortest-route distance from `x` to the support of the kernel
/// at `x`, plus `r / 2`.
pub fn route_reach(g: &StreetGraph, x: StreetPoint, kernel: &dyn WaypointKernel, r: f64) -> f64 {
    let pieces = kernel.support(g, x);
    let mut wanted: Vec<_> = pieces
        .iter()
        .flat_map(|p| {
            let s = g.street(p.street);
            [s.from, s.to]
        })
        .collect();
    wanted.sort_unstable();
    wanted.dedup();
    let dist = crossing_distances(g, x, &wanted);
    let mut best: f64 = 0.0;
    for p in &pieces {
        let s = g.street(p.street);
        let (da, db, len) = (dist[&s.from], dist[&s.to], s.length);
        let same = p.street == x.street;
        let f = |o: f64| {
            let mut v = (da + o).min(db + len - o);
            if same {
                v = v.min((o - x.offset).abs());
            }
            v
        };
        let mut candidates = vec![p.lo, p.hi, (db + len - da) / 2.0];
        if same {
            candidates.extend([x.offset, (x.offset + db + len) / 2.0, (x.offset - da) / 2.0]);
        }
        for o in candidates {
            if o >= p.lo && o <= p.hi {
                best = best.max(f(o));
            }
        }
    }
    best + r / 2.0
}

/// For every device, the number of others whose start lies within the sum
/// of both route reaches.
pub fn geo_degree_bound(
    g: &StreetGraph,
    positions: &[StreetPoint],
    kernel: &dyn WaypointKernel,
    r: f64,
) -> Vec<usize> {
    let reach: Vec<f64> = positions
        .par_iter()
        .map(|&x| route_reach(g, x, kernel, r))
        .collect();
    let pts: Vec<Point> = positions.iter().map(|&x| g.position(x)).collect();
    let boxes: Vec<(Point, Point)> = pts
        .iter()
        .zip(&reach)
        .map(|(&p, &e)| (p - Point::new(e, e), p + Point::new(e, e)))
        .collect();
    let cell = reach.iter().copied().fold(0.0, f64::max) * 2.0;
    let mut deg = vec![0; positions.len()];
    for (i, j) in BoxGrid::new(&boxes, cell).candidate_pairs() {
        let (i, j) = (i as usize, j as usize);
        if pts[i].distance(pts[j]) <= reach[i] + reach[j] {
            deg[i] += 1;
            deg[j] += 1;
        }
    }
    deg
}
