//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use std::collections::VecDeque;

use chase_escape::contact::{ConnectivityGraph, ContactStore, Interval};
use chase_escape::epidemic::TimerTable;
use chase_escape::mobility::Trajectory;
use chase_escape::points::{DeviceId, Role};
use chase_escape::street::StreetGraph;

/// Contact runs found by sampling both trajectories every `step` on
/// `[0, horizon]`: maximal runs of sample times at which the devices share
/// a street and are closer than `r`, as (first, last) sample times.
pub fn sampled_contacts(
    g: &StreetGraph,
    a: &Trajectory,
    b: &Trajectory,
    r: f64,
    step: f64,
) -> Vec<(f64, f64)> {
    let horizon = a.horizon.min(b.horizon);
    let n = (horizon / step).floor() as usize;
    let mut runs = Vec::new();
    let mut open: Option<(f64, f64)> = None;
    for k in 0..=n {
        let t = k as f64 * step;
        let pa = a.position_at(g, t).unwrap();
        let pb = b.position_at(g, t).unwrap();
        let touching =
            pa.street_point.street == pb.street_point.street && pa.point.distance(pb.point) < r;
        open = match (open, touching) {
            (None, true) => Some((t, t)),
            (Some((s, _)), true) => Some((s, t)),
            (Some(run), false) => {
                runs.push(run);
                None
            }
            (None, false) => None,
        };
    }
    runs.extend(open);
    runs
}

/// Compare analytic intervals against sampled runs at resolution `step`:
/// every run must match one interval at both ends within `tol`, and every
/// interval longer than two steps must be matched by a run. Intervals
/// separated by less than two steps are merged first.
pub fn compare_with_samples(
    analytic: &[Interval],
    runs: &[(f64, f64)],
    step: f64,
    tol: f64,
) -> Result<(), String> {
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for iv in analytic {
        match merged.last_mut() {
            Some(last) if iv.start - last.1 < 2.0 * step => last.1 = iv.end,
            _ => merged.push((iv.start, iv.end)),
        }
    }
    for &(s, e) in runs {
        if !merged
            .iter()
            .any(|&(a, b)| (a - s).abs() <= tol && (b - e).abs() <= tol)
        {
            return Err(format!(
                "sampled run ({s}, {e}) has no analytic match in {merged:?}"
            ));
        }
    }
    for &(a, b) in &merged {
        if b - a > 2.0 * step
            && !runs
                .iter()
                .any(|&(s, e)| (a - s).abs() <= tol && (b - e).abs() <= tol)
        {
            return Err(format!(
                "analytic interval ({a}, {b}) not sampled; runs {runs:?}"
            ));
        }
    }
    Ok(())
}

/// Earliest time a window of length `rho` fits in one contact interval
/// starting no earlier than `onset`.
pub fn earliest_completion(intervals: &[Interval], onset: f64, rho: f64) -> Option<f64> {
    intervals
        .iter()
        .filter_map(|iv| {
            let s = if onset > iv.start { onset } else { iv.start };
            let t = s + rho;
            let ok = (s == iv.start && t < iv.end) || (s > iv.start && t <= iv.end);
            ok.then_some(t)
        })
        .reduce(f64::min)
}

/// Knight-free infection times by fixpoint iteration over all pairs.
pub fn temporal_closure(
    n: usize,
    root: DeviceId,
    contacts: &ContactStore,
    timers: &TimerTable,
    horizon: f64,
) -> Vec<Option<f64>> {
    let mut tau: Vec<Option<f64>> = vec![None; n];
    tau[root as usize] = Some(0.0);
    loop {
        let mut changed = false;
        for (i, j) in contacts.pairs() {
            for (s, t) in [(i, j), (j, i)] {
                let Some(ts) = tau[s as usize] else { continue };
                let rho = timers.infection(s, t).unwrap();
                let Some(c) = earliest_completion(contacts.get(s, t).unwrap(), ts, rho) else {
                    continue;
                };
                if c <= horizon && tau[t as usize].is_none_or(|old| c < old) {
                    tau[t as usize] = Some(c);
                    changed = true;
                }
            }
        }
        if !changed {
            return tau;
        }
    }
}

pub fn adjacency(g: &ConnectivityGraph) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); g.vertex_count()];
    for e in g.edges() {
        adj[e.i as usize].push(e.j as usize);
        adj[e.j as usize].push(e.i as usize);
    }
    adj
}

/// Hop distances by breadth-first search; `usize::MAX` if unreachable.
pub fn bfs(adj: &[Vec<usize>], from: usize, allowed: impl Fn(usize) -> bool) -> Vec<usize> {
    let mut dist = vec![usize::MAX; adj.len()];
    let mut queue = VecDeque::from([from]);
    dist[from] = 0;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == usize::MAX && allowed(v) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Component sizes by breadth-first search, largest first.
pub fn bfs_component_sizes(adj: &[Vec<usize>]) -> Vec<usize> {
    let mut seen = vec![false; adj.len()];
    let mut sizes = Vec::new();
    for s in 0..adj.len() {
        if seen[s] {
            continue;
        }
        let d = bfs(adj, s, |_| true);
        let members: Vec<usize> = (0..adj.len()).filter(|&v| d[v] != usize::MAX).collect();
        for &v in &members {
            seen[v] = true;
        }
        sizes.push(members.len());
    }
    sizes.sort_unstable_by(|a, b| b.cmp(a));
    sizes
}

/// `side x side` grid graph with each edge kept with probability
/// `keep(u, v)`; vertex `(x, y)` has id `y * side + x`.
pub fn lattice(
    side: usize,
    mut keep: impl FnMut(usize, usize) -> bool,
) -> Vec<(DeviceId, DeviceId)> {
    let mut pairs = Vec::new();
    for y in 0..side {
        for x in 0..side {
            let u = y * side + x;
            if x + 1 < side && keep(u, u + 1) {
                pairs.push((u as DeviceId, (u + 1) as DeviceId));
            }
            if y + 1 < side && keep(u, u + side) {
                pairs.push((u as DeviceId, (u + side) as DeviceId));
            }
        }
    }
    pairs
}

pub fn roles_with_knights(n: usize, knights: &[usize]) -> Vec<Role> {
    let mut roles = vec![Role::Susceptible; n];
    for &k in knights {
        roles[k] = Role::Knight;
    }
    roles
}
