use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::Point;
use crate::mobility::Trajectory;
use crate::points::DeviceId;
use crate::street::StreetGraph;

use super::trace::EpidemicTrace;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Extinct,
    LocalSurvival,
    GlobalProxy,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Extinct => "extinct",
            Verdict::LocalSurvival => "local_survival",
            Verdict::GlobalProxy => "global_proxy",
        })
    }
}

/// Device positions over time.
pub trait Positions {
    fn position(&self, id: DeviceId, t: f64) -> Point;

    /// Largest distance from `from` over `[t0, t1]`.
    fn max_distance(&self, id: DeviceId, from: Point, t0: f64, t1: f64) -> f64;
}

/// Devices that never move.
#[derive(Clone, Debug, PartialEq)]
pub struct FixedPositions(pub Vec<Point>);

impl Positions for FixedPositions {
    fn position(&self, id: DeviceId, _: f64) -> Point {
        self.0[id as usize]
    }

    fn max_distance(&self, id: DeviceId, from: Point, _: f64, _: f64) -> f64 {
        self.0[id as usize].distance(from)
    }
}

/// Devices following their trajectories.
pub struct MovingPositions<'a> {
    pub graph: &'a StreetGraph,
    pub trajectories: &'a [Trajectory],
}

impl Positions for MovingPositions<'_> {
    fn position(&self, id: DeviceId, t: f64) -> Point {
        let traj = &self.trajectories[id as usize];
        traj.position_at(self.graph, t.clamp(0.0, traj.horizon))
            .expect("clamped time is in range")
            .point
    }

    fn max_distance(&self, id: DeviceId, from: Point, t0: f64, t1: f64) -> f64 {
        let traj = &self.trajectories[id as usize];
        let (t0, t1) = (t0.max(0.0), t1.min(traj.horizon));
        if t1 < t0 {
            return 0.0;
        }
        // Distance to a fixed point is convex along each straight piece.
        let mut best = self
            .position(id, t0)
            .distance(from)
            .max(self.position(id, t1).distance(from));
        for p in traj.pieces() {
            if p.t1 <= t0 || p.t0 >= t1 {
                continue;
            }
            let street = self.graph.street(p.street);
            for t in [p.t0.max(t0), p.t1.min(t1)] {
                best = best.max(street.point_at(p.offset_at(t)).distance(from));
            }
        }
        best
    }
}

/// Finite-window survival proxy on `[0, t_end]`: extinct if nothing is
/// infected at `t_end`; otherwise global if some device got farther than
/// `reach_radius` from the root's initial position while infected, and
/// local if none did.
pub fn survival_verdict(
    trace: &EpidemicTrace,
    positions: &dyn Positions,
    reach_radius: f64,
    t_end: f64,
) -> Verdict {
    if trace.counts_at(t_end).infected == 0 {
        return Verdict::Extinct;
    }
    if max_infected_distance(trace, positions, t_end) > reach_radius {
        Verdict::GlobalProxy
    } else {
        Verdict::LocalSurvival
    }
}

/// Largest distance from the root's initial position reached by a device
/// while infected, up to `t_end`.
pub fn max_infected_distance(trace: &EpidemicTrace, positions: &dyn Positions, t_end: f64) -> f64 {
    let origin = positions.position(trace.root, 0.0);
    let mut best: f64 = 0.0;
    for id in trace.ever_infected() {
        let s = trace.infected_at[id as usize].expect("ever infected");
        let e = trace.patched_at[id as usize].unwrap_or(t_end).min(t_end);
        if s <= e {
            best = best.max(positions.max_distance(id, origin, s, e));
        }
    }
    best
}
