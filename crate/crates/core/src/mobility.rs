//! Waypoint kernels, speeds and bounce-back trajectories.
//!
//! A device walks from its start to its target along a shortest route,
//! turns around, walks back with the same speed, and repeats. Trajectories
//! are stored as exact piecewise-linear schedules in street offsets.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::points::DeviceId;
use crate::street::{shortest_path, Leg, Route, StreetGraph, StreetId, StreetPoint};

/// Distribution of device speeds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum SpeedDistribution {
    Dirac { v: f64 },
    Uniform { v_min: f64, v_max: f64 },
}

impl SpeedDistribution {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SpeedDistribution::Dirac { v } => {
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::invalid(
                        "speed.v",
                        format!("must be positive and finite, got {v}"),
                    ));
                }
            }
            SpeedDistribution::Uniform { v_min, v_max } => {
                if !(v_min > 0.0) {
                    return Err(Error::invalid(
                        "speed.v_min",
                        format!("must be positive, got {v_min}"),
                    ));
                }
                if !(v_min <= v_max) || !v_max.is_finite() {
                    return Err(Error::invalid(
                        "speed.v_max",
                        format!("must be finite and at least v_min = {v_min}, got {v_max}"),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            SpeedDistribution::Dirac { v } => v,
            SpeedDistribution::Uniform { v_min, v_max } => {
                if v_min == v_max {
                    v_min
                } else {
                    rng.random_range(v_min..v_max)
                }
            }
        }
    }

    pub fn v_min(&self) -> f64 {
        match *self {
            SpeedDistribution::Dirac { v } => v,
            SpeedDistribution::Uniform { v_min, .. } => v_min,
        }
    }

    pub fn v_max(&self) -> f64 {
        match *self {
            SpeedDistribution::Dirac { v } => v,
            SpeedDistribution::Uniform { v_max, .. } => v_max,
        }
    }

    /// The same law with every value multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> SpeedDistribution {
        match *self {
            SpeedDistribution::Dirac { v } => SpeedDistribution::Dirac { v: v * factor },
            SpeedDistribution::Uniform { v_min, v_max } => SpeedDistribution::Uniform {
                v_min: v_min * factor,
                v_max: v_max * factor,
            },
        }
    }
}

/// A sub-interval `[lo, hi]` of one street, in offsets.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupportPiece {
    pub street: StreetId,
    pub lo: f64,
    pub hi: f64,
}

impl SupportPiece {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

/// The waypoint kernel: the law of a device's target given its start.
pub trait WaypointKernel: Sync {
    fn sample(&self, g: &StreetGraph, x: StreetPoint, rng: &mut dyn RngCore) -> StreetPoint;

    /// Pieces of street covering the support of the kernel at `x`.
    fn support(&self, g: &StreetGraph, x: StreetPoint) -> Vec<SupportPiece>;
}

/// Uniform on the part of the street system within Euclidean distance
/// `radius` of the start, restricted to the start's connected component so
/// that every target can be reached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformBall {
    pub radius: f64,
}

impl UniformBall {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(Error::invalid(
                "kernel_radius",
                format!("must be positive, got {radius}"),
            ));
        }
        Ok(UniformBall { radius })
    }
}

/// Offsets `[lo, hi]` of the street lying in the closed disc of radius `r`
/// around `center`, if that part has positive length.
pub fn clip_street_to_disc(
    g: &StreetGraph,
    s: StreetId,
    center: Point,
    r: f64,
) -> Option<(f64, f64)> {
    let street = g.street(s);
    let d = street.direction();
    let w = street.start - center;
    let b = d.dot(w);
    let c = w.dot(w) - r * r;
    let disc = b * b - c;
    if disc <= 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let lo = (-b - root).max(0.0);
    let hi = (-b + root).min(street.length);
    (hi > lo).then_some((lo, hi))
}

impl WaypointKernel for UniformBall {
    fn sample(&self, g: &StreetGraph, x: StreetPoint, rng: &mut dyn RngCore) -> StreetPoint {
        let pieces = self.support(g, x);
        let total: f64 = pieces.iter().map(SupportPiece::length).sum();
        let mut u = rng.random::<f64>() * total;
        for p in &pieces {
            if u < p.length() {
                return StreetPoint::new(p.street, p.lo + u);
            }
            u -= p.length();
        }
        let last = pieces
            .last()
            .expect("the start street always meets the ball");
        StreetPoint::new(last.street, last.hi)
    }

    fn support(&self, g: &StreetGraph, x: StreetPoint) -> Vec<SupportPiece> {
        let center = g.position(x);
        let component = g.street_component(x.street);
        let mut out: Vec<SupportPiece> = g
            .streets_near(center, self.radius)
            .filter(|&s| g.street_component(s) == component)
            .filter_map(|s| {
                clip_street_to_disc(g, s, center, self.radius).map(|(lo, hi)| SupportPiece {
                    street: s,
                    lo,
                    hi,
                })
            })
            .collect();
        if out.is_empty() {
            // Only possible through rounding when the start street is tiny.
            let len = g.street(x.street).length;
            out.push(SupportPiece {
                street: x.street,
                lo: 0.0,
                hi: len,
            });
        }
        out
    }
}

/// Every device heads for the same fixed point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FixedTarget(pub StreetPoint);

impl WaypointKernel for FixedTarget {
    fn sample(&self, _: &StreetGraph, _: StreetPoint, _: &mut dyn RngCore) -> StreetPoint {
        self.0
    }

    fn support(&self, _: &StreetGraph, _: StreetPoint) -> Vec<SupportPiece> {
        vec![SupportPiece {
            street: self.0.street,
            lo: self.0.offset,
            hi: self.0.offset,
        }]
    }
}

/// Devices stay where they are.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stationary;

impl WaypointKernel for Stationary {
    fn sample(&self, _: &StreetGraph, x: StreetPoint, _: &mut dyn RngCore) -> StreetPoint {
        x
    }

    fn support(&self, _: &StreetGraph, x: StreetPoint) -> Vec<SupportPiece> {
        vec![SupportPiece {
            street: x.street,
            lo: x.offset,
            hi: x.offset,
        }]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Outbound,
    Inbound,
}

/// Linear motion on one street: `offset(t) = offset0 + velocity * (t - t0)`
/// for `t` in `[t0, t1)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotionPiece {
    pub t0: f64,
    pub t1: f64,
    pub street: StreetId,
    pub offset0: f64,
    pub velocity: f64,
}

impl MotionPiece {
    pub fn offset_at(&self, t: f64) -> f64 {
        if self.velocity == 0.0 {
            self.offset0
        } else {
            self.offset0 + self.velocity * (t - self.t0)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub point: Point,
    pub street_point: StreetPoint,
    pub direction: Direction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakpoint {
    pub t: f64,
    pub street: StreetId,
    pub offset: f64,
    pub direction: Direction,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub device: DeviceId,
    pub start: StreetPoint,
    pub target: StreetPoint,
    pub route: Route,
    /// One-way length.
    pub length: f64,
    pub speed: f64,
    pub horizon: f64,
    /// One period of motion, outbound then inbound, times in `[0, 2d/V]`.
    cycle: Vec<MotionPiece>,
}

impl Trajectory {
    /// Follow `route` from `start` at `speed` up to `horizon`.
    pub fn from_route(
        device: DeviceId,
        start: StreetPoint,
        route: Route,
        speed: f64,
        horizon: f64,
    ) -> Result<Self> {
        if !(speed > 0.0) || !speed.is_finite() {
            return Err(Error::invalid(
                "speed",
                format!("must be positive, got {speed}"),
            ));
        }
        if !(horizon > 0.0) {
            return Err(Error::invalid(
                "t_sim",
                format!("must be positive, got {horizon}"),
            ));
        }
        let legs: Vec<Leg> = route
            .legs
            .iter()
            .copied()
            .filter(|l| l.length() > 0.0)
            .collect();
        let mut cycle = Vec::with_capacity(2 * legs.len());
        let mut walked = 0.0;
        for leg in &legs {
            let next = walked + leg.length();
            cycle.push(MotionPiece {
                t0: walked / speed,
                t1: next / speed,
                street: leg.street,
                offset0: leg.from,
                velocity: (leg.to - leg.from).signum() * speed,
            });
            walked = next;
        }
        let d = walked;
        for leg in legs.iter().rev() {
            let next = walked + leg.length();
            cycle.push(MotionPiece {
                t0: walked / speed,
                t1: next / speed,
                street: leg.street,
                offset0: leg.to,
                velocity: (leg.from - leg.to).signum() * speed,
            });
            walked = next;
        }
        if let Some(last) = cycle.last_mut() {
            last.t1 = 2.0 * d / speed;
        }
        let target = legs
            .last()
            .map_or(start, |l| StreetPoint::new(l.street, l.to));
        let start = legs
            .first()
            .map_or(start, |l| StreetPoint::new(l.street, l.from));
        Ok(Trajectory {
            device,
            start,
            target,
            route: Route { legs, length: d },
            length: d,
            speed,
            horizon,
            cycle,
        })
    }

    pub fn stationary(device: DeviceId, at: StreetPoint, horizon: f64) -> Result<Self> {
        Self::from_route(
            device,
            at,
            Route {
                legs: Vec::new(),
                length: 0.0,
            },
            1.0,
            horizon,
        )
    }

    pub fn is_stationary(&self) -> bool {
        self.cycle.is_empty()
    }

    /// Duration of one out-and-back cycle, `2d/V`.
    pub fn period(&self) -> f64 {
        2.0 * self.length / self.speed
    }

    fn phase(&self, t: f64) -> f64 {
        let p = self.period();
        let n = (t / p).floor();
        let phase = t - n * p;
        if phase >= p {
            phase - p
        } else if phase < 0.0 {
            phase + p
        } else {
            phase
        }
    }

    pub fn position_at(&self, g: &StreetGraph, t: f64) -> Result<Position> {
        if !(t >= 0.0 && t <= self.horizon) {
            return Err(Error::TimeOutOfRange {
                t,
                horizon: self.horizon,
            });
        }
        if self.is_stationary() {
            return Ok(Position {
                point: g.position(self.start),
                street_point: self.start,
                direction: Direction::Outbound,
            });
        }
        let phase = self.phase(t);
        // Half-open pieces: the first piece with t1 > phase is the one being
        // entered at a breakpoint.
        let k = self
            .cycle
            .partition_point(|p| p.t1 <= phase)
            .min(self.cycle.len() - 1);
        let piece = self.cycle[k];
        let sp = StreetPoint::new(piece.street, piece.offset_at(phase));
        Ok(Position {
            point: g.position(sp),
            street_point: sp,
            direction: if phase < self.length / self.speed {
                Direction::Outbound
            } else {
                Direction::Inbound
            },
        })
    }

    /// All motion pieces over `[0, horizon]`, in time order.
    pub fn pieces(&self) -> Vec<MotionPiece> {
        if self.is_stationary() {
            return vec![MotionPiece {
                t0: 0.0,
                t1: self.horizon,
                street: self.start.street,
                offset0: self.start.offset,
                velocity: 0.0,
            }];
        }
        let p = self.period();
        let mut out = Vec::new();
        let mut n = 0u64;
        loop {
            let base = n as f64 * p;
            if base >= self.horizon {
                break;
            }
            let last = self.cycle.len() - 1;
            let mut t0 = base;
            for (k, c) in self.cycle.iter().enumerate() {
                if t0 >= self.horizon {
                    break;
                }
                let end = if k == last {
                    (n + 1) as f64 * p
                } else {
                    base + c.t1
                };
                let t1 = end.min(self.horizon);
                let start = t0;
                t0 = end;
                if t1 > start {
                    let t0 = start;
                    out.push(MotionPiece {
                        t0,
                        t1,
                        street: c.street,
                        offset0: c.offset0,
                        velocity: c.velocity,
                    });
                }
            }
            n += 1;
        }
        out
    }

    /// Largest Euclidean distance from the start reached along the route.
    pub fn excursion(&self, g: &StreetGraph) -> f64 {
        let s = g.position(self.start);
        self.route
            .polyline(g)
            .into_iter()
            .map(|p| p.distance(s))
            .fold(0.0, f64::max)
    }

    /// Piece starts over `[0, horizon]`, plus the final position.
    pub fn breakpoints(&self, g: &StreetGraph) -> Vec<Breakpoint> {
        let half = self.length / self.speed;
        let direction = |t: f64| {
            if self.is_stationary() || self.phase(t) < half {
                Direction::Outbound
            } else {
                Direction::Inbound
            }
        };
        let mut out: Vec<Breakpoint> = self
            .pieces()
            .into_iter()
            .map(|m| Breakpoint {
                t: m.t0,
                street: m.street,
                offset: m.offset0,
                direction: direction(m.t0),
            })
            .collect();
        if let Ok(end) = self.position_at(g, self.horizon) {
            out.push(Breakpoint {
                t: self.horizon,
                street: end.street_point.street,
                offset: end.street_point.offset,
                direction: end.direction,
            });
        }
        out
    }
}

/// Shortest route from `start` to `target`, ties broken uniformly at random
/// with `rng`.
pub fn build_trajectory<R: Rng + ?Sized>(
    g: &StreetGraph,
    device: DeviceId,
    start: StreetPoint,
    target: StreetPoint,
    speed: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<Trajectory> {
    let paths = shortest_path(g, start, target)?;
    let route = if paths.count() > 1.0 {
        paths.sample(rng)
    } else {
        paths.route()
    };
    Trajectory::from_route(device, start, route, speed, horizon)
}

#[derive(Serialize)]
struct TrajectoryDump<'a> {
    device: DeviceId,
    speed: f64,
    one_way_length: f64,
    horizon: f64,
    breakpoints: &'a [Breakpoint],
}

/// JSON array of trajectories with their breakpoints.
pub fn trajectories_to_json(g: &StreetGraph, trajectories: &[Trajectory]) -> serde_json::Value {
    let dumps: Vec<serde_json::Value> = trajectories
        .iter()
        .map(|t| {
            let bps = t.breakpoints(g);
            serde_json::to_value(TrajectoryDump {
                device: t.device,
                speed: t.speed,
                one_way_length: t.length,
                horizon: t.horizon,
                breakpoints: &bps,
            })
            .expect("trajectory serializes")
        })
        .collect();
    serde_json::Value::Array(dumps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Window;
    use crate::rng::{ReplicaSeed, Substream};
    use crate::street::{build_graph, Segment, SegmentSystem};

    fn graph(segs: Vec<Segment>) -> StreetGraph {
        build_graph(&SegmentSystem::fixture(segs, Window::centered(40.0)).unwrap())
    }

    fn seg(x1: f64, y1: f64, x2: f64, y2: f64) -> Segment {
        Segment::new(Point::new(x1, y1), Point::new(x2, y2))
    }

    #[test]
    fn straight_street_bounce() {
        let g = graph(vec![seg(0.0, 0.0, 10.0, 0.0)]);
        let mut rng = ReplicaSeed::new(0, 0, 0).stream(Substream::Routes);
        let t = build_trajectory(
            &g,
            0,
            StreetPoint::new(StreetId(0), 0.0),
            StreetPoint::new(StreetId(0), 10.0),
            1.0,
            40.0,
            &mut rng,
        )
        .unwrap();
        assert_eq!(t.position_at(&g, 4.0).unwrap().street_point.offset, 4.0);
        let back = t.position_at(&g, 16.0).unwrap();
        assert_eq!(back.street_point.offset, 4.0);
        assert_eq!(back.direction, Direction::Inbound);
        assert_eq!(t.position_at(&g, 20.0).unwrap().street_point, t.start);
        let turn = t.position_at(&g, 10.0).unwrap();
        assert_eq!(turn.street_point.offset, 10.0);
        assert_eq!(turn.direction, Direction::Inbound);
        assert_eq!(
            t.position_at(&g, 0.0).unwrap().direction,
            Direction::Outbound
        );
        assert!(t.position_at(&g, 40.5).is_err());
        assert!(t.position_at(&g, -0.1).is_err());
    }

    #[test]
    fn crossing_instant_enters_the_next_street() {
        let g = graph(vec![seg(0.0, 0.0, 3.0, 0.0), seg(3.0, 0.0, 3.0, 4.0)]);
        let mut rng = ReplicaSeed::new(0, 0, 0).stream(Substream::Routes);
        let t = build_trajectory(
            &g,
            0,
            StreetPoint::new(StreetId(0), 0.0),
            StreetPoint::new(StreetId(1), 4.0),
            1.0,
            20.0,
            &mut rng,
        )
        .unwrap();
        let pos = t.position_at(&g, 3.0).unwrap();
        assert_eq!(pos.street_point.street, StreetId(1));
        assert_eq!(pos.point, Point::new(3.0, 0.0));
    }

    #[test]
    fn start_equal_target_is_stationary() {
        let g = graph(vec![seg(0.0, 0.0, 10.0, 0.0)]);
        let mut rng = ReplicaSeed::new(0, 0, 0).stream(Substream::Routes);
        let x = StreetPoint::new(StreetId(0), 2.5);
        let t = build_trajectory(&g, 0, x, x, 1.0, 5.0, &mut rng).unwrap();
        assert!(t.is_stationary());
        for s in [0.0, 1.3, 5.0] {
            assert_eq!(t.position_at(&g, s).unwrap().street_point, x);
        }
        assert_eq!(t.pieces().len(), 1);
    }

    #[test]
    fn uniform_ball_on_a_single_street() {
        let g = graph(vec![seg(0.0, 0.0, 10.0, 0.0)]);
        let k = UniformBall::new(2.0).unwrap();
        let x = StreetPoint::new(StreetId(0), 5.0);
        let s = k.support(&g, x);
        assert_eq!(s.len(), 1);
        assert!((s[0].lo - 3.0).abs() < 1e-12 && (s[0].hi - 7.0).abs() < 1e-12);
    }

    #[test]
    fn speed_validation() {
        assert!(SpeedDistribution::Dirac { v: 0.0 }.validate().is_err());
        assert!(SpeedDistribution::Uniform {
            v_min: 2.0,
            v_max: 1.0
        }
        .validate()
        .is_err());
        assert!(SpeedDistribution::Uniform {
            v_min: 1.0,
            v_max: 2.0
        }
        .validate()
        .is_ok());
    }
}
