//! Chase-escape as an independent process on a fixed connectivity graph.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::contact::{ConnectivityGraph, ContactStore};
use crate::epidemic::{draw_pair_timers, run, EpidemicTrace, TimeDistribution, TimerTable};
use crate::error::{Error, Result};
use crate::points::{DeviceId, Role};
use crate::stats::Proportion;

/// Law of `x / b` for `x` drawn from `dist`: `b > 1` speeds the process up.
pub fn scale_distribution(dist: &TimeDistribution, b: f64) -> Result<TimeDistribution> {
    dist.scaled(b)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StaticScenario {
    pub graph: ConnectivityGraph,
    pub roles: Vec<Role>,
    pub root: DeviceId,
    pub rho_i: TimeDistribution,
    pub rho_w: TimeDistribution,
    /// Speed-up applied to the infection times.
    pub b: f64,
}

impl StaticScenario {
    pub fn new(
        graph: ConnectivityGraph,
        roles: Vec<Role>,
        root: DeviceId,
        rho_i: TimeDistribution,
        rho_w: TimeDistribution,
        b: f64,
    ) -> Result<Self> {
        if roles.len() != graph.vertex_count() {
            return Err(Error::invalid(
                "roles",
                format!(
                    "{} roles for {} vertices",
                    roles.len(),
                    graph.vertex_count()
                ),
            ));
        }
        match roles.get(root as usize) {
            None => return Err(Error::UnknownDevice(root)),
            Some(Role::Knight) => {
                return Err(Error::invalid("root", "the root must be susceptible"))
            }
            Some(Role::Susceptible) => {}
        }
        rho_i.validate("infection")?;
        rho_w.validate("patch")?;
        rho_i.scaled(b)?;
        Ok(StaticScenario {
            graph,
            roles,
            root,
            rho_i,
            rho_w,
            b,
        })
    }

    /// Every edge as a contact that never ends.
    pub fn contacts(&self) -> ContactStore {
        ContactStore::permanent(
            self.graph.vertex_count(),
            self.graph.edges().iter().map(|e| (e.i, e.j)),
        )
    }

    /// Pair timers with the infection law sped up by `b`.
    pub fn draw_timers<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<TimerTable> {
        let pairs: Vec<_> = self.graph.edges().iter().map(|e| (e.i, e.j)).collect();
        Ok(draw_pair_timers(
            &pairs,
            &self.rho_i.scaled(self.b)?,
            &self.rho_w,
            rng,
        ))
    }
}

/// Result of a static run together with its inputs, for auditing.
#[derive(Clone, Debug)]
pub struct StaticRun {
    pub trace: EpidemicTrace,
    pub contacts: ContactStore,
    pub timers: TimerTable,
}

/// Run the static model; `t_max = None` runs until nothing can change,
/// which on a finite graph always happens.
pub fn simulate_static<R: Rng + ?Sized>(
    scenario: &StaticScenario,
    rng: &mut R,
    t_max: Option<f64>,
) -> Result<StaticRun> {
    let timers = scenario.draw_timers(rng)?;
    let contacts = scenario.contacts();
    let trace = run(&scenario.roles, scenario.root, &contacts, &timers, t_max)?;
    Ok(StaticRun {
        trace,
        contacts,
        timers,
    })
}

/// `N + D` where `N` is the least positive integer with
/// `N * t_i > (N + 2D) * t_w`: with deterministic times and a knight at
/// hop distance `d` from the root, the infection cannot get farther than
/// this many hops.
pub fn reach_bound(d: u64, t_i: f64, t_w: f64) -> Result<u64> {
    if !(t_w > 0.0) || !t_i.is_finite() {
        return Err(Error::invalid(
            "t_w",
            format!("need 0 < t_w < t_i, got t_i = {t_i}, t_w = {t_w}"),
        ));
    }
    if !(t_i > t_w) {
        return Err(Error::UndefinedRegime(format!(
            "t_i = {t_i} <= t_w = {t_w}: the infection is never stopped"
        )));
    }
    if d == 0 {
        return Err(Error::invalid("d", "must be at least 1"));
    }
    let holds = |n: u64| n as f64 * t_i > (n + 2 * d) as f64 * t_w;
    let mut n = (2.0 * d as f64 * t_w / (t_i - t_w)).floor() as u64 + 1;
    while n > 1 && holds(n - 1) {
        n -= 1;
    }
    while !holds(n) {
        n += 1;
    }
    Ok(n + d)
}

/// Drop vertices with more than `max_degree` neighbours and keep each
/// remaining one with probability `p`. One uniform is drawn per vertex in id
/// order whether or not it passes the degree filter. Returns the induced
/// subgraph and the original id of each kept vertex.
pub fn thin_graph<R: Rng + ?Sized>(
    g: &ConnectivityGraph,
    max_degree: usize,
    p: f64,
    rng: &mut R,
) -> Result<(ConnectivityGraph, Vec<DeviceId>)> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("p", format!("must lie in [0, 1], got {p}")));
    }
    let keep: Vec<bool> = (0..g.vertex_count() as DeviceId)
        .map(|i| {
            let u: f64 = rng.random();
            g.degree(i) <= max_degree && u < p
        })
        .collect();
    Ok(g.induced(&keep))
}

/// Monte Carlo estimate of `P(min of m patch times > max of m infection
/// times / b)`.
pub fn good_device_probability<R: Rng + ?Sized>(
    m: usize,
    rho_i: &TimeDistribution,
    rho_w: &TimeDistribution,
    b: f64,
    n_samples: u64,
    rng: &mut R,
) -> Result<Proportion> {
    if m == 0 {
        return Err(Error::invalid("m", "must be at least 1"));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    if !(b > 0.0) {
        return Err(Error::invalid("b", format!("must be positive, got {b}")));
    }
    let mut hits = 0;
    for _ in 0..n_samples {
        let mut min_w = f64::INFINITY;
        let mut max_i: f64 = 0.0;
        for _ in 0..m {
            min_w = min_w.min(rho_w.quantile(rng.random()));
            max_i = max_i.max(rho_i.quantile(rng.random()));
        }
        if min_w > max_i / b {
            hits += 1;
        }
    }
    Ok(Proportion::new(hits, n_samples))
}

/// Closed form of [`good_device_probability`] when both laws are
/// exponential or both are Dirac.
pub fn good_device_probability_exact(
    m: usize,
    rho_i: &TimeDistribution,
    rho_w: &TimeDistribution,
    b: f64,
) -> Option<f64> {
    use TimeDistribution::*;
    match (*rho_i, *rho_w) {
        (Dirac { tau: ti }, Dirac { tau: tw }) => Some(if tw > ti / b { 1.0 } else { 0.0 }),
        (
            ShiftedExponential {
                shift: si,
                rate: ri,
            },
            ShiftedExponential {
                shift: sw,
                rate: rw,
            },
        ) if si == 0.0 && sw == 0.0 => {
            // E[(1 - exp(-ri b W))^m] with W ~ Exp(m rw), expanded binomially.
            let m_f = m as f64;
            let mut sum = 0.0;
            let mut binom = 1.0;
            for k in 0..=m {
                if k > 0 {
                    binom *= (m - k + 1) as f64 / k as f64;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                sum += sign * binom * m_f * rw / (m_f * rw + k as f64 * ri * b);
            }
            Some(sum)
        }
        _ => None,
    }
}

/// Summary of a static run used by reports.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HopReach {
    /// Largest hop distance from the root among ever-infected vertices.
    pub max_hops: usize,
    pub ever_infected: usize,
}

/// Hop distances from `root` by breadth-first search (`usize::MAX` when
/// unreachable).
pub fn hop_distances(g: &ConnectivityGraph, root: DeviceId) -> Vec<usize> {
    let mut dist = vec![usize::MAX; g.vertex_count()];
    let mut queue = std::collections::VecDeque::new();
    dist[root as usize] = 0;
    queue.push_back(root);
    while let Some(u) = queue.pop_front() {
        for &v in g.neighbours(u) {
            if dist[v as usize] == usize::MAX {
                dist[v as usize] = dist[u as usize] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

pub fn hop_reach(g: &ConnectivityGraph, trace: &EpidemicTrace) -> HopReach {
    let dist = hop_distances(g, trace.root);
    let infected = trace.ever_infected();
    HopReach {
        max_hops: infected
            .iter()
            .map(|&i| dist[i as usize])
            .max()
            .unwrap_or(0),
        ever_infected: infected.len(),
    }
}
