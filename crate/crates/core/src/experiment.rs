//! Monte Carlo harness: one replica from street generation to verdict,
//! replicated runs with confidence intervals, parameter sweeps and
//! percolation diagnostics.

use std::fmt::Write as _;
use std::time::{Duration, Instant};

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Engine, Scenario, VERSION};
use crate::contact::{build_contacts, geo_degree_bound, ConnectivityGraph, ContactStore};
use crate::epidemic::{
    draw_pair_timers, max_infected_distance, simulate_dynamic, survival_verdict, EpidemicTrace,
    FixedPositions, MovingPositions, Positions, TimerTable, Verdict,
};
use crate::error::{Error, Result};
use crate::geometry::{Point, Window};
use crate::mobility::{build_trajectory, Trajectory, WaypointKernel};
use crate::points::{root_typical, DeviceId, PointConfig};
use crate::rng::{ReplicaSeed, Substream};
use crate::static_model::{simulate_static, StaticScenario};
use crate::stats::Proportion;
use crate::street::{build_graph, SegmentSystem, StreetGraph};
use crate::union_find::UnionFind;

/// Rooting failures are retried this many times before a replica is
/// skipped.
pub const MAX_RETRIES: u64 = 10;

/// Everything random about one replica before the epidemic starts.
#[derive(Clone, Debug)]
pub struct Realization {
    pub replica: u64,
    pub attempt: u64,
    pub system: SegmentSystem,
    pub graph: StreetGraph,
    /// Rooted point configuration.
    pub points: PointConfig,
    pub trajectories: Vec<Trajectory>,
    pub contacts: ContactStore,
    pub connectivity: ConnectivityGraph,
}

impl Realization {
    pub fn seed(&self, master: u64) -> ReplicaSeed {
        ReplicaSeed::new(master, self.replica, self.attempt)
    }

    pub fn root(&self) -> DeviceId {
        self.points.root.expect("realizations are rooted")
    }

    pub fn initial_positions(&self) -> Vec<Point> {
        (0..self.points.len() as DeviceId)
            .map(|i| self.points.plane_position(&self.graph, i))
            .collect()
    }
}

/// Trajectories of every device, each drawing its target, speed and route
/// tie-break from substreams keyed by its id.
pub fn build_trajectories(
    g: &StreetGraph,
    points: &PointConfig,
    kernel: &dyn WaypointKernel,
    scenario: &Scenario,
    seed: ReplicaSeed,
) -> Result<Vec<Trajectory>> {
    let t_sim = scenario.t_sim();
    points
        .devices
        .par_iter()
        .map(|d| {
            let key = d.id as u64;
            let target = kernel.sample(g, d.position, &mut seed.keyed(Substream::Targets, key));
            let speed = scenario
                .mobility
                .speed
                .sample(&mut seed.keyed(Substream::Speeds, key));
            build_trajectory(
                g,
                d.id,
                d.position,
                target,
                speed,
                t_sim,
                &mut seed.keyed(Substream::Routes, key),
            )
        })
        .collect()
}

/// Draw the realization of `replica`, retrying rooting failures with fresh
/// attempts. `None` when every attempt failed.
pub fn realize(scenario: &Scenario, replica: u64) -> Result<Option<Realization>> {
    let window = scenario.window();
    let kernel = scenario.kernel()?;
    for attempt in 0..=MAX_RETRIES {
        let seed = ReplicaSeed::new(scenario.seed, replica, attempt);
        let system = scenario.street_model().generate_with_buffer(
            window,
            scenario.buffer(),
            &mut seed.stream(Substream::Streets),
        )?;
        let graph = build_graph(&system);
        let sampled = PointConfig::sample(
            &graph,
            scenario.devices.lambda,
            scenario.devices.lambda_w,
            &mut seed.stream(Substream::Devices),
            &mut seed.stream(Substream::Knights),
        )?;
        let points = match root_typical(&sampled, &graph, &window) {
            Ok(p) => p,
            Err(Error::Resample(_)) => continue,
            Err(e) => return Err(e),
        };
        let trajectories = build_trajectories(&graph, &points, &kernel, scenario, seed)?;
        let contacts = build_contacts(&graph, &trajectories, scenario.contact.r);
        let connectivity = ConnectivityGraph::from_contacts(&contacts, scenario.contact.rho);
        return Ok(Some(Realization {
            replica,
            attempt,
            system,
            graph,
            points,
            trajectories,
            contacts,
            connectivity,
        }));
    }
    Ok(None)
}

/// A finished replica with everything needed to audit it.
#[derive(Clone, Debug)]
pub struct ReplicaRun {
    pub realization: Realization,
    pub timers: TimerTable,
    /// Contacts the engine ran on: the trajectories' contacts for the
    /// dynamic engine, permanent edges for the static one.
    pub engine_contacts: ContactStore,
    pub trace: EpidemicTrace,
    pub verdict: Verdict,
    pub max_distance: f64,
}

impl ReplicaRun {
    /// Positions used for the verdict.
    pub fn positions(&self, engine: Engine) -> Box<dyn Positions + '_> {
        match engine {
            Engine::Dynamic => Box::new(MovingPositions {
                graph: &self.realization.graph,
                trajectories: &self.realization.trajectories,
            }),
            Engine::Static => Box::new(FixedPositions(self.realization.initial_positions())),
        }
    }
}

/// Run the epidemic of `scenario` on a realization.
pub fn run_epidemic(scenario: &Scenario, realization: Realization) -> Result<ReplicaRun> {
    let seed = realization.seed(scenario.seed);
    let mut timer_rng = seed.stream(Substream::TimersInfection);
    let root = realization.root();
    let reach = scenario.reach_radius();
    let ep = &scenario.epidemic;
    let (trace, timers, engine_contacts, t_end) = match scenario.engine {
        Engine::Dynamic => {
            let timers = draw_pair_timers(
                &realization.contacts.pairs(),
                &ep.infection,
                &ep.patch,
                &mut timer_rng,
            );
            let trace = simulate_dynamic(
                &realization.points,
                &realization.contacts,
                &timers,
                scenario.t_sim(),
            )?;
            (
                trace,
                timers,
                realization.contacts.clone(),
                scenario.t_sim(),
            )
        }
        Engine::Static => {
            let sc = StaticScenario::new(
                realization.connectivity.clone(),
                realization.points.roles(),
                root,
                ep.infection,
                ep.patch,
                ep.b,
            )?;
            let out = simulate_static(&sc, &mut timer_rng, None)?;
            (out.trace, out.timers, out.contacts, scenario.t_sim())
        }
    };
    let mut run = ReplicaRun {
        realization,
        timers,
        engine_contacts,
        trace,
        verdict: Verdict::Extinct,
        max_distance: 0.0,
    };
    let positions = run.positions(scenario.engine);
    let verdict = survival_verdict(&run.trace, positions.as_ref(), reach, t_end);
    let max_distance = max_infected_distance(&run.trace, positions.as_ref(), t_end);
    drop(positions);
    run.verdict = verdict;
    run.max_distance = max_distance;
    Ok(run)
}

/// Realize and run one replica; `None` if it had to be skipped.
pub fn simulate_replica(scenario: &Scenario, replica: u64) -> Result<Option<ReplicaRun>> {
    match realize(scenario, replica)? {
        Some(r) => run_epidemic(scenario, r).map(Some),
        None => Ok(None),
    }
}

/// Per-replica summary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaSummary {
    pub verdict: Verdict,
    pub devices: usize,
    pub knights: usize,
    pub ever_infected: usize,
    pub largest_fraction: f64,
    pub edges: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicaOutcome {
    pub replica: u64,
    /// `None` when rooting failed on every attempt.
    pub summary: Option<ReplicaSummary>,
}

pub fn run_replica(scenario: &Scenario, replica: u64) -> Result<ReplicaOutcome> {
    let summary = simulate_replica(scenario, replica)?.map(|run| {
        let r = &run.realization;
        ReplicaSummary {
            verdict: run.verdict,
            devices: r.points.len(),
            knights: r.points.knight_count(),
            ever_infected: run.trace.ever_infected().len(),
            largest_fraction: largest_fraction(&r.connectivity),
            edges: r.connectivity.edges().len(),
        }
    });
    if summary.is_none() {
        warn!("replica {replica} skipped: no susceptible device near the window centre");
    }
    Ok(ReplicaOutcome { replica, summary })
}

/// Aggregated replicas of one parameter point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub n_replicas: u64,
    pub skipped: u64,
    pub extinct: u64,
    pub local_survival: u64,
    pub global_proxy: u64,
    /// `global_proxy` over completed replicas, with its Wilson interval.
    pub frequency: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub mean_largest_fraction: f64,
    pub mean_ever_infected: f64,
    /// True when every replica was skipped.
    pub degenerate: bool,
}

impl RowStats {
    /// Order-independent aggregation.
    pub fn from_outcomes(outcomes: &[ReplicaOutcome]) -> Self {
        let mut s = RowStats {
            n_replicas: outcomes.len() as u64,
            skipped: 0,
            extinct: 0,
            local_survival: 0,
            global_proxy: 0,
            frequency: 0.0,
            ci_low: 0.0,
            ci_high: 1.0,
            mean_largest_fraction: 0.0,
            mean_ever_infected: 0.0,
            degenerate: false,
        };
        let mut sorted: Vec<&ReplicaOutcome> = outcomes.iter().collect();
        sorted.sort_by_key(|o| o.replica);
        let mut frac = 0.0;
        let mut infected = 0.0;
        for o in sorted {
            match o.summary {
                None => s.skipped += 1,
                Some(sum) => {
                    match sum.verdict {
                        Verdict::Extinct => s.extinct += 1,
                        Verdict::LocalSurvival => s.local_survival += 1,
                        Verdict::GlobalProxy => s.global_proxy += 1,
                    }
                    frac += sum.largest_fraction;
                    infected += sum.ever_infected as f64;
                }
            }
        }
        let completed = s.n_replicas - s.skipped;
        let p = Proportion::new(s.global_proxy, completed);
        s.frequency = p.estimate;
        s.ci_low = p.ci_low;
        s.ci_high = p.ci_high;
        if completed > 0 {
            s.mean_largest_fraction = frac / completed as f64;
            s.mean_ever_infected = infected / completed as f64;
        } else {
            s.degenerate = true;
        }
        s
    }
}

/// Run `f` on a pool of `parallelism` threads (0 for the global pool).
pub fn with_parallelism<T: Send>(parallelism: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if parallelism == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| Error::invalid("parallelism", e.to_string()))?;
    Ok(pool.install(f))
}

/// Outcomes of replicas `0..n` in replica order.
pub fn replica_outcomes(
    scenario: &Scenario,
    n: u64,
    parallelism: usize,
) -> Result<Vec<ReplicaOutcome>> {
    with_parallelism(parallelism, || {
        (0..n)
            .into_par_iter()
            .map(|i| run_replica(scenario, i))
            .collect::<Result<Vec<_>>>()
    })?
}

/// `n` replicas with seeds `(scenario.seed, 0..n)`. The result does not
/// depend on `parallelism`.
pub fn run_replicas(scenario: &Scenario, n: u64, parallelism: usize) -> Result<RowStats> {
    if n == 0 {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    let outcomes = replica_outcomes(scenario, n, parallelism)?;
    let stats = RowStats::from_outcomes(&outcomes);
    if stats.skipped > 0 {
        warn!("{} of {n} replicas skipped", stats.skipped);
    }
    Ok(stats)
}

/// Scalar parameters that can be swept.
pub const AXES: &[&str] = &[
    "lambda",
    "lambda_w",
    "r",
    "rho",
    "speed",
    "kernel_radius",
    "t_sim",
    "b",
    "window_side",
    "reach_radius",
    "infection_tau",
    "patch_tau",
];

/// Copy of `scenario` with one parameter changed. `speed`, `infection_tau`
/// and `patch_tau` set Dirac laws.
pub fn with_axis(scenario: &Scenario, axis: &str, value: f64) -> Result<Scenario> {
    use crate::epidemic::TimeDistribution::Dirac;
    use crate::mobility::SpeedDistribution;
    let mut s = scenario.clone();
    match axis {
        "lambda" => s.devices.lambda = value,
        "lambda_w" => s.devices.lambda_w = value,
        "r" => s.contact.r = value,
        "rho" => s.contact.rho = value,
        "speed" => s.mobility.speed = SpeedDistribution::Dirac { v: value },
        "kernel_radius" => s.mobility.kernel_radius = value,
        "t_sim" => s.epidemic.t_sim = Some(value),
        "b" => s.epidemic.b = value,
        "window_side" => s.streets.window_side = value,
        "reach_radius" => s.epidemic.reach_radius = Some(value),
        "infection_tau" => s.epidemic.infection = Dirac { tau: value },
        "patch_tau" => s.epidemic.patch = Dirac { tau: value },
        other => return Err(Error::UnknownAxis(other.to_string())),
    }
    s.resolve()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    #[serde(flatten)]
    pub stats: RowStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub version: String,
    pub scenario_hash: String,
    pub scenario: Scenario,
    pub axis: String,
    pub replicas: u64,
    pub rows: Vec<SweepRow>,
    /// Some interior row's lower bound exceeds both end rows' upper bounds.
    pub non_monotone: bool,
}

pub const CSV_HEADER: &str = "axis,value,n_replicas,skipped,extinct,local_survival,global_proxy,\
frequency,ci_low,ci_high,mean_largest_fraction,mean_ever_infected,degenerate";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "# chase-escape {} scenario={} seed={} replicas={} non_monotone={}",
            self.version, self.scenario_hash, self.scenario.seed, self.replicas, self.non_monotone
        )
        .unwrap();
        writeln!(out, "{CSV_HEADER}").unwrap();
        for row in &self.rows {
            let s = &row.stats;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.axis,
                row.value,
                s.n_replicas,
                s.skipped,
                s.extinct,
                s.local_survival,
                s.global_proxy,
                s.frequency,
                s.ci_low,
                s.ci_high,
                s.mean_largest_fraction,
                s.mean_ever_infected,
                s.degenerate
            )
            .unwrap();
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("sweep result serializes")
    }
}

/// True when some interior row's lower confidence bound exceeds the upper
/// bounds of both the first and the last row.
pub fn is_non_monotone(rows: &[SweepRow]) -> bool {
    let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
        return false;
    };
    rows.len() >= 3
        && rows[1..rows.len() - 1]
            .iter()
            .any(|r| r.stats.ci_low > first.stats.ci_high && r.stats.ci_low > last.stats.ci_high)
}

/// Sweep with the wall time of each row, kept apart from the result so the
/// result stays reproducible.
pub fn sweep_timed(
    scenario: &Scenario,
    axis: &str,
    values: &[f64],
    replicas: u64,
    parallelism: usize,
) -> Result<(SweepResult, Vec<Duration>)> {
    with_axis(scenario, axis, 1.0).or_else(|e| match e {
        Error::UnknownAxis(_) => Err(e),
        _ => Ok(scenario.clone()),
    })?;
    if replicas == 0 {
        return Err(Error::invalid("replicas", "must be at least 1"));
    }
    let mut rows = Vec::with_capacity(values.len());
    let mut times = Vec::with_capacity(values.len());
    for &v in values {
        let point = with_axis(scenario, axis, v)?;
        let start = Instant::now();
        let stats = run_replicas(&point, replicas, parallelism)?;
        times.push(start.elapsed());
        rows.push(SweepRow { value: v, stats });
    }
    let non_monotone = is_non_monotone(&rows);
    Ok((
        SweepResult {
            version: VERSION.to_string(),
            scenario_hash: scenario.hash(),
            scenario: scenario.clone(),
            axis: axis.to_string(),
            replicas,
            rows,
            non_monotone,
        },
        times,
    ))
}

/// One row per value; every row reuses the replica seeds `(seed, 0..n)`.
pub fn sweep(
    scenario: &Scenario,
    axis: &str,
    values: &[f64],
    replicas: u64,
    parallelism: usize,
) -> Result<SweepResult> {
    sweep_timed(scenario, axis, values, replicas, parallelism).map(|(r, _)| r)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PercolationReport {
    pub vertices: usize,
    pub edges: usize,
    /// Component sizes, largest first.
    pub component_sizes: Vec<usize>,
    pub largest_fraction: f64,
    /// Whether the root's component reaches the boundary band.
    pub touches_boundary: bool,
    /// `degree_histogram[k]` vertices have degree `k`.
    pub degree_histogram: Vec<usize>,
}

fn components(g: &ConnectivityGraph) -> UnionFind {
    let mut uf = UnionFind::new(g.vertex_count());
    for e in g.edges() {
        uf.union(e.i as usize, e.j as usize);
    }
    uf
}

/// Size of the largest component over the vertex count (0 if empty).
pub fn largest_fraction(g: &ConnectivityGraph) -> f64 {
    let n = g.vertex_count();
    if n == 0 {
        return 0.0;
    }
    let mut uf = components(g);
    let largest = (0..n).map(|i| uf.set_size(i)).max().unwrap_or(0);
    largest as f64 / n as f64
}

/// Components of `g`, and whether the component of `root` (by default the
/// vertex closest to the window centre) has a vertex within `band` of the
/// window boundary.
pub fn percolation_diagnostics(
    g: &ConnectivityGraph,
    positions: &[Point],
    window: &Window,
    band: f64,
    root: Option<DeviceId>,
) -> Result<PercolationReport> {
    let n = g.vertex_count();
    if positions.len() != n {
        return Err(Error::invalid(
            "positions",
            format!("{} positions for {n} vertices", positions.len()),
        ));
    }
    let mut uf = components(g);
    let labels = uf.labels();
    let mut sizes = vec![0usize; n];
    for &l in &labels {
        sizes[l as usize] += 1;
    }
    let mut component_sizes: Vec<usize> = sizes.into_iter().filter(|&s| s > 0).collect();
    component_sizes.sort_unstable_by(|a, b| b.cmp(a));
    let center = window.center();
    let root = root.or_else(|| {
        (0..n as DeviceId).min_by(|&a, &b| {
            positions[a as usize]
                .distance(center)
                .total_cmp(&positions[b as usize].distance(center))
        })
    });
    let touches_boundary = root.is_some_and(|r| {
        let l = labels[r as usize];
        (0..n).any(|i| labels[i] == l && window.distance_to_boundary(positions[i]) <= band)
    });
    let degrees = g.degrees();
    let mut degree_histogram = vec![0; degrees.iter().copied().max().map_or(0, |m| m + 1)];
    for d in degrees {
        degree_histogram[d] += 1;
    }
    Ok(PercolationReport {
        vertices: n,
        edges: g.edges().len(),
        largest_fraction: component_sizes
            .first()
            .map_or(0.0, |&s| s as f64 / n as f64),
        component_sizes,
        touches_boundary,
        degree_histogram,
    })
}

/// Connectivity degrees against the geostatistical bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DegreeCheck {
    pub max_degree: usize,
    pub mean_degree: f64,
    pub max_bound: usize,
    pub mean_bound: f64,
    /// Devices whose number of contact partners exceeds their bound.
    pub violations: usize,
}

pub fn degree_check(r: &Realization, kernel: &dyn WaypointKernel, radius: f64) -> DegreeCheck {
    let starts: Vec<_> = r.points.devices.iter().map(|d| d.position).collect();
    let bound = geo_degree_bound(&r.graph, &starts, kernel, radius);
    let degrees = r.connectivity.degrees();
    let partners = r.contacts.neighbours();
    let n = degrees.len().max(1) as f64;
    DegreeCheck {
        max_degree: degrees.iter().copied().max().unwrap_or(0),
        mean_degree: degrees.iter().sum::<usize>() as f64 / n,
        max_bound: bound.iter().copied().max().unwrap_or(0),
        mean_bound: bound.iter().sum::<usize>() as f64 / n,
        violations: partners
            .iter()
            .zip(&bound)
            .filter(|(p, &b)| p.len() > b)
            .count(),
    }
}

/// Trace of one replica with its provenance, as written by `simulate`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceReport {
    pub version: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub replica: u64,
    pub attempt: u64,
    pub engine: Engine,
    pub verdict: Verdict,
    pub max_infected_distance: f64,
    pub origin: Point,
    pub scenario: Scenario,
    pub trace: EpidemicTrace,
}

impl TraceReport {
    pub fn new(scenario: &Scenario, run: &ReplicaRun) -> Self {
        TraceReport {
            version: VERSION.to_string(),
            scenario_hash: scenario.hash(),
            seed: scenario.seed,
            replica: run.realization.replica,
            attempt: run.realization.attempt,
            engine: scenario.engine,
            verdict: run.verdict,
            max_infected_distance: run.max_distance,
            origin: run.realization.points.origin,
            scenario: scenario.clone(),
            trace: run.trace.clone(),
        }
    }
}
