//! Acceptance criteria, one PASS/FAIL line each.

mod common;

use std::collections::BTreeSet;
use std::time::Instant;

use chase_escape::config::{Engine, Scenario};
use chase_escape::contact::{build_contacts, contact_intervals, ConnectivityGraph, ContactStore};
use chase_escape::epidemic::{draw_pair_timers, run, DeviceState, TimeDistribution, Transition};
use chase_escape::experiment::{realize, simulate_replica, sweep};
use chase_escape::mobility::{build_trajectory, SpeedDistribution, UniformBall, WaypointKernel};
use chase_escape::points::{sample_cox, Role};
use chase_escape::rng::SimRng;
use chase_escape::static_model::{
    good_device_probability, reach_bound, simulate_static, StaticScenario,
};
use chase_escape::street::{
    build_graph, crosses_left_right, estimate_length_intensity, generate_pvt, normalize_intensity,
    GeneratorTag, Segment, SegmentSystem, StreetId, StreetModel, StreetPoint,
};
use chase_escape::{Point, Window};
use common::*;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn check(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn dirac(tau: f64) -> TimeDistribution {
    TimeDistribution::Dirac { tau }
}

fn intensity_normalization() -> Outcome {
    let mut rng = SimRng::seed_from_u64(1);
    let gamma = normalize_intensity(GeneratorTag::Pvt, 1.0, &mut rng).map_err(|e| e.to_string())?;
    let seeds: Vec<u64> = (0..50).map(|_| rng.random()).collect();
    let est = estimate_length_intensity(&StreetModel::Pvt { gamma }, 50.0, &seeds)
        .map_err(|e| e.to_string())?;
    check(
        (est - 1.0).abs() <= 0.02,
        format!("estimate {est:.4} at gamma {gamma:.5}"),
    )?;
    Ok(format!(
        "gamma {gamma:.5}, fresh estimate {est:.4} over 50 windows of side 50"
    ))
}

fn contact_exactness() -> Outcome {
    // Analytic example.
    let line = build_graph(
        &SegmentSystem::fixture(
            vec![Segment::new(Point::new(0.0, 0.0), Point::new(10.0, 0.0))],
            Window::new(Point::new(-5.0, -10.0), 20.0),
        )
        .map_err(|e| e.to_string())?,
    );
    let walk = |id, from: f64, to: f64| {
        let mut rng = SimRng::seed_from_u64(0);
        build_trajectory(
            &line,
            id,
            StreetPoint::new(StreetId(0), from),
            StreetPoint::new(StreetId(0), to),
            1.0,
            20.0,
            &mut rng,
        )
        .unwrap()
    };
    let z = contact_intervals(&walk(0, 0.0, 10.0), &walk(1, 10.0, 0.0), 2.0).intervals;
    let expect = [(4.0, 6.0), (14.0, 16.0)];
    check(
        z.len() == 2
            && z.iter()
                .zip(expect)
                .all(|(iv, (s, e))| (iv.start - s).abs() <= 1e-9 && (iv.end - e).abs() <= 1e-9),
        format!("analytic example gave {z:?}"),
    )?;

    // Random pairs against dense sampling.
    let step = 1e-4;
    let kernel = UniformBall::new(3.0).unwrap();
    let speeds = SpeedDistribution::Uniform {
        v_min: 0.5,
        v_max: 2.0,
    };
    let mut pairs = 0;
    let mut with_contact = 0;
    let mut seed = 0u64;
    while pairs < 100 {
        seed += 1;
        let mut rng = SimRng::seed_from_u64(seed);
        let g = build_graph(
            &generate_pvt(0.25, Window::centered(12.0), &mut rng).map_err(|e| e.to_string())?,
        );
        let pts = sample_cox(&g, 1.0, &mut rng).map_err(|e| e.to_string())?;
        if pts.len() < 2 {
            continue;
        }
        let i = rng.random_range(0..pts.len());
        let j = rng.random_range(0..pts.len());
        if i == j || g.position(pts[i]).distance(g.position(pts[j])) > 4.0 {
            continue;
        }
        let mut traj = |id: u32, x| {
            let y = kernel.sample(&g, x, &mut rng);
            let v = speeds.sample(&mut rng);
            build_trajectory(&g, id, x, y, v, 10.0, &mut rng)
        };
        let (Ok(a), Ok(b)) = (traj(0, pts[i]), traj(1, pts[j])) else {
            continue;
        };
        pairs += 1;
        let r = 1.0;
        let analytic = contact_intervals(&a, &b, r).intervals;
        if !analytic.is_empty() {
            with_contact += 1;
        }
        let runs = sampled_contacts(&g, &a, &b, r, step);
        compare_with_samples(&analytic, &runs, step, 2e-4)
            .map_err(|e| format!("seed {seed}: {e}"))?;
    }
    Ok(format!(
        "(4,6) and (14,16) exact; 100 random pairs ({with_contact} with contacts) within 2e-4 of sampling at step 1e-4"
    ))
}

fn dichotomy() -> Outcome {
    let side = 30;
    let n = side * side;
    let mut rng = SimRng::seed_from_u64(3);
    let mut worst_slack = usize::MAX;
    for run_id in 0..100 {
        // (a) infection times no longer than patch times.
        let pairs = lattice(side, |_, _| rng.random::<f64>() < 0.9);
        let mut all = pairs.clone();
        let mut knights: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.05).collect();
        let pendant: Vec<usize> = (0..n).filter(|_| rng.random::<f64>() < 0.3).collect();
        for (k, &v) in pendant.iter().enumerate() {
            all.push((v as u32, (n + k) as u32));
            knights.push(n + k);
        }
        let total = n + pendant.len();
        let roles = roles_with_knights(total, &knights);
        let root = loop {
            let v = rng.random_range(0..n);
            if roles[v] == Role::Susceptible {
                break v;
            }
        };
        let tw = rng.random_range(0.5..3.0);
        let ti = if run_id % 4 == 0 {
            tw
        } else {
            tw * rng.random_range(0.2..1.0)
        };
        let graph = ConnectivityGraph::from_pairs(total, &all).map_err(|e| e.to_string())?;
        let adj = adjacency(&graph);
        let sc = StaticScenario::new(graph, roles.clone(), root as u32, dirac(ti), dirac(tw), 1.0)
            .map_err(|e| e.to_string())?;
        let out = simulate_static(&sc, &mut rng, None).map_err(|e| e.to_string())?;
        let reach = bfs(&adj, root, |v| roles[v] == Role::Susceptible);
        let expected: BTreeSet<usize> = (0..total).filter(|&v| reach[v] != usize::MAX).collect();
        let got: BTreeSet<usize> = out
            .trace
            .ever_infected()
            .into_iter()
            .map(|v| v as usize)
            .collect();
        check(
            expected == got,
            format!(
                "(a) run {run_id}: T_I={ti} T_W={tw}: {} reachable, {} infected",
                expected.len(),
                got.len()
            ),
        )?;

        // (b) infection slower than patching, a knight at distance D.
        let (graph0, adj0, root, k0) = loop {
            let pairs = lattice(side, |_, _| rng.random::<f64>() < 0.9);
            let graph0 = ConnectivityGraph::from_pairs(n, &pairs).map_err(|e| e.to_string())?;
            let adj0 = adjacency(&graph0);
            let root = rng.random_range(0..n);
            let dist0 = bfs(&adj0, root, |_| true);
            let d_target = rng.random_range(1..=8usize);
            let candidates: Vec<usize> = (0..n).filter(|&v| dist0[v] == d_target).collect();
            if !candidates.is_empty() {
                let k0 = candidates[rng.random_range(0..candidates.len())];
                break (graph0, adj0, root, k0);
            }
        };
        let mut knights: Vec<usize> = (0..n)
            .filter(|&v| v != root && rng.random::<f64>() < 0.01)
            .collect();
        knights.push(k0);
        let roles = roles_with_knights(n, &knights);
        let dist = bfs(&adj0, root, |_| true);
        let d = knights.iter().map(|&k| dist[k]).min().unwrap() as u64;
        let tw = rng.random_range(0.5..2.0);
        let ti = tw * rng.random_range(1.2..3.0);
        let bound = reach_bound(d, ti, tw).map_err(|e| e.to_string())?;
        let sc = StaticScenario::new(graph0, roles, root as u32, dirac(ti), dirac(tw), 1.0)
            .map_err(|e| e.to_string())?;
        let out = simulate_static(&sc, &mut rng, None).map_err(|e| e.to_string())?;
        let max_hops = out
            .trace
            .ever_infected()
            .iter()
            .map(|&v| dist[v as usize])
            .max()
            .unwrap_or(0) as u64;
        check(
            max_hops <= bound,
            format!("(b) run {run_id}: D={d} T_I={ti:.3} T_W={tw:.3}: reached {max_hops} > bound {bound}"),
        )?;
        check(
            out.trace.infected_at_end().is_empty(),
            format!("(b) run {run_id}: infection survived"),
        )?;
        worst_slack = worst_slack.min((bound - max_hops) as usize);
    }
    Ok(format!(
        "(a) 100/100 full traversals; (b) 100/100 within the N+D bound (smallest slack {worst_slack} hops)"
    ))
}

fn closure_scenario(engine: Engine) -> Scenario {
    let mut s = Scenario::new(GeneratorTag::Pvt, 0.5).unwrap();
    s.engine = engine;
    s.streets.window_side = 8.0;
    s.streets.buffer = None;
    s.epidemic.infection = TimeDistribution::Uniform { a: 0.1, b: 0.8 };
    s.epidemic.t_sim = Some(30.0);
    s.contact.r = 1.5;
    s.contact.rho = 0.3;
    s.resolve().unwrap()
}

fn knight_free_closure() -> Outcome {
    let mut summary = Vec::new();
    for engine in [Engine::Dynamic, Engine::Static] {
        let sc = closure_scenario(engine);
        let mut instances = 0;
        let mut infected_total = 0;
        let mut replica = 0;
        while instances < 50 {
            replica += 1;
            check(replica < 1000, "too few small instances")?;
            let Some(run) = simulate_replica(&sc, replica).map_err(|e| e.to_string())? else {
                continue;
            };
            let n = run.realization.points.len();
            if n > 30 {
                continue;
            }
            instances += 1;
            let root = run.trace.root;
            let expected: BTreeSet<u32> = match engine {
                Engine::Dynamic => {
                    let tau =
                        temporal_closure(n, root, &run.engine_contacts, &run.timers, sc.t_sim());
                    check(
                        tau == run.trace.infected_at,
                        format!(
                            "dynamic replica {replica}: times {tau:?} vs {:?}",
                            run.trace.infected_at
                        ),
                    )?;
                    (0..n as u32)
                        .filter(|&v| tau[v as usize].is_some())
                        .collect()
                }
                Engine::Static => {
                    let d = bfs(
                        &adjacency(&run.realization.connectivity),
                        root as usize,
                        |_| true,
                    );
                    (0..n as u32)
                        .filter(|&v| d[v as usize] != usize::MAX)
                        .collect()
                }
            };
            let got: BTreeSet<u32> = run.trace.ever_infected().into_iter().collect();
            check(
                expected == got,
                format!("{engine} replica {replica}: {expected:?} vs {got:?}"),
            )?;
            infected_total += got.len();
        }
        summary.push(format!(
            "{engine}: 50 instances, {infected_total} infections"
        ));
    }
    Ok(summary.join("; "))
}

fn good_device() -> Outcome {
    let e = TimeDistribution::exponential(1.0);
    let n = 200_000;
    let p = good_device_probability(1, &e, &e, 1.0, n, &mut SimRng::seed_from_u64(5))
        .map_err(|e| e.to_string())?;
    check(
        (p.estimate - 0.5).abs() <= 0.01,
        format!("estimate {}", p.estimate),
    )?;
    let mut last = -1.0;
    let mut curve = Vec::new();
    for b in [0.5, 1.0, 2.0, 4.0] {
        let q = good_device_probability(1, &e, &e, b, 20_000, &mut SimRng::seed_from_u64(6))
            .map_err(|e| e.to_string())?;
        check(
            q.estimate >= last,
            format!("not monotone at b = {b}: {} < {last}", q.estimate),
        )?;
        check(
            (q.estimate - b / (b + 1.0)).abs() <= 0.02,
            format!("b = {b}: {} vs {}", q.estimate, b / (b + 1.0)),
        )?;
        last = q.estimate;
        curve.push(format!("{b}:{:.3}", q.estimate));
    }
    Ok(format!(
        "M=1, b=1: {:.4} from {n} samples; b-curve {}",
        p.estimate,
        curve.join(" ")
    ))
}

fn tie_breaker() -> Outcome {
    // Root 0 touches knight 1 and susceptible 2, all times equal to 1.
    let pairs = [(0, 1), (0, 2)];
    let contacts = ContactStore::permanent(3, pairs);
    let timers = draw_pair_timers(
        &pairs,
        &dirac(1.0),
        &dirac(1.0),
        &mut SimRng::seed_from_u64(0),
    );
    let roles = vec![Role::Susceptible, Role::Knight, Role::Susceptible];
    let trace = run(&roles, 0, &contacts, &timers, None).map_err(|e| e.to_string())?;
    let log: Vec<(f64, u32, Transition, u32)> = trace
        .events
        .iter()
        .map(|e| (e.t, e.device, e.transition, e.cause))
        .collect();
    let expected = vec![
        (1.0, 2, Transition::Infected, 0),
        (1.0, 0, Transition::Patched, 1),
        (2.0, 2, Transition::Patched, 0),
    ];
    check(log == expected, format!("event log {log:?}"))?;
    trace.audit(&contacts, &timers)?;
    Ok("infection of 2 at t=1 precedes the patch of the root at t=1".into())
}

fn flow_invariants() -> Outcome {
    let mut sc = Scenario::new(GeneratorTag::Pvt, 1.0).unwrap();
    sc.streets.window_side = 12.0;
    sc.devices.lambda_w = 0.3;
    sc.epidemic.infection = TimeDistribution::Uniform { a: 0.5, b: 2.0 };
    sc.epidemic.patch = TimeDistribution::Uniform { a: 0.5, b: 2.0 };
    let sc = sc.resolve().unwrap();
    let mut events = 0;
    for replica in 0..20 {
        let run = simulate_replica(&sc, replica)
            .map_err(|e| e.to_string())?
            .ok_or("skipped")?;
        let trace = &run.trace;
        let mut times: Vec<f64> = trace.events.iter().map(|e| e.t).collect();
        times.insert(0, 0.0);
        events += trace.events.len();
        let mut prev = trace.counts_at(0.0);
        let mut knight_since: Vec<Option<f64>> = vec![None; trace.len()];
        for &t in &times {
            let c = trace.counts_at(t);
            check(
                c.susceptible <= prev.susceptible,
                format!("replica {replica}: |S| grew at {t}"),
            )?;
            check(
                c.knights >= prev.knights,
                format!("replica {replica}: |W| shrank at {t}"),
            )?;
            for v in 0..trace.len() as u32 {
                let s = trace.state_at(v, t);
                let k = matches!(s, DeviceState::Knight | DeviceState::Patched);
                match knight_since[v as usize] {
                    Some(_) if !k => {
                        return Err(format!(
                            "replica {replica}: knight {v} lost its status at {t}"
                        ))
                    }
                    None if k => knight_since[v as usize] = Some(t),
                    _ => {}
                }
            }
            prev = c;
        }
        trace.audit(&run.engine_contacts, &run.timers)?;

        // Edge sets over r and rho on the same trajectories.
        let real = &run.realization;
        let edges = |store: &ContactStore, rho: f64| -> BTreeSet<(u32, u32)> {
            ConnectivityGraph::from_contacts(store, rho)
                .edges()
                .iter()
                .map(|e| (e.i, e.j))
                .collect()
        };
        let mut last: Option<BTreeSet<(u32, u32)>> = None;
        for r in [0.5, 1.0, 1.5] {
            let e = edges(
                &build_contacts(&real.graph, &real.trajectories, r),
                sc.contact.rho,
            );
            if let Some(prev) = &last {
                check(
                    prev.is_subset(&e),
                    format!("replica {replica}: edges lost when r grew to {r}"),
                )?;
            }
            last = Some(e);
        }
        let mut last: Option<BTreeSet<(u32, u32)>> = None;
        for rho in [0.0, 0.25, 0.5, 1.0, 2.0] {
            let e = edges(&real.contacts, rho);
            if let Some(prev) = &last {
                check(
                    e.is_subset(prev),
                    format!("replica {replica}: edges gained when rho grew to {rho}"),
                )?;
            }
            last = Some(e);
        }
        // Same check through the scenario pipeline with shared seeds.
        let mut wider = sc.clone();
        wider.contact.r = 1.5;
        let w = realize(&wider, replica)
            .map_err(|e| e.to_string())?
            .ok_or("skipped")?;
        check(
            w.connectivity.edges().len() >= real.connectivity.edges().len(),
            format!("replica {replica}: fewer edges at larger r"),
        )?;
    }
    for seed in 0..20 {
        let mut rng = SimRng::seed_from_u64(100 + seed);
        let window = Window::centered(15.0);
        let g = build_graph(&generate_pvt(0.25, window, &mut rng).map_err(|e| e.to_string())?);
        let mut prev = true;
        for k in 0..12 {
            let a = 0.25 * k as f64;
            let c = crosses_left_right(&g.thin_by_length(a), &window);
            check(
                prev || !c,
                format!("seed {seed}: crossing reappears at a = {a}"),
            )?;
            prev = c;
        }
    }
    Ok(format!(
        "20 dynamic replicas ({events} events): |S| non-increasing, |W| non-decreasing, knights absorbing, \
         edges monotone in r and antitone in rho; 20 street systems antitone in a"
    ))
}

fn phase_probes() -> Outcome {
    let mut base = Scenario::new(GeneratorTag::Pvt, 1.0).unwrap();
    base.streets.window_side = 30.0;
    base.epidemic.t_sim = Some(60.0);
    base.epidemic.infection = dirac(0.5);
    let base = base.resolve().unwrap();
    let replicas = 20;
    let mut lines = Vec::new();
    let probes: Vec<(Scenario, &str, Vec<f64>)> = vec![
        (base.clone(), "lambda", vec![0.25, 0.5, 1.0, 2.0]),
        (
            {
                let mut s = base.clone();
                s.engine = Engine::Static;
                s.streets.window_side = 20.0;
                s.devices.lambda = 2.0;
                s.epidemic.infection = dirac(2.0);
                s.epidemic.patch = dirac(1.0);
                s.epidemic.reach_radius = None;
                s.resolve().unwrap()
            },
            "lambda_w",
            vec![0.0, 0.01, 0.1, 0.3],
        ),
        (
            {
                let mut s = base.clone();
                s.devices.lambda = 2.0;
                s.devices.lambda_w = 0.2;
                s
            },
            "speed",
            vec![0.05, 0.2, 0.5, 1.0, 2.0, 4.0],
        ),
    ];
    for (sc, axis, values) in probes {
        let res = sweep(&sc, axis, &values, replicas, 0).map_err(|e| e.to_string())?;
        check(
            res.rows.len() == values.len(),
            format!("{axis}: {} rows", res.rows.len()),
        )?;
        let mut curve = Vec::new();
        for row in &res.rows {
            let s = &row.stats;
            check(
                s.skipped + s.extinct + s.local_survival + s.global_proxy == s.n_replicas,
                format!("{axis}={}: counts do not add up", row.value),
            )?;
            check(
                0.0 <= s.ci_low
                    && s.ci_low <= s.frequency
                    && s.frequency <= s.ci_high
                    && s.ci_high <= 1.0,
                format!("{axis}={}: invalid interval", row.value),
            )?;
            curve.push(format!(
                "{}:{:.2}[{:.2},{:.2}]",
                row.value, s.frequency, s.ci_low, s.ci_high
            ));
        }
        lines.push(format!(
            "{axis} {}{}",
            curve.join(" "),
            if res.non_monotone {
                " non-monotone"
            } else {
                ""
            }
        ));
    }
    Ok(lines.join("; "))
}

fn determinism() -> Outcome {
    let mut sc = Scenario::new(GeneratorTag::Pvt, 1.0).unwrap();
    sc.streets.window_side = 12.0;
    sc.devices.lambda_w = 0.2;
    sc.seed = 77;
    let sc = sc.resolve().unwrap();
    let reference = sweep(&sc, "lambda", &[0.5, 1.0], 6, 1).map_err(|e| e.to_string())?;
    for parallelism in [1, 2, 4, 0] {
        let again = sweep(&sc, "lambda", &[0.5, 1.0], 6, parallelism).map_err(|e| e.to_string())?;
        check(
            again.to_csv() == reference.to_csv(),
            format!("CSV differs at parallelism {parallelism}"),
        )?;
        check(
            again.to_json() == reference.to_json(),
            format!("JSON differs at parallelism {parallelism}"),
        )?;
    }
    Ok("identical CSV and JSON at parallelism 1, 2, 4 and all cores".into())
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("intensity normalization", intensity_normalization),
        ("contact-interval exactness", contact_exactness),
        ("deterministic-time dichotomy", dichotomy),
        ("knight-free closure", knight_free_closure),
        ("good-device probability", good_device),
        ("tie-breaker", tie_breaker),
        ("monotonicity and flow invariants", flow_invariants),
        ("phase probes", phase_probes),
        ("determinism", determinism),
    ];
    let filter: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = f();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {} {name}: {detail} ({secs:.1} s)", k + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {} {name}: {detail} ({secs:.1} s)", k + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
