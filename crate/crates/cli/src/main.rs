use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chase_escape::config::{Scenario, VERSION};
use chase_escape::experiment::{
    degree_check, percolation_diagnostics, realize, simulate_replica, sweep_timed,
    with_parallelism, Realization, TraceReport,
};
use chase_escape::mobility::trajectories_to_json;
use chase_escape::render::{render_points, render_trace};
use chase_escape::rng::{ReplicaSeed, Substream};
use chase_escape::street::crossing_probabilities;
use chase_escape::Error;
use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::json;

/// Chase-escape malware propagation on random street systems.
#[derive(Parser, Debug)]
#[command(name = "chase-escape", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the seed of the scenario file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of replicas (sweep: per value; diagnose: realizations).
    #[arg(long, global = true)]
    replicas: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(
        long,
        global = true,
        env = "CHASE_ESCAPE_PARALLELISM",
        default_value_t = 0
    )]
    parallelism: usize,
    /// Directory for output files; created if missing.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one realization and write streets, devices, trajectories,
    /// contacts, connectivity graph and an SVG.
    Generate {
        #[arg(long, default_value_t = 0)]
        replica: u64,
    },
    /// Run replicas and write one trace per replica.
    Simulate {
        /// First replica index.
        #[arg(long, default_value_t = 0)]
        replica: u64,
    },
    /// Sweep one parameter and write the frequency table.
    Sweep {
        /// One of: lambda, lambda_w, r, rho, speed, kernel_radius, t_sim, b,
        /// window_side, reach_radius, infection_tau, patch_tau.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<f64>,
    },
    /// Percolation and degree diagnostics of the connectivity graph.
    Diagnose {
        /// Street-length thresholds for the left-right crossing probability.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        thresholds: Vec<f64>,
    },
    /// SVG frames of one replica at the given times.
    Render {
        #[arg(long, default_value_t = 0)]
        replica: u64,
        /// Comma-separated times; default is the start and the end.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        times: Vec<f64>,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config { .. } | Error::Parse(_) | Error::UnknownAxis(_) => 2,
            _ => 3,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 3,
        message: format!("{}: {e}", path.display()),
    }
}

fn load(common: &Common) -> Result<Scenario, Failure> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| config_error("missing --config"))?;
    let text =
        fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    let mut scenario = Scenario::from_toml(&text)?;
    if let Some(seed) = common.seed {
        scenario.seed = seed;
        scenario = scenario.resolve()?;
    }
    Ok(scenario)
}

struct Output<'a> {
    dir: &'a Path,
    tag: String,
}

impl Output<'_> {
    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        let path = self.dir.join(name);
        fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        info!("wrote {}", path.display());
        Ok(())
    }

    /// `#` comment line with the tool version and scenario hash, then
    /// `body`.
    fn write_commented(&self, name: &str, body: &str) -> Result<(), Failure> {
        self.write(name, &format!("# {}\n{body}", self.tag))
    }

    fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<(), Failure> {
        let mut text = serde_json::to_string_pretty(value).expect("json value serializes");
        text.push('\n');
        self.write(name, &text)
    }
}

fn realization(scenario: &Scenario, replica: u64) -> Result<Realization, Failure> {
    realize(scenario, replica)?.ok_or_else(|| Failure {
        code: 3,
        message: format!(
            "replica {replica}: no susceptible device in the inner window after every retry"
        ),
    })
}

fn run(cli: Cli) -> Result<(), Failure> {
    let scenario = load(&cli.common)?;
    let hash = scenario.hash();
    let dir = cli.common.out_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let out = Output {
        dir,
        tag: format!("chase-escape {VERSION} scenario={hash}"),
    };
    out.write_commented("scenario.toml", &scenario.to_toml())?;
    let parallelism = cli.common.parallelism;
    let header = json!({ "version": VERSION, "scenario_hash": hash });

    match cli.command {
        Command::Generate { replica } => {
            let r = with_parallelism(parallelism, || realization(&scenario, replica))??;
            let streets = r.system.to_text();
            let (first, rest) = streets.split_once('\n').unwrap_or((&streets, ""));
            out.write("streets.txt", &format!("{first}\n# {}\n{rest}", out.tag))?;
            out.write_commented("points.csv", &r.points.to_csv(&r.graph))?;
            out.write_commented("contacts.csv", &r.contacts.to_csv())?;
            out.write_commented("graph.csv", &r.connectivity.to_csv())?;
            let mut traj = header.clone();
            traj["replica"] = json!(replica);
            traj["attempt"] = json!(r.attempt);
            traj["origin"] = json!(r.points.origin);
            traj["trajectories"] = trajectories_to_json(&r.graph, &r.trajectories);
            out.write_json("trajectories.json", &traj)?;
            out.write(
                "realization.svg",
                &render_points(&r.graph, &r.points, &format!("scenario={hash}")),
            )?;
            println!(
                "replica {replica}: {} streets, {} devices ({} knights), {} edges",
                r.graph.streets().len(),
                r.points.len(),
                r.points.knight_count(),
                r.connectivity.edges().len()
            );
        }
        Command::Simulate { replica } => {
            let n = cli.common.replicas.unwrap_or(1);
            for i in replica..replica + n {
                let run = with_parallelism(parallelism, || simulate_replica(&scenario, i))??;
                let Some(run) = run else {
                    println!("replica {i}: skipped");
                    continue;
                };
                let report = TraceReport::new(&scenario, &run);
                let name = if n == 1 {
                    "trace.json".to_string()
                } else {
                    format!("trace_{i}.json")
                };
                out.write_json(
                    &name,
                    &serde_json::to_value(&report).expect("trace serializes"),
                )?;
                println!(
                    "replica {i}: {} devices, {} ever infected, verdict {}",
                    run.realization.points.len(),
                    run.trace.ever_infected().len(),
                    run.verdict
                );
            }
        }
        Command::Sweep { axis, values } => {
            let n = cli.common.replicas.unwrap_or(100);
            let (result, times) = sweep_timed(&scenario, &axis, &values, n, parallelism)?;
            out.write("sweep.csv", &result.to_csv())?;
            out.write("sweep.json", &(result.to_json() + "\n"))?;
            let mut timing = header.clone();
            timing["axis"] = json!(axis);
            timing["rows"] = json!(values
                .iter()
                .zip(&times)
                .map(|(v, t)| json!({ "value": v, "wall_seconds": t.as_secs_f64() }))
                .collect::<Vec<_>>());
            out.write_json("sweep.timing.json", &timing)?;
            for row in &result.rows {
                println!(
                    "{}={}: global {}/{} = {:.3} [{:.3}, {:.3}], skipped {}",
                    axis,
                    row.value,
                    row.stats.global_proxy,
                    row.stats.n_replicas - row.stats.skipped,
                    row.stats.frequency,
                    row.stats.ci_low,
                    row.stats.ci_high,
                    row.stats.skipped
                );
            }
            if result.non_monotone {
                println!("non-monotone curve detected");
            }
        }
        Command::Diagnose { thresholds } => {
            let n = cli.common.replicas.unwrap_or(1);
            let kernel = scenario.kernel()?;
            let mut reports = Vec::new();
            for i in 0..n {
                let r = with_parallelism(parallelism, || realize(&scenario, i))??;
                let Some(r) = r else {
                    reports.push(json!({ "replica": i, "skipped": true }));
                    continue;
                };
                let perc = percolation_diagnostics(
                    &r.connectivity,
                    &r.initial_positions(),
                    &scenario.window(),
                    scenario.contact.r,
                    r.points.root,
                )?;
                let degrees = degree_check(&r, &kernel, scenario.contact.r);
                println!(
                    "replica {i}: {} vertices, largest component {:.3}, reaches boundary {}, degree bound violations {}",
                    perc.vertices, perc.largest_fraction, perc.touches_boundary, degrees.violations
                );
                reports.push(json!({
                    "replica": i,
                    "attempt": r.attempt,
                    "percolation": perc,
                    "degrees": degrees,
                }));
            }
            let mut doc = header.clone();
            doc["replicas"] = json!(reports);
            if !thresholds.is_empty() {
                let mut rng = ReplicaSeed::new(scenario.seed, 0, 0).stream(Substream::Thinning);
                let probs = crossing_probabilities(
                    &scenario.street_model(),
                    &thresholds,
                    scenario.streets.window_side,
                    n.max(20) as usize,
                    &mut rng,
                )?;
                for (a, p) in thresholds.iter().zip(&probs) {
                    println!(
                        "a={a}: crossing probability {:.3} [{:.3}, {:.3}]",
                        p.estimate, p.ci_low, p.ci_high
                    );
                }
                doc["crossing"] = json!(thresholds
                    .iter()
                    .zip(&probs)
                    .map(|(a, p)| json!({ "a": a, "probability": p }))
                    .collect::<Vec<_>>());
            }
            out.write_json("diagnose.json", &doc)?;
        }
        Command::Render { replica, times } => {
            let run = with_parallelism(parallelism, || simulate_replica(&scenario, replica))??
                .ok_or_else(|| Failure {
                    code: 3,
                    message: format!("replica {replica} skipped"),
                })?;
            let times = if times.is_empty() {
                vec![0.0, scenario.t_sim()]
            } else {
                times
            };
            let positions = run.positions(scenario.engine);
            for (k, &t) in times.iter().enumerate() {
                let svg = render_trace(
                    &run.realization.graph,
                    &run.trace,
                    positions.as_ref(),
                    t,
                    scenario.t_sim(),
                    &format!("scenario={hash}"),
                )?;
                out.write(&format!("frame_{k:03}.svg"), &svg)?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
