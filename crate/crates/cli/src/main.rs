//! `crouchnav` command-line runner.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use crouchnav::collocation::{io, solve_spec, SolveStatus};
use crouchnav::config::{load_problem_spec, resolve, ConfigSource};
use crouchnav::grid::HeightGrid;
use crouchnav::router::{astar, RouteOptions};
use crouchnav::sim::log::replay_dir;
use crouchnav::sim::{builtin_names, run_scenario, Metrics};
use crouchnav::vslip::{fit_foot_placement, parse_samples_csv};
use crouchnav::Error;

const EXIT_INPUT: u8 = 1;
const EXIT_NO_PATH: u8 = 4;

#[derive(Parser)]
#[command(name = "crouchnav", version, about = "Height-aware biped navigation: scenarios, single solves and log tools")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a closed-loop scenario and write its RunLog directory.
    Run(RunArgs),
    /// Solve one collocation problem from a TOML spec.
    Solve(SolveArgs),
    /// Route across a grid JSON export.
    Route(RouteArgs),
    /// Fit foot-placement coefficients to gait samples.
    Fit(FitArgs),
    /// Recompute metrics from a RunLog directory.
    Replay(ReplayArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario used as the config base.
    #[arg(long)]
    scenario: Option<String>,
    /// TOML file merged over the base.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RunLog output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dotted-key override, e.g. plant.tau_vx=0.3. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long, value_name = "SECONDS")]
    max_time: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SolveArgs {
    /// Problem spec in TOML.
    #[arg(long)]
    config: PathBuf,
    /// Directory for trajectory.csv and solve.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RouteArgs {
    /// Grid JSON as written in RunLog maps/.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, value_name = "X,Y", value_parser = parse_point)]
    start: [f64; 2],
    #[arg(long, value_name = "X,Y", value_parser = parse_point)]
    goal: [f64; 2],
    /// Distance-only weights instead of the height-aware ones.
    #[arg(long)]
    distance_only: bool,
    #[arg(long, default_value_t = 0.0)]
    inflation: f64,
    #[arg(long, default_value_t = 0.0)]
    inflation_cost: f64,
    /// Path JSON output; printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with header vx,vy,z,leg_length,leg_pitch,abduction.
    #[arg(long)]
    samples: PathBuf,
    /// Coefficients JSON output; printed when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    dir: PathBuf,
}

fn parse_point(s: &str) -> Result<[f64; 2], String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected X,Y, got `{s}`"))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("`{v}`: {e}"));
    Ok([p(a)?, p(b)?])
}

fn read(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_or_print(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(p, text)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn run(a: RunArgs) -> Result<u8, Error> {
    if a.scenario.is_none() && a.config.is_none() {
        return Err(Error::Config(format!("give --scenario or --config (scenarios: {})", builtin_names().join(", "))));
    }
    let file = match &a.config {
        Some(p) => Some((p.display().to_string(), read(p)?)),
        None => None,
    };
    let mut overrides = a.overrides;
    if let Some(t) = a.max_time {
        overrides.push(format!("max_time={t:?}"));
    }
    if let Some(s) = a.seed {
        overrides.push(format!("seed={s}"));
    }
    let (cfg, provenance) = resolve(&ConfigSource { scenario: a.scenario, file, overrides })?;
    let log = run_scenario(&cfg)?;
    if let Some(dir) = &a.out {
        log.write_dir(dir, &provenance)?;
    }
    print_metrics(&cfg.name, &log.metrics);
    Ok(log.outcome.exit_code() as u8)
}

fn print_metrics(name: &str, m: &Metrics) {
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.3}"));
    println!("scenario            {name}");
    println!("outcome             {:?}", m.outcome);
    println!("sim time            {:.2} s", m.sim_time);
    println!("goal error          {:.3} m", m.goal_error);
    println!("min clearance       {}", opt(m.min_clearance));
    println!("ceiling violation   {:.4}", m.max_ceiling_violation);
    println!("height violation    {:.4}", m.max_height_violation);
    println!("min height under    {}", opt(m.min_height_under_constraint));
    println!("commands            {} ({} not optimal)", m.commands, m.non_optimal_commands);
    println!("set violations      {} (max margin {:.2e})", m.set_violations, m.max_set_margin);
    println!("slopes used         {:?}", m.slopes_used);
    println!("local solve         median {:.4} s, p90 {:.4} s", m.local_solve.median, m.local_solve.p90);
    println!("reactive solve      median {:.4} s, p90 {:.4} s", m.reactive_solve.median, m.reactive_solve.p90);
}

fn solve(a: SolveArgs) -> Result<u8, Error> {
    let spec = load_problem_spec(&a.config.display().to_string(), &read(&a.config)?)?;
    let traj = solve_spec(&spec, None)?;
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("trajectory.csv"), io::to_csv(&traj))?;
        fs::write(dir.join("solve.json"), io::sidecar_json(&traj)?)?;
    }
    println!(
        "{:?} objective {:.6e} iterations {} solve time {:.4} s",
        traj.status, traj.objective, traj.iterations, traj.solve_time
    );
    Ok(match traj.status {
        SolveStatus::Optimal => 0,
        SolveStatus::MaxIter => 3,
        SolveStatus::Infeasible => 4,
    })
}

fn route(a: RouteArgs) -> Result<u8, Error> {
    let grid = HeightGrid::from_json(&read(&a.grid)?)?;
    let base = if a.distance_only { RouteOptions::distance_only() } else { RouteOptions::default() };
    let opts = RouteOptions { inflation: a.inflation, inflation_cost: a.inflation_cost, ..base };
    match astar(&grid, a.start, a.goal, &opts) {
        Ok(path) => {
            write_or_print(a.out.as_deref(), &path.to_json()?)?;
            eprintln!("{} cells, cost {:.4}", path.cells.len(), path.cost);
            Ok(0)
        }
        Err(e @ (Error::NoPath(_) | Error::BlockedStart(_))) => {
            eprintln!("error: {e}");
            Ok(EXIT_NO_PATH)
        }
        Err(e) => Err(e),
    }
}

fn fit(a: FitArgs) -> Result<u8, Error> {
    let samples =
        parse_samples_csv(&read(&a.samples)?).map_err(|e| Error::Config(format!("{}: {e}", a.samples.display())))?;
    let fit = fit_foot_placement(&samples)?;
    write_or_print(a.out.as_deref(), &serde_json::to_string_pretty(&fit)?)?;
    Ok(0)
}

fn replay(a: ReplayArgs) -> Result<u8, Error> {
    let r = replay_dir(&a.dir)?;
    let (rec, now) = (&r.recorded.metrics, &r.recomputed);
    println!("{} states, {} commands, {} events", r.states, r.commands, r.events);
    println!("{:<20} {:>14} {:>14}", "metric", "recorded", "recomputed");
    let rows: [(&str, String, String); 7] = [
        ("outcome", format!("{:?}", rec.outcome), format!("{:?}", now.outcome)),
        ("sim time", format!("{:.2}", rec.sim_time), format!("{:.2}", now.sim_time)),
        ("goal error", format!("{:.4}", rec.goal_error), format!("{:.4}", now.goal_error)),
        (
            "min clearance",
            format!("{:?}", rec.min_clearance.map(|v| (v * 1e4).round() / 1e4)),
            format!("{:?}", now.min_clearance.map(|v| (v * 1e4).round() / 1e4)),
        ),
        ("ceiling violation", format!("{:.4}", rec.max_ceiling_violation), format!("{:.4}", now.max_ceiling_violation)),
        ("height violation", format!("{:.4}", rec.max_height_violation), format!("{:.4}", now.max_height_violation)),
        ("set violations", rec.set_violations.to_string(), now.set_violations.to_string()),
    ];
    for (name, a, b) in rows {
        println!("{name:<20} {a:>14} {b:>14}");
    }
    if rec != now {
        eprintln!("warning: recomputed metrics differ from metrics.json");
    }
    Ok(0)
}

fn main() -> ExitCode {
    // clap's own usage errors exit 2, which is the collision code here.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT } else { 0 });
        }
    };
    let result = match cli.command {
        Cmd::Run(a) => run(a),
        Cmd::Solve(a) => solve(a),
        Cmd::Route(a) => route(a),
        Cmd::Fit(a) => fit(a),
        Cmd::Replay(a) => replay(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
