//! `airborne`: run scenarios, compute mutual information, sweep countermeasures.
//!
//! Exit codes: 0 success, 1 usage or validation error, 2 I/O error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use airborne_core::infometrics::face_count;
use airborne_core::*;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "airborne",
    version,
    about = "Multiuser aerosol transmission simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a scenario and write its output files.
    Run(RunArgs),
    /// Print the mutual information of a channel.
    Mi(MiArgs),
    /// Run a countermeasure over a grid of values and seeds.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario JSON file, or `paper_demo` for the built-in scenario.
    #[arg(long)]
    scenario: String,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Time step in seconds.
    #[arg(long)]
    dt: Option<f64>,
    /// Simulated duration in seconds.
    #[arg(long)]
    horizon: Option<f64>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
struct MiArgs {
    /// Channel JSON with `input_dist` and `transition`.
    #[arg(long)]
    channel: Option<PathBuf>,
    /// A run's output directory or its summary.json.
    #[arg(long)]
    from_report: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// Scenario JSON file, or `paper_demo`.
    #[arg(long)]
    scenario: String,
    /// `mask`, `distance[:person]` or `timeshift[:person]`.
    #[arg(long)]
    action: String,
    /// Comma-separated action values.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    /// Output directory for sweep.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
}

fn load(scenario: &str) -> Result<Scenario> {
    if scenario == "paper_demo" && !Path::new(scenario).exists() {
        return Ok(Scenario::paper_demo());
    }
    load_scenario_file(scenario)
}

fn threads(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut scenario = load(&args.scenario)?;
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    if let Some(dt) = args.dt {
        scenario.dt = dt;
    }
    if let Some(h) = args.horizon {
        scenario.horizon = h;
    }
    scenario.validate()?;
    let report = run_simulation_with_threads(&scenario, threads(args.threads))?;
    let summary = write_outputs(&report, &args.out)?;
    let c = summary.counters;
    let mut line = format!(
        "emitted={} absorbed={} grounded={} exited={} airborne={}",
        c.emitted, c.absorbed, c.grounded, c.exited, c.airborne
    );
    for p in &scenario.persons {
        line.push_str(&format!(" face[{}]={}", p.name, face_count(&report, p.id)));
    }
    match summary.mutual_information_bits {
        Some(mi) => line.push_str(&format!(" mi_bits={mi:.6}")),
        None => line.push_str(" mi_bits=NA"),
    }
    println!("{line}");
    Ok(())
}

fn cmd_mi(args: MiArgs) -> Result<()> {
    let channel = match (args.channel, args.from_report) {
        (Some(path), None) => Some(load_channel_file(path)?),
        (None, Some(path)) => {
            let summary = load_summary_file(path)?;
            if summary.channel_counts.emitted.iter().sum::<u64>() == 0 {
                None
            } else {
                Some(estimate_channel(&summary.channel_counts)?)
            }
        }
        _ => unreachable!("clap enforces exactly one input"),
    };
    match channel {
        Some(ch) => {
            println!("{:.6}", mutual_information(&ch)?);
            let json = serde_json::to_string(&ch).expect("channel serializes");
            println!("channel {json}");
        }
        None => {
            log::warn!("report has no emitted particles");
            println!("{:.6}", 0.0);
            println!("channel none");
        }
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let action: SweepAction = args.action.parse()?;
    let scenario = load(&args.scenario)?;
    let rows = run_sweep(
        &scenario,
        action,
        &args.values,
        &args.seeds,
        threads(args.threads),
    )?;
    let path = args.out.join("sweep.csv");
    write_sweep_csv(&scenario, &rows, &path)?;
    println!("rows={} out={}", rows.len(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Mi(a) => cmd_mi(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Io { .. } => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
