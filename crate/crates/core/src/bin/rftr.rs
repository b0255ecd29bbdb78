use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rftr::config::{self, parse_config, Scenario, Sweep};
use rftr::runner::run_scenario;
use rftr::sim::RouterKind;
use rftr::Topology;

#[derive(Parser)]
#[command(
    name = "rftr",
    version,
    about = "Fault-tolerant optical routing simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (all routers, seeds and sweep points it lists).
    Run(Common),
    /// Run a parameter sweep; the axis comes from the config or the flags.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Sweep axis: `rate` (Mb/s per session) or `sources`.
        #[arg(long)]
        axis: Option<String>,
        /// Comma-separated, strictly increasing values.
        #[arg(long)]
        values: Option<String>,
    },
    /// Check a scenario and topology without running anything.
    Validate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        topology: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Common {
    /// Scenario file; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Topology file, overriding the scenario's.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed, repeatable; replaces the scenario's seed list.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Router, repeatable; replaces the scenario's router list.
    #[arg(long = "router")]
    routers: Vec<RouterKind>,
    /// Worker threads (default: all cores). 1 runs sequentially.
    #[arg(long)]
    threads: Option<usize>,
}

fn load(config: Option<&Path>, topology: Option<&Path>) -> Result<(Scenario, Topology), String> {
    let mut scenario = match config {
        None => Scenario::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
            parse_config(&text).map_err(|e| format!("{}: {e}", p.display()))?
        }
    };
    let base = config.and_then(Path::parent);
    if let Some(t) = topology {
        scenario.topology = Some(std::env::current_dir().map_err(|e| e.to_string())?.join(t));
    }
    let topo = scenario.load_topology(base).map_err(|e| e.to_string())?;
    Ok((scenario, topo))
}

fn check(scenario: &Scenario, topo: &Topology) -> Result<(), String> {
    let diagnostics = config::validate(scenario, topo);
    for d in &diagnostics {
        eprintln!("{d}");
    }
    if config::has_errors(&diagnostics) {
        Err("scenario is invalid".into())
    } else {
        Ok(())
    }
}

fn execute(common: Common, sweep: Option<(Option<String>, Option<String>)>) -> Result<(), String> {
    let (mut scenario, topo) = load(common.config.as_deref(), common.topology.as_deref())?;
    if !common.seeds.is_empty() {
        scenario.seeds = common.seeds;
    }
    if !common.routers.is_empty() {
        scenario.routers = common.routers;
        scenario.routers.dedup();
    }
    if let Some((axis, values)) = sweep {
        match (axis, values) {
            (Some(axis), Some(values)) => {
                let doc = format!("sweep = {axis}\nsweep_values = {values}");
                scenario.sweep = parse_config(&doc).map_err(|e| e.to_string())?.sweep;
            }
            (None, None) => {}
            _ => return Err("--axis and --values go together".into()),
        }
        if scenario.sweep == Sweep::None {
            return Err(
                "no sweep axis: set `sweep` in the config or pass --axis and --values".into(),
            );
        }
    }
    check(&scenario, &topo)?;

    let parallel = common.threads != Some(1);
    if let Some(n) = common.threads.filter(|&n| n > 1) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| e.to_string())?;
    }
    let art = run_scenario(&scenario, &topo, &common.out, parallel).map_err(|e| e.to_string())?;
    println!(
        "wrote {} and {} ({} time series)",
        art.summary.display(),
        art.runs.display(),
        art.series.len()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(common) => execute(common, None),
        Command::Sweep {
            common,
            axis,
            values,
        } => execute(common, Some((axis, values))),
        Command::Validate { config, topology } => load(config.as_deref(), topology.as_deref())
            .and_then(|(sc, topo)| check(&sc, &topo))
            .map(|()| println!("valid")),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
