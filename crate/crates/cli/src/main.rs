use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use irbl::sim::{build_world, run_traversability, ScenarioKind};
use irbl_cli::{load_config, run_suite, single_runs, suite_runs, ExperimentConfig};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "irbl", version, about = "Communication-free multi-robot navigation simulator")]
struct Cli {
    /// Print the scenario generators and exit.
    #[arg(long)]
    list_scenarios: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, clap::Args)]
struct Overrides {
    /// Replace the config's seed list with this one seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Concurrent runs.
    #[arg(long, default_value_t = default_workers())]
    workers: usize,
    /// Hide obstacle points that are not in line of sight.
    #[arg(long)]
    occlusion: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the top-level scenario once per seed.
    Run {
        config: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Sweep scenarios × FoVs × robot radii × seeds.
    Suite {
        config: PathBuf,
        #[command(flatten)]
        flags: Overrides,
    },
    /// Estimate the traversability of the generated worlds.
    Traversability {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the scenario generators.
    ListScenarios,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn list_scenarios() {
    for k in ScenarioKind::ALL {
        println!("{k}");
    }
}

fn apply(mut cfg: ExperimentConfig, flags: &Overrides) -> ExperimentConfig {
    if let Some(s) = flags.seed {
        cfg.seeds = vec![s];
    }
    if let Some(out) = &flags.out {
        cfg.out = out.clone();
    }
    if flags.occlusion {
        cfg.sim.occlusion = true;
    }
    cfg
}

fn load(path: &Path) -> Result<ExperimentConfig, ExitCode> {
    load_config(path).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}

fn sweep(cfg: &ExperimentConfig, suite: bool, workers: usize) -> ExitCode {
    let keys = if suite { suite_runs(cfg) } else { single_runs(cfg) };
    match run_suite(cfg, &keys, &cfg.out, workers) {
        Ok(s) => {
            for o in &s.outcomes {
                match &o.result {
                    Ok((r, t)) => {
                        let ok = r.agents.iter().filter(|a| a.success()).count();
                        eprintln!(
                            "{} {} δ={} seed={}: {ok}/{} succeeded, {:.1} s",
                            o.key.scenario,
                            o.key.fov_name,
                            o.key.delta,
                            o.key.seed,
                            r.agents.len(),
                            t.wall_seconds
                        );
                    }
                    Err(e) => eprintln!("{} {} δ={} seed={}: failed: {e}", o.key.scenario, o.key.fov_name, o.key.delta, o.key.seed),
                }
            }
            println!("{}", s.summary.display());
            if s.failures > 0 {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[derive(Serialize)]
struct TauLine<'a> {
    scenario: &'a str,
    seed: u64,
    delta: f64,
    tau: f64,
    std_err: f64,
    trials: usize,
}

fn traversability(cfg: &ExperimentConfig, seed: Option<u64>) -> ExitCode {
    let seeds = seed.map_or_else(|| cfg.seeds.clone(), |s| vec![s]);
    let run = cfg.base_run();
    for s in seeds {
        let est = build_world(&run, s).and_then(|w| run_traversability(&run, &w, s));
        match est {
            Ok(e) => {
                let line =
                    TauLine { scenario: cfg.scenario.name(), seed: s, delta: run.delta, tau: e.tau, std_err: e.std_err, trials: e.trials };
                println!("{}", serde_json::to_string(&line).expect("plain struct"));
            }
            Err(e) => {
                eprintln!("error: seed {s}: {e}");
                return ExitCode::FAILURE;
            }
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.list_scenarios {
        list_scenarios();
        return ExitCode::SUCCESS;
    }
    match cli.command {
        None => {
            eprintln!("error: no command given, see --help");
            ExitCode::from(2)
        }
        Some(Command::ListScenarios) => {
            list_scenarios();
            ExitCode::SUCCESS
        }
        Some(Command::Run { config, flags }) => match load(&config) {
            Ok(cfg) => sweep(&apply(cfg, &flags), false, flags.workers),
            Err(code) => code,
        },
        Some(Command::Suite { config, flags }) => match load(&config) {
            Ok(cfg) => sweep(&apply(cfg, &flags), true, flags.workers),
            Err(code) => code,
        },
        Some(Command::Traversability { config, seed }) => match load(&config) {
            Ok(cfg) => traversability(&cfg, seed),
            Err(code) => code,
        },
    }
}
