//! Seed and ablation sweeps on a bounded worker pool.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use irbl::geom::FovSpec;
use irbl::sim::output::{fmt9, write_json, write_run};
use irbl::sim::{run_scenario, RunReport, ScenarioKind, SimError};
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::config::{ExperimentConfig, FovPreset};

#[derive(Debug, Error)]
pub enum SuiteError {
    #[error("cannot build a pool of {0} workers")]
    Pool(usize),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("summary.csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> SuiteError + '_ {
    move |source| SuiteError::Io { path: path.to_path_buf(), source }
}

pub const SUMMARY_HEADER: [&str; 15] =
    ["scenario", "fov", "delta", "seed", "agent", "tau", "l", "t", "vbar", "vmax", "dmin", "domin", "sr_acc", "sr_conv", "sr_safe"];

/// One point of the sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct RunKey {
    pub scenario: ScenarioKind,
    /// Preset name, or `custom` for a free-form FoV.
    pub fov_name: String,
    pub fov: FovSpec<f64>,
    pub delta: f64,
    pub seed: u64,
}

impl RunKey {
    /// `<scenario>/<fov>/delta_<δ>/seed_<seed>` under `root`.
    pub fn dir(&self, root: &Path) -> PathBuf {
        root.join(self.scenario.name()).join(&self.fov_name).join(format!("delta_{}", fmt9(self.delta))).join(format!("seed_{}", self.seed))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub steps: u64,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub key: RunKey,
    pub result: Result<(RunReport, Timing), String>,
}

/// Every run of the top-level single-run config, one per seed.
pub fn single_runs(cfg: &ExperimentConfig) -> Vec<RunKey> {
    let fov_name = FovPreset::of(&cfg.fov).map_or("custom", FovPreset::name).to_string();
    cfg.seeds.iter().map(|&seed| RunKey { scenario: cfg.scenario, fov_name: fov_name.clone(), fov: cfg.fov, delta: cfg.delta, seed }).collect()
}

/// The full sweep in output order: scenario, FoV, δ, seed.
pub fn suite_runs(cfg: &ExperimentConfig) -> Vec<RunKey> {
    let mut keys = Vec::new();
    for scenario in cfg.suite_scenarios() {
        for preset in &cfg.suite.fovs {
            for &delta in &cfg.suite.deltas {
                for &seed in &cfg.seeds {
                    keys.push(RunKey { scenario, fov_name: preset.name().to_string(), fov: preset.spec(), delta, seed });
                }
            }
        }
    }
    keys
}

/// Runs one simulation and, when `out` is given, writes its directory.
pub fn execute(cfg: &ExperimentConfig, key: &RunKey, out: Option<&Path>) -> Result<(RunReport, Timing), String> {
    let run = cfg.run_config(key.scenario, key.fov, key.delta);
    let start = Instant::now();
    let (report, world) = run_scenario(&run, key.seed).map_err(|e: SimError| e.to_string())?;
    let timing = Timing { wall_seconds: start.elapsed().as_secs_f64(), steps: world.steps };
    if let Some(root) = out {
        let dir = key.dir(root);
        write_run(&dir, &report, &world, false).map_err(|e| format!("{}: {e}", dir.display()))?;
        // kept apart from report.json so reports stay byte-identical across reruns
        write_json(&dir.join("timing.json"), &timing).map_err(|e| format!("{}: {e}", dir.display()))?;
    }
    Ok((report, timing))
}

/// Runs `keys` on `workers` threads. Results come back in the order of `keys`
/// whatever the pool size.
pub fn run_all(cfg: &ExperimentConfig, keys: &[RunKey], out: Option<&Path>, workers: usize) -> Result<Vec<RunOutcome>, SuiteError> {
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().map_err(|_| SuiteError::Pool(workers))?;
    Ok(pool.install(|| keys.par_iter().map(|key| RunOutcome { key: key.clone(), result: execute(cfg, key, out) }).collect()))
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt9).unwrap_or_default()
}

/// One row per robot of every successful run.
pub fn summary_rows(outcomes: &[RunOutcome]) -> Vec<[String; 15]> {
    let mut rows = Vec::new();
    for o in outcomes {
        let Ok((report, _)) = &o.result else { continue };
        for a in &report.agents {
            rows.push([
                o.key.scenario.name().to_string(),
                o.key.fov_name.clone(),
                fmt9(o.key.delta),
                o.key.seed.to_string(),
                a.agent.to_string(),
                opt(report.tau),
                fmt9(a.l),
                fmt9(a.t),
                fmt9(a.vbar),
                fmt9(a.vmax),
                opt(a.dmin),
                opt(a.domin),
                a.sr_acc.to_string(),
                a.sr_conv.to_string(),
                a.sr_safe.to_string(),
            ]);
        }
    }
    rows
}

pub fn write_summary(path: &Path, outcomes: &[RunOutcome]) -> Result<(), SuiteError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SUMMARY_HEADER)?;
    for row in summary_rows(outcomes) {
        w.write_record(&row)?;
    }
    w.flush().map_err(io_at(path))?;
    Ok(())
}

#[derive(Debug, Serialize)]
struct Failure<'a> {
    scenario: &'a str,
    fov: &'a str,
    delta: f64,
    seed: u64,
    error: &'a str,
}

#[derive(Debug, Serialize)]
struct SuiteTiming {
    workers: usize,
    wall_seconds: f64,
    runs: usize,
}

/// What a finished sweep left behind.
#[derive(Debug)]
pub struct SuiteSummary {
    pub outcomes: Vec<RunOutcome>,
    pub failures: usize,
    pub summary: PathBuf,
}

/// Runs `keys`, writes every run directory plus `config.json`, `summary.csv`,
/// `failures.json` and `timing.json` under `out`. A failed run is recorded
/// and the sweep carries on.
pub fn run_suite(cfg: &ExperimentConfig, keys: &[RunKey], out: &Path, workers: usize) -> Result<SuiteSummary, SuiteError> {
    fs::create_dir_all(out).map_err(io_at(out))?;
    let config_path = out.join("config.json");
    fs::write(&config_path, cfg.emit()).map_err(io_at(&config_path))?;

    let start = Instant::now();
    let outcomes = run_all(cfg, keys, Some(out), workers)?;
    let summary = out.join("summary.csv");
    write_summary(&summary, &outcomes)?;

    let failures: Vec<Failure<'_>> = outcomes
        .iter()
        .filter_map(|o| {
            o.result.as_ref().err().map(|e| Failure {
                scenario: o.key.scenario.name(),
                fov: &o.key.fov_name,
                delta: o.key.delta,
                seed: o.key.seed,
                error: e,
            })
        })
        .collect();
    let failures_path = out.join("failures.json");
    write_json(&failures_path, &failures).map_err(io_at(&failures_path))?;
    let timing_path = out.join("timing.json");
    let timing = SuiteTiming { workers, wall_seconds: start.elapsed().as_secs_f64(), runs: keys.len() };
    write_json(&timing_path, &timing).map_err(io_at(&timing_path))?;

    let failures = failures.len();
    Ok(SuiteSummary { outcomes, failures, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_order_and_size() {
        let mut cfg = ExperimentConfig::new(ScenarioKind::Circle, 2);
        cfg.seeds = vec![4, 5];
        let keys = suite_runs(&cfg);
        assert_eq!(keys.len(), 4 * 3 * 2);
        assert_eq!(keys[0].fov_name, "lim");
        assert_eq!((keys[0].delta, keys[0].seed), (0.2, 4));
        assert_eq!((keys[1].delta, keys[1].seed), (0.2, 5));
        assert_eq!(keys.last().unwrap().fov_name, "2d");
    }

    #[test]
    fn run_dirs_are_distinct() {
        let mut cfg = ExperimentConfig::new(ScenarioKind::Forest, 2);
        cfg.seeds = vec![0, 1];
        cfg.suite.scenarios = vec![ScenarioKind::Circle, ScenarioKind::Forest];
        let keys = suite_runs(&cfg);
        let mut dirs: Vec<_> = keys.iter().map(|k| k.dir(Path::new("r"))).collect();
        dirs.sort();
        dirs.dedup();
        assert_eq!(dirs.len(), keys.len());
        assert_eq!(keys[0].dir(Path::new("r")), Path::new("r/circle/lim/delta_0.2/seed_0"));
    }

    #[test]
    fn single_run_names_presets() {
        let cfg = ExperimentConfig::new(ScenarioKind::Circle, 2);
        assert_eq!(single_runs(&cfg)[0].fov_name, "half");
        let mut cfg = cfg;
        cfg.fov = FovSpec::from_f64(90.0, 30.0, 0.0);
        assert_eq!(single_runs(&cfg)[0].fov_name, "custom");
    }
}
