//! Experiment configuration: one JSON document describing a run or a suite.

use std::path::PathBuf;

use irbl::corridor::CorridorParams;
use irbl::geom::FovSpec;
use irbl::sim::{validate, AlgoParams, RunConfig, ScenarioKind, ScenarioParams, SimError, SimParams};
use irbl::{MpcConfig, RuleParams};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    /// Malformed JSON, a wrong type or an unknown key. serde names the key.
    #[error("config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("config key `{key}`: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl From<SimError> for ConfigError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::InvalidConfig { field, reason } => ConfigError::Invalid { key: field, reason },
            other => ConfigError::Invalid { key: "scenario".into(), reason: other.to_string() },
        }
    }
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.into(), reason: reason.into() }
}

/// The sensor configurations compared in the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FovPreset {
    Lim,
    Half,
    Full,
    #[serde(rename = "2d")]
    TwoD,
}

impl FovPreset {
    pub const ALL: [FovPreset; 4] = [FovPreset::Lim, FovPreset::Half, FovPreset::Full, FovPreset::TwoD];

    pub fn spec(self) -> FovSpec<f64> {
        match self {
            FovPreset::Lim => FovSpec::from_f64(180.0, 59.0, -20.0),
            FovPreset::Half => FovSpec::from_f64(180.0, 180.0, -90.0),
            FovPreset::Full => FovSpec::from_f64(180.0, 360.0, 0.0),
            FovPreset::TwoD => FovSpec::from_f64(360.0, 0.0, 0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FovPreset::Lim => "lim",
            FovPreset::Half => "half",
            FovPreset::Full => "full",
            FovPreset::TwoD => "2d",
        }
    }

    /// Preset matching `fov` exactly, if any.
    pub fn of(fov: &FovSpec<f64>) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.spec() == *fov)
    }
}

/// Axes swept by `irbl suite`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteAxes {
    /// Empty means just the top-level `scenario`.
    pub scenarios: Vec<ScenarioKind>,
    pub fovs: Vec<FovPreset>,
    pub deltas: Vec<f64>,
}

impl Default for SuiteAxes {
    fn default() -> Self {
        Self { scenarios: Vec::new(), fovs: FovPreset::ALL.to_vec(), deltas: vec![0.2, 0.5, 1.0] }
    }
}

fn default_delta() -> f64 {
    0.2
}
fn default_fov() -> FovSpec<f64> {
    FovPreset::Half.spec()
}
fn default_d_v() -> f64 {
    0.1
}
fn default_epsilon_sep() -> f64 {
    0.5
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_out() -> PathBuf {
    PathBuf::from("results")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioKind,
    #[serde(rename = "N")]
    pub n: usize,
    /// Robot radius.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_fov")]
    pub fov: FovSpec<f64>,
    #[serde(default)]
    pub geometry: ScenarioParams,
    #[serde(default)]
    pub rules: RuleParams,
    /// Accepted and echoed, not used by the controller.
    #[serde(default = "default_d_v")]
    pub d_v: f64,
    #[serde(default = "default_epsilon_sep")]
    pub epsilon_sep: f64,
    #[serde(default)]
    pub corridor: CorridorParams,
    #[serde(default)]
    pub controller: MpcConfig,
    #[serde(default)]
    pub sim: SimParams,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default)]
    pub suite: SuiteAxes,
}

impl ExperimentConfig {
    /// A config with every optional key at its default.
    pub fn new(scenario: ScenarioKind, n: usize) -> Self {
        Self {
            scenario,
            n,
            delta: default_delta(),
            fov: default_fov(),
            geometry: ScenarioParams::default(),
            rules: RuleParams::default(),
            d_v: default_d_v(),
            epsilon_sep: default_epsilon_sep(),
            corridor: CorridorParams::default(),
            controller: MpcConfig::default(),
            sim: SimParams::default(),
            seeds: default_seeds(),
            out: default_out(),
            suite: SuiteAxes::default(),
        }
    }

    /// The simulator config for one point of the sweep.
    pub fn run_config(&self, scenario: ScenarioKind, fov: FovSpec<f64>, delta: f64) -> RunConfig {
        RunConfig {
            scenario,
            agents: self.n,
            delta,
            fov,
            geometry: self.geometry.clone(),
            algo: AlgoParams { rules: self.rules, epsilon_sep: self.epsilon_sep, corridor: self.corridor, controller: self.controller },
            sim: self.sim.clone(),
        }
    }

    /// The single run described by the top-level keys.
    pub fn base_run(&self) -> RunConfig {
        self.run_config(self.scenario, self.fov, self.delta)
    }

    pub fn suite_scenarios(&self) -> Vec<ScenarioKind> {
        if self.suite.scenarios.is_empty() {
            vec![self.scenario]
        } else {
            self.suite.scenarios.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        validate(&self.base_run())?;
        if !(self.d_v >= 0.0 && self.d_v.is_finite()) {
            return Err(invalid("d_v", "must be non-negative"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("seeds", "needs at least one seed"));
        }
        if self.suite.fovs.is_empty() {
            return Err(invalid("suite.fovs", "needs at least one entry"));
        }
        if self.suite.deltas.is_empty() {
            return Err(invalid("suite.deltas", "needs at least one entry"));
        }
        if let Some(d) = self.suite.deltas.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(invalid("suite.deltas", format!("{d} is not a positive radius")));
        }
        if self.suite_scenarios().contains(&ScenarioKind::Custom) && self.scenario != ScenarioKind::Custom {
            return Err(invalid("suite.scenarios", "custom needs the top-level scenario to be custom"));
        }
        Ok(())
    }

    /// Pretty JSON of the effective config, as written next to results.
    pub fn emit(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

/// Parses and validates a config; every key missing from `text` gets its default.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = serde_json::from_str(text)?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
    parse_config(&text)
}
