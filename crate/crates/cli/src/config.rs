//! Run configuration files (TOML).

use std::path::Path;

use basket_core::simulator::{CalibrationGrid, Interaction, Scenario, SimulationConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Everything a command needs besides its command-line flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; `--seed` overrides it.
    pub seed: u64,
    /// Replicates per scenario; `--reps` overrides it.
    pub reps: usize,
    pub scenario: ScenarioSpec,
    pub simulation: SimulationConfig,
    pub calibration: CalibrationGrid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            reps: 100,
            scenario: ScenarioSpec::default(),
            simulation: SimulationConfig::default(),
            calibration: CalibrationGrid::default(),
        }
    }
}

/// A built-in scenario, optionally with fields overridden, or a fully custom one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interactions: Option<Vec<Interaction>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub population: Option<Vec<Vec<usize>>>,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self::preset(1)
    }
}

impl ScenarioSpec {
    pub fn preset(number: usize) -> Self {
        Self { preset: Some(number), name: None, beta0: None, interactions: None, sigma: None, population: None }
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let mut s = match self.preset {
            Some(k) => Scenario::preset(k)?,
            None => {
                let beta0 = self
                    .beta0
                    .ok_or_else(|| CliError::Usage("a custom scenario needs `beta0` or a `preset`".into()))?;
                let mut s = Scenario::preset(1)?;
                s.name = "custom".into();
                s.beta0 = beta0;
                s
            }
        };
        if let Some(n) = &self.name {
            s.name = n.clone();
        }
        if let Some(b) = self.beta0 {
            s.beta0 = b;
        }
        if let Some(i) = &self.interactions {
            s.interactions = i.clone();
        }
        if let Some(sigma) = self.sigma {
            s.sigma = sigma;
        }
        if let Some(p) = &self.population {
            s.population = p.clone();
        }
        Ok(s)
    }
}

/// A parsed configuration with the digest of the bytes it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub source: Option<String>,
    pub digest: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// 1-based line of the first `[table]` header or `key =` assignment named `key`.
fn line_of(source: &str, key: &str) -> Option<usize> {
    let last = key.rsplit('.').next().unwrap_or(key);
    source
        .lines()
        .position(|l| {
            let t = l.trim();
            t == format!("[{key}]") || t.starts_with(&format!("{last} =")) || t.starts_with(&format!("{last}="))
        })
        .map(|i| i + 1)
}

fn anchored(path: &str, source: &str, key: &str, msg: impl std::fmt::Display) -> CliError {
    match line_of(source, key) {
        Some(line) => CliError::Config(format!("{path}:{line}: [{key}] {msg}")),
        None => CliError::Config(format!("{path}: [{key}] {msg}")),
    }
}

/// Parses and validates a configuration. Errors name the file and line.
pub fn parse_config(source: &str, path: &str) -> Result<RunConfig> {
    let config: RunConfig = toml::from_str(source).map_err(|e| {
        let line = e.span().map(|s| source[..s.start].matches('\n').count() + 1);
        let msg = e.message().trim().to_string();
        match line {
            Some(l) => CliError::Config(format!("{path}:{l}: {msg}")),
            None => CliError::Config(format!("{path}: {msg}")),
        }
    })?;
    validate(&config, source, path)?;
    Ok(config)
}

fn validate(c: &RunConfig, source: &str, path: &str) -> Result<()> {
    let sim = &c.simulation;
    let checks: [(&str, std::result::Result<(), basket_core::Error>); 7] = [
        ("simulation.panel", sim.panel.validate()),
        ("simulation.design", sim.design.validate()),
        ("simulation.utility", sim.utility.validate()),
        ("simulation.interim_mcmc", sim.interim_mcmc.validate()),
        ("simulation.final_mcmc", sim.final_mcmc.validate()),
        ("simulation.comparators", sim.comparators.validate()),
        ("simulation.prior", sim.prior.similarity(&sim.panel).map(|_| ())),
    ];
    for (key, r) in checks {
        r.map_err(|e| anchored(path, source, key, e))?;
    }
    sim.validate().map_err(|e| anchored(path, source, "simulation", e))?;
    if c.reps == 0 {
        return Err(anchored(path, source, "reps", "must be at least 1"));
    }
    let scenario = c.scenario.scenario().map_err(|e| anchored(path, source, "scenario", e))?;
    scenario
        .resolve(&sim.panel, sim.design.n_max())
        .map_err(|e| anchored(path, source, "scenario", e))?;
    let g = &c.calibration;
    if g.u0.is_empty() || g.u1.is_empty() || g.u0.iter().chain(&g.u1).any(|u| !(*u > 0.0)) {
        return Err(anchored(path, source, "calibration", "u0 and u1 grids must be nonempty and positive"));
    }
    Ok(())
}

/// Reads `path`, or returns the defaults when no file is given.
pub fn load_config(path: Option<&Path>) -> Result<LoadedConfig> {
    match path {
        Some(p) => {
            let source = std::fs::read_to_string(p)
                .map_err(|e| CliError::Config(format!("{}: cannot read: {e}", p.display())))?;
            let config = parse_config(&source, &p.display().to_string())?;
            let digest = sha256_hex(source.as_bytes());
            Ok(LoadedConfig { config, source: Some(source), digest })
        }
        None => {
            let config = RunConfig::default();
            let digest = sha256_hex(default_config_toml()?.as_bytes());
            Ok(LoadedConfig { config, source: None, digest })
        }
    }
}

pub fn default_config_toml() -> Result<String> {
    to_toml(&RunConfig::default())
}

pub fn to_toml<T: Serialize>(value: &T) -> Result<String> {
    toml::to_string_pretty(value).map_err(|e| CliError::Config(format!("cannot serialize configuration: {e}")))
}
