//! Config file loading and simulator-config resolution.

use crate::{CliError, SimArgs};
use serde::Deserialize;
use std::path::{Path, PathBuf};
use std::time::Duration;
use verigrade_core::harness::SimulatorConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default)]
    pub simulator: SimulatorSection,
    /// Path to a category weights file, resolved relative to the config.
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulatorSection {
    pub compile_cmd: Option<String>,
    pub run_cmd: Option<String>,
    pub timeout_secs: Option<f64>,
    pub workdir: Option<PathBuf>,
    pub keep_failed_workdirs: Option<bool>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config `{}`: {e}", path.display())))?;
        let mut cfg: FileConfig = toml::from_str(&text)
            .map_err(|e| CliError::Usage(format!("bad config `{}`: {e}", path.display())))?;
        if let (Some(w), Some(dir)) = (&cfg.weights, path.parent()) {
            if w.is_relative() {
                cfg.weights = Some(dir.join(w));
            }
        }
        Ok(cfg)
    }
}

fn env_var(name: &str) -> Option<String> {
    std::env::var(name).ok().filter(|v| !v.is_empty())
}

/// Merges flags > environment > config file > defaults.
pub fn resolve_sim_config(args: &SimArgs, file: &FileConfig) -> Result<SimulatorConfig, CliError> {
    let mut cfg = SimulatorConfig::default();
    if let Some(v) = &file.simulator.compile_cmd {
        cfg.compile_command_template = v.clone();
    }
    if let Some(v) = &file.simulator.run_cmd {
        cfg.run_command_template = v.clone();
    }
    if let Some(v) = file.simulator.timeout_secs {
        cfg.timeout = secs(v)?;
    }
    if let Some(v) = &file.simulator.workdir {
        cfg.workdir_root = v.clone();
    }
    if let Some(v) = file.simulator.keep_failed_workdirs {
        cfg.keep_failed_workdirs = v;
    }

    if let Some(v) = env_var("VERIGRADE_COMPILE_CMD") {
        cfg.compile_command_template = v;
    }
    if let Some(v) = env_var("VERIGRADE_RUN_CMD") {
        cfg.run_command_template = v;
    }
    if let Some(v) = env_var("VERIGRADE_TIMEOUT_SECS") {
        let parsed: f64 = v
            .parse()
            .map_err(|_| CliError::Usage(format!("bad VERIGRADE_TIMEOUT_SECS `{v}`")))?;
        cfg.timeout = secs(parsed)?;
    }
    if let Some(v) = env_var("VERIGRADE_WORKDIR") {
        cfg.workdir_root = PathBuf::from(v);
    }

    if let Some(v) = &args.compile_cmd {
        cfg.compile_command_template = v.clone();
    }
    if let Some(v) = &args.run_cmd {
        cfg.run_command_template = v.clone();
    }
    if let Some(v) = args.timeout_secs {
        cfg.timeout = secs(v)?;
    }
    if let Some(v) = &args.workdir {
        cfg.workdir_root = v.clone();
    }

    cfg.validate()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

fn secs(v: f64) -> Result<Duration, CliError> {
    if !(v > 0.0) || !v.is_finite() {
        return Err(CliError::Usage(format!("timeout must be > 0, got {v}")));
    }
    Ok(Duration::from_secs_f64(v))
}

/// Workers resolution: flag > VERIGRADE_WORKERS > 0 (auto).
pub fn resolve_workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match env_var("VERIGRADE_WORKERS") {
        Some(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("bad VERIGRADE_WORKERS `{v}`"))),
        None => Ok(0),
    }
}
