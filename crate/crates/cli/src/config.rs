//! Scenario configuration files (JSON).

use std::path::PathBuf;

use filterlab_core::filter::{FilterConfig, Resampler};
use filterlab_core::model::{builtin, Model, ModelSpec};
use filterlab_core::simulate::{CounterexampleSpec, TimeGrid};
use filterlab_core::verify::{CheckParams, CHECK_NAMES};
use serde::{Deserialize, Serialize};

use crate::exit::CliError;

/// Either a bare built-in name or a full model spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
#[allow(clippy::large_enum_variant)] // parsed once per run
pub enum ModelBlock {
    Name(String),
    Spec(ModelSpec),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub horizon: f64,
    pub dt: f64,
}

fn default_threshold() -> f64 {
    0.5
}

fn default_collapse_epsilon() -> f64 {
    1e-6
}

/// Filter settings; the particle seed is derived from the scenario seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterBlock {
    pub n_particles: usize,
    #[serde(default = "default_threshold")]
    pub resample_threshold: f64,
    #[serde(default)]
    pub resampler: Resampler,
    #[serde(default = "default_collapse_epsilon")]
    pub collapse_epsilon: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsBlock {
    #[serde(default)]
    pub checks: Vec<String>,
    /// Overrides `params.n_paths`.
    #[serde(default)]
    pub n_paths: Option<usize>,
    #[serde(default)]
    pub params: CheckParams,
}

fn default_paths() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default)]
    pub model: Option<ModelBlock>,
    #[serde(default)]
    pub grid: Option<GridBlock>,
    #[serde(default)]
    pub filter: Option<FilterBlock>,
    #[serde(default)]
    pub diagnostics: DiagnosticsBlock,
    #[serde(default)]
    pub counterexample: Option<CounterexampleSpec>,
    /// Paths written by `simulate` and `counterexample`.
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| config_err(format!("config: {e}")))?;
        if cfg.n_paths == 0 {
            return Err(config_err("n_paths: must be at least 1"));
        }
        Ok(cfg)
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let block = self
            .model
            .as_ref()
            .ok_or_else(|| config_err("model: missing"))?;
        let built = match block {
            ModelBlock::Name(name) => builtin(name),
            ModelBlock::Spec(spec) => spec.build(),
        };
        built.map_err(|e| config_err(format!("model: {e}")))
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        let g = self.grid.ok_or_else(|| config_err("grid: missing"))?;
        if !(g.dt > 0.0 && g.dt.is_finite()) {
            return Err(config_err(format!(
                "grid.dt: must be positive and finite, got {}",
                g.dt
            )));
        }
        if !(g.horizon > 0.0 && g.horizon.is_finite()) {
            return Err(config_err(format!(
                "grid.horizon: must be positive and finite, got {}",
                g.horizon
            )));
        }
        TimeGrid::new(g.horizon, g.dt).map_err(|e| config_err(format!("grid: {e}")))
    }

    pub fn filter(&self, seed: u64) -> Result<FilterConfig, CliError> {
        let f = self
            .filter
            .as_ref()
            .ok_or_else(|| config_err("filter: missing"))?;
        let cfg = FilterConfig {
            n_particles: f.n_particles,
            resample_threshold: f.resample_threshold,
            resampler: f.resampler,
            seed,
            collapse_epsilon: f.collapse_epsilon,
        };
        cfg.validate()
            .map_err(|e| config_err(format!("filter: {e}")))?;
        Ok(cfg)
    }

    pub fn counterexample(&self) -> Result<CounterexampleSpec, CliError> {
        let spec = self
            .counterexample
            .clone()
            .ok_or_else(|| config_err("counterexample: missing"))?;
        spec.validate()
            .map_err(|e| config_err(format!("counterexample: {e}")))?;
        Ok(spec)
    }

    /// Check names, each known, and the merged parameter block.
    pub fn checks(&self) -> Result<(Vec<String>, CheckParams), CliError> {
        let d = &self.diagnostics;
        if d.checks.is_empty() {
            return Err(config_err("diagnostics.checks: no checks selected"));
        }
        if let Some(bad) = d.checks.iter().find(|c| !CHECK_NAMES.contains(&c.as_str())) {
            return Err(config_err(format!(
                "diagnostics.checks: unknown check `{bad}` (known: {})",
                CHECK_NAMES.join(", ")
            )));
        }
        let mut params = d.params.clone();
        if d.n_paths.is_some() {
            params.n_paths = d.n_paths;
        }
        Ok((d.checks.clone(), params))
    }
}
