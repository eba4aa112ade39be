//! JSON run configuration. Explicit flags override file values; the seed
//! additionally falls back to `$FLOWSENTRY_SEED`.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use flowsentry_core::harness::ModelConfig;
use flowsentry_core::{Scenario, SplitSpec};

use crate::Failure;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Capture path used when a subcommand omits its data argument.
    pub capture: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub scenario: Option<Scenario>,
    /// Default model selection for train/crossval/gridsearch.
    pub model: Option<String>,
    /// Hyperparameters for train/crossval.
    pub model_config: Option<ModelConfig>,
    /// Grid override for gridsearch.
    pub grid: Option<Vec<ModelConfig>>,
    pub seed: Option<u64>,
    pub eval_fraction: Option<f64>,
    pub name: Option<String>,
    pub runs: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig, Failure> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::usage(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::usage(format!("invalid config {}: {e}", path.display())))
    }
}

/// Layered value resolution: flag, then config file, then default.
pub struct Resolved {
    pub seed: u64,
    pub split: SplitSpec,
    pub scenario: Scenario,
}

pub fn resolve_seed(flag: Option<u64>, config: &RunConfig) -> u64 {
    flag.or(config.seed)
        .or_else(|| {
            std::env::var("FLOWSENTRY_SEED")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
}

pub fn resolve(
    seed_flag: Option<u64>,
    scenario_flag: Option<&str>,
    eval_fraction_flag: Option<f64>,
    config: &RunConfig,
) -> Result<Resolved, Failure> {
    let scenario = match scenario_flag {
        Some(s) => s
            .parse::<Scenario>()
            .map_err(|e| Failure::usage(e.to_string()))?,
        None => config.scenario.unwrap_or(Scenario::Binary),
    };
    let seed = resolve_seed(seed_flag, config);
    let eval_fraction = eval_fraction_flag.or(config.eval_fraction).unwrap_or(0.2);
    if !(0.0 < eval_fraction && eval_fraction < 1.0) {
        return Err(Failure::usage(format!(
            "eval fraction {eval_fraction} outside (0,1)"
        )));
    }
    Ok(Resolved {
        seed,
        split: SplitSpec {
            eval_fraction,
            seed,
            stratified: true,
        },
        scenario,
    })
}

pub fn required_path(
    flag: Option<PathBuf>,
    fallback: Option<&PathBuf>,
    what: &str,
) -> Result<PathBuf, Failure> {
    flag.or_else(|| fallback.cloned())
        .ok_or_else(|| Failure::usage(format!("missing {what} (pass it or set it in --config)")))
}

pub fn required_model(flag: Option<String>, config: &RunConfig) -> Result<String, Failure> {
    flag.or_else(|| config.model.clone())
        .ok_or_else(|| Failure::usage("missing model name (positional or config `model`)"))
}
