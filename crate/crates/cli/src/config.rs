//! Config file handling.
//!
//! A single TOML file can describe either experiment; command-line flags
//! override file values. Unknown keys are rejected so typos fail loudly, and
//! the whole structure round-trips through serialization unchanged.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use skirent::experiments::{CompareScenario, RegretScenario};
use skirent::learner::LossMode;

/// Which experiment a config file is for; checked against the subcommand.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Compare,
    Regret,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum LossModeArg {
    Expected,
    Sampled,
}

impl From<LossModeArg> for LossMode {
    fn from(arg: LossModeArg) -> Self {
        match arg {
            LossModeArg::Expected => LossMode::Expected,
            LossModeArg::Sampled => LossMode::Sampled,
        }
    }
}

/// Top-level config file. Every field is optional; defaults are documented
/// on the per-field accessors below and in the book's experiments chapter.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    /// Experiment kind this file is meant for; validated against the
    /// subcommand when present.
    pub experiment: Option<ExperimentKind>,
    /// Master seed for every derived stream (default 42).
    pub seed: Option<u64>,
    /// Output directory (default "out").
    pub out: Option<PathBuf>,
    /// Worker threads; 0 or absent means one per core.
    pub threads: Option<usize>,
    /// Loss accounting for the learner (default "expected").
    pub loss_mode: Option<LossModeArg>,
    /// Emit SVG charts next to the CSVs (default false).
    pub chart: Option<bool>,
    pub compare: Option<CompareConfig>,
    #[serde(
        default,
        skip_serializing_if = "Vec::is_empty",
        rename = "regret_scenario"
    )]
    pub regret_scenarios: Vec<RegretScenarioConfig>,
}

/// Ratio-comparison settings. Defaults: buy_cost 100, sigma grid 0..50 in
/// steps of 2.5, lambdas {1, ln 1.5}, 10000 trials.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub buy_cost: Option<u32>,
    pub sigma_grid: Option<Vec<f64>>,
    pub lambdas: Option<Vec<f64>>,
    pub trials: Option<u64>,
}

impl CompareConfig {
    pub fn to_scenario(&self) -> CompareScenario {
        let defaults = CompareScenario::default();
        CompareScenario {
            buy_cost: self.buy_cost.unwrap_or(defaults.buy_cost),
            sigma_grid: self.sigma_grid.clone().unwrap_or(defaults.sigma_grid),
            lambdas: self.lambdas.clone().unwrap_or(defaults.lambdas),
            trials: self.trials.unwrap_or(defaults.trials),
        }
    }
}

/// One regret scenario. Defaults: horizon 5000, five experts per panel,
/// costs and seasons uniform on [200, 700], cost-noise variances 1..20 with
/// bound 50, season-noise variances 1..100, lambda = ln 1.5, 100 seeds.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegretScenarioConfig {
    pub id: Option<String>,
    pub horizon: Option<u64>,
    pub buy_experts: Option<usize>,
    pub ski_experts: Option<usize>,
    pub cost_range: Option<[u32; 2]>,
    pub season_range: Option<[u32; 2]>,
    pub buy_variance_range: Option<[f64; 2]>,
    pub ski_variance_range: Option<[f64; 2]>,
    pub noise_bound: Option<f64>,
    pub lambda: Option<f64>,
    pub seeds: Option<u64>,
}

impl RegretScenarioConfig {
    pub fn to_scenario(&self, index: usize, loss_mode: LossMode) -> RegretScenario {
        let defaults = RegretScenario::default();
        RegretScenario {
            id: self.id.clone().unwrap_or_else(|| format!("config{index}")),
            horizon: self.horizon.unwrap_or(defaults.horizon),
            num_buy_experts: self.buy_experts.unwrap_or(defaults.num_buy_experts),
            num_ski_experts: self.ski_experts.unwrap_or(defaults.num_ski_experts),
            cost_range: self
                .cost_range
                .map(|r| (r[0], r[1]))
                .unwrap_or(defaults.cost_range),
            season_range: self
                .season_range
                .map(|r| (r[0], r[1]))
                .unwrap_or(defaults.season_range),
            buy_variance_range: self
                .buy_variance_range
                .map(|r| (r[0], r[1]))
                .unwrap_or(defaults.buy_variance_range),
            ski_variance_range: self
                .ski_variance_range
                .map(|r| (r[0], r[1]))
                .unwrap_or(defaults.ski_variance_range),
            noise_bound: self.noise_bound.unwrap_or(defaults.noise_bound),
            lambda: self.lambda.unwrap_or(defaults.lambda),
            seeds: self.seeds.unwrap_or(defaults.seeds),
            loss_mode,
        }
    }
}

pub fn load(path: &std::path::Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config file {}", path.display()))?;
    let config: FileConfig =
        toml::from_str(&text).with_context(|| format!("invalid config file {}", path.display()))?;
    Ok(config)
}

pub fn check_kind(config: &FileConfig, expected: ExperimentKind) -> Result<()> {
    if let Some(kind) = config.experiment {
        if kind != expected {
            bail!(
                "config key `experiment` is {kind:?} but the {expected:?} subcommand was invoked"
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_losslessly() {
        let config = FileConfig {
            experiment: Some(ExperimentKind::Compare),
            seed: Some(7),
            out: Some(PathBuf::from("results")),
            threads: Some(4),
            loss_mode: Some(LossModeArg::Sampled),
            chart: Some(true),
            compare: Some(CompareConfig {
                buy_cost: Some(100),
                sigma_grid: Some(vec![0.0, 2.5]),
                lambdas: Some(vec![1.0]),
                trials: Some(500),
            }),
            regret_scenarios: vec![RegretScenarioConfig {
                id: Some("a".into()),
                horizon: Some(100),
                cost_range: Some([200, 700]),
                ..Default::default()
            }],
        };
        let text = toml::to_string(&config).unwrap();
        let reparsed: FileConfig = toml::from_str(&text).unwrap();
        assert_eq!(config, reparsed);
    }

    #[test]
    fn unknown_keys_are_rejected_by_name() {
        let err = toml::from_str::<FileConfig>("definitely_not_a_key = 3").unwrap_err();
        assert!(err.to_string().contains("definitely_not_a_key"));
        let err = toml::from_str::<FileConfig>("[compare]\nbuy = 5").unwrap_err();
        assert!(err.to_string().contains("buy"));
    }

    #[test]
    fn empty_file_is_all_defaults() {
        let config: FileConfig = toml::from_str("").unwrap();
        assert_eq!(config, FileConfig::default());
        let scenario = config.compare.clone().unwrap_or_default().to_scenario();
        assert_eq!(scenario.buy_cost, 100);
        assert_eq!(scenario.trials, 10_000);
        assert_eq!(scenario.sigma_grid.len(), 21);
    }
}
