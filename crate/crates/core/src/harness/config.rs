use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{AlgorithmSpec, ConfidenceSchedule};
use crate::problem::ContextualProblem;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "BANDITLAB_WORKERS";

/// Experiment description, read from TOML. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Preset name or path to a problem JSON file (relative to the config file).
    pub problem: String,
    /// Seed of the preset generator.
    pub problem_seed: u64,
    /// Overrides the problem's noise standard deviation.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Empty means one LinUCB per representation plus LEADER, EXP4.IX and RegBal.
    pub algorithms: Vec<AlgorithmSpec>,
    pub horizon: u64,
    pub n_runs: usize,
    /// Run `r` uses seed `base_seed + r`.
    pub base_seed: u64,
    pub delta: f64,
    pub lambda: f64,
    pub schedule: ConfidenceSchedule,
    /// Default for policies with optional update sharing.
    pub shared_updates: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    /// Number of log-spaced summary checkpoints.
    pub checkpoints: usize,
    /// Write every `csv_stride`-th round (and the last) to the trace CSV.
    pub csv_stride: u64,
    pub log_x: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: "fig1".into(),
            problem_seed: 0,
            sigma: None,
            algorithms: Vec::new(),
            horizon: 50_000,
            n_runs: 20,
            base_seed: 0,
            delta: 0.01,
            lambda: 1.0,
            schedule: ConfidenceSchedule::Fixed,
            shared_updates: false,
            output: None,
            checkpoints: 200,
            csv_stride: 1,
            log_x: true,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.n_runs == 0 {
            return Err(Error::Config("n_runs must be at least 1".into()));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta = {} outside (0, 1)", self.delta)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::Config(format!("lambda = {} must be positive", self.lambda)));
        }
        if let Some(s) = self.sigma {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::Config(format!("sigma = {s} must be finite and non-negative")));
            }
        }
        if self.checkpoints == 0 || self.csv_stride == 0 {
            return Err(Error::Config("checkpoints and csv_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn run_seed(&self, run_id: usize) -> u64 {
        self.base_seed.wrapping_add(run_id as u64)
    }

    pub fn algorithm_list(&self, problem: &ContextualProblem) -> Vec<AlgorithmSpec> {
        if self.algorithms.is_empty() {
            default_algorithms(problem)
        } else {
            self.algorithms.clone()
        }
    }
}

/// One LinUCB per representation, LEADER, EXP4.IX and RegBal.
pub fn default_algorithms(problem: &ContextualProblem) -> Vec<AlgorithmSpec> {
    let mut out: Vec<AlgorithmSpec> = (0..problem.representations.len())
        .map(|i| AlgorithmSpec::named("linucb").with_rep(i))
        .collect();
    out.extend(["leader", "exp4ix", "regbal"].map(AlgorithmSpec::named));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_missing_keys() {
        let cfg = ExperimentConfig::from_toml_str("problem = \"mixing\"\nhorizon = 10\n").unwrap();
        assert_eq!(cfg.horizon, 10);
        assert_eq!(cfg.n_runs, 20);
        assert_eq!(cfg.delta, 0.01);
        assert_eq!(cfg.lambda, 1.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("horizn = 10\n").is_err());
        assert!(ExperimentConfig::from_toml_str("[[algorithms]]\nname = \"leader\"\nfoo = 1\n").is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(ExperimentConfig::from_toml_str("delta = 1.0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("horizon = 0\n").is_err());
        assert!(ExperimentConfig::from_toml_str("n_runs = 0\n").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig {
            algorithms: vec![AlgorithmSpec::named("linucb").with_rep(2)],
            schedule: ConfidenceSchedule::Cubic,
            sigma: Some(0.5),
            ..Default::default()
        };
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
