//! Run and sweep configuration.
//!
//! Configs are strict JSON: unknown fields are rejected, and algorithmic
//! fields have no defaults. Timing fields default to a constant model with
//! `base = 1`; problem payload knobs carry the defaults documented on
//! [`ProblemConfig`].

use crate::error::{Error, Result};
use crate::optimizers::{Algorithm, HyperParams, Schedule};
use crate::problems::ProblemConfig;
use crate::simulator::TimingModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// Environment variable that overrides the configured seed in the CLI.
pub const SEED_ENV: &str = "ORLOMO_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub algorithm: Algorithm,
    pub workers: usize,
    pub local_steps: usize,
    /// Server iterations (rounds for synchronous runs). Exclusive with `gradient_budget`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    /// Total stochastic gradients `C`; asynchronous runs use `T = C / S`,
    /// synchronous ones `C / (K·S)` rounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gradient_budget: Option<u64>,
    pub momentum: f64,
    pub local_lr: f64,
    pub schedule: Schedule,
    pub seed: u64,
    #[serde(default)]
    pub timing: TimingModel,
    pub problem: ProblemConfig,
    /// Evaluate `F` and `‖∇F‖²` every this many iterations; defaults to `max(1, T/500)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics_every: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputPaths>,
}

pub(crate) fn parse_strict<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config {
            path,
            message: e.into_inner().to_string(),
        }
    })
}

impl SimConfig {
    /// Parses and validates a config.
    pub fn from_json_str(text: &str) -> Result<SimConfig> {
        let cfg: SimConfig = parse_strict(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<SimConfig> {
        SimConfig::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }

    pub fn validate(&self) -> Result<()> {
        match (self.iterations, self.gradient_budget) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "iterations",
                    "give exactly one of iterations or gradient_budget",
                ))
            }
            (None, None) => {
                return Err(Error::config(
                    "iterations",
                    "one of iterations or gradient_budget is required",
                ))
            }
            _ => {}
        }
        if let Some(c) = self.gradient_budget {
            let per_iter = self.gradients_per_iteration();
            if per_iter == 0 || c == 0 || c % per_iter != 0 {
                return Err(Error::config(
                    "gradient_budget",
                    format!("must be a positive multiple of {per_iter} for this algorithm"),
                ));
            }
        }
        self.hyper_params_unchecked().validate()?;
        self.timing.validate(self.workers)?;
        self.problem.validate()?;
        if self.diagnostics_every == Some(0) {
            return Err(Error::config("diagnostics_every", "must be at least 1"));
        }
        Ok(())
    }

    /// Gradient samples consumed per server iteration (per round when synchronous).
    pub fn gradients_per_iteration(&self) -> u64 {
        let s = self.local_steps as u64;
        if self.algorithm.is_synchronous() {
            s * self.workers as u64
        } else {
            s
        }
    }

    /// Number of server iterations (or synchronous rounds).
    pub fn resolved_iterations(&self) -> usize {
        match (self.iterations, self.gradient_budget) {
            (Some(t), _) => t,
            (None, Some(c)) => (c / self.gradients_per_iteration().max(1)) as usize,
            (None, None) => 0,
        }
    }

    fn hyper_params_unchecked(&self) -> HyperParams {
        HyperParams {
            workers: self.workers,
            local_steps: self.local_steps,
            iterations: self.resolved_iterations(),
            momentum: self.momentum,
            local_lr: self.local_lr,
            schedule: self.schedule,
        }
    }

    pub fn hyper_params(&self) -> Result<HyperParams> {
        let hp = self.hyper_params_unchecked();
        hp.validate()?;
        Ok(hp)
    }

    pub fn diagnostics_cadence(&self) -> usize {
        self.diagnostics_every
            .unwrap_or_else(|| (self.resolved_iterations() / 500).max(1))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// A named timing model in a sweep grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub timing: TimingModel,
}

/// Cartesian sweep over a base config. Empty axes keep the base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Base config; its `seed` is the master seed from which cell seeds derive.
    pub base: SimConfig,
    #[serde(default)]
    pub algorithms: Vec<Algorithm>,
    #[serde(default)]
    pub workers: Vec<usize>,
    #[serde(default)]
    pub local_steps: Vec<usize>,
    #[serde(default)]
    pub momentum: Vec<f64>,
    #[serde(default)]
    pub scenarios: Vec<Scenario>,
    /// Overrides `timing.slow_multiplier` of each scenario.
    #[serde(default)]
    pub slow_multipliers: Vec<f64>,
}

/// Coordinates of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellCoords {
    pub algorithm: Algorithm,
    pub workers: usize,
    pub local_steps: usize,
    pub momentum: f64,
    pub scenario: String,
    pub slow_multiplier: f64,
}

impl CellCoords {
    /// Canonical key; also the cell's directory name.
    pub fn key(&self) -> String {
        format!(
            "{}_K{}_S{}_b{}_{}_x{}",
            self.algorithm.name(),
            self.workers,
            self.local_steps,
            self.momentum,
            self.scenario,
            self.slow_multiplier
        )
    }
}

/// Seed for a sweep cell: a pure function of the master seed and the cell key.
pub fn derive_cell_seed(master: u64, coords: &CellCoords) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(coords.key().as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn or_base<T: Clone>(axis: &[T], base: T) -> Vec<T> {
    if axis.is_empty() {
        vec![base]
    } else {
        axis.to_vec()
    }
}

impl SweepConfig {
    pub fn from_json_str(text: &str) -> Result<SweepConfig> {
        let sweep: SweepConfig = parse_strict(text)?;
        sweep.base.validate()?;
        Ok(sweep)
    }

    pub fn from_path(path: &Path) -> Result<SweepConfig> {
        SweepConfig::from_json_str(&std::fs::read_to_string(path)?)
    }

    /// Expands the grid into `(coords, config)` pairs in a fixed order.
    pub fn cells(&self) -> Result<Vec<(CellCoords, SimConfig)>> {
        let base = &self.base;
        let algorithms = or_base(&self.algorithms, base.algorithm);
        let workers = or_base(&self.workers, base.workers);
        let local_steps = or_base(&self.local_steps, base.local_steps);
        let momentum = or_base(&self.momentum, base.momentum);
        let scenarios = if self.scenarios.is_empty() {
            vec![Scenario {
                name: "base".into(),
                timing: base.timing.clone(),
            }]
        } else {
            self.scenarios.clone()
        };

        let mut out = Vec::new();
        for &algorithm in &algorithms {
            for &k in &workers {
                for &s in &local_steps {
                    for &beta in &momentum {
                        for scenario in &scenarios {
                            let multipliers = if self.slow_multipliers.is_empty() {
                                vec![scenario.timing.slow_multiplier]
                            } else {
                                self.slow_multipliers.clone()
                            };
                            for &mult in &multipliers {
                                let coords = CellCoords {
                                    algorithm,
                                    workers: k,
                                    local_steps: s,
                                    momentum: beta,
                                    scenario: scenario.name.clone(),
                                    slow_multiplier: mult,
                                };
                                let mut cfg = base.clone();
                                cfg.algorithm = algorithm;
                                cfg.workers = k;
                                cfg.local_steps = s;
                                cfg.momentum = beta;
                                cfg.timing = scenario.timing.clone();
                                cfg.timing.slow_multiplier = mult;
                                cfg.output = None;
                                cfg.seed = derive_cell_seed(base.seed, &coords);
                                cfg.validate().map_err(|e| match e {
                                    Error::Config { path, message } => Error::Config {
                                        path: format!("cells[{}].{path}", coords.key()),
                                        message,
                                    },
                                    other => other,
                                })?;
                                out.push((coords, cfg));
                            }
                        }
                    }
                }
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const SAMPLE: &str = r#"{
        "algorithm": "orlomo",
        "workers": 4,
        "local_steps": 2,
        "iterations": 50,
        "momentum": 0.9,
        "local_lr": 0.01,
        "schedule": {"kind": "delay-penalized"},
        "seed": 3,
        "problem": {"kind": "noisy-quadratic", "dimension": 4, "noise": 0.1,
                    "spectrum_min": 1.0, "spectrum_max": 10.0}
    }"#;

    #[test]
    fn parse_and_round_trip() {
        let cfg = SimConfig::from_json_str(SAMPLE).unwrap();
        assert_eq!(cfg.timing, TimingModel::default());
        let again = SimConfig::from_json_str(&cfg.to_json_pretty()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn unknown_field_rejected_with_path() {
        let text = SAMPLE.replace("\"seed\": 3,", "\"seed\": 3, \"bogus\": 1,");
        let err = SimConfig::from_json_str(&text).unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
        let text = SAMPLE.replace("\"noise\": 0.1,", "\"noise\": 0.1, \"extra\": 2,");
        let Error::Config { path, .. } = SimConfig::from_json_str(&text).unwrap_err() else {
            panic!()
        };
        assert!(path.starts_with("problem"), "{path}");
    }

    #[test]
    fn momentum_outside_unit_interval_rejected() {
        for bad in ["1.0", "-0.1", "1.5"] {
            let text = SAMPLE.replace("\"momentum\": 0.9", &format!("\"momentum\": {bad}"));
            let Error::Config { path, .. } = SimConfig::from_json_str(&text).unwrap_err() else {
                panic!()
            };
            assert_eq!(path, "momentum");
        }
    }

    #[test]
    fn missing_algorithmic_field_rejected() {
        let text = SAMPLE.replace("\"local_lr\": 0.01,", "");
        assert!(SimConfig::from_json_str(&text).is_err());
    }

    #[test]
    fn budget_and_iterations_are_exclusive() {
        let both = SAMPLE.replace("\"iterations\": 50,", "\"iterations\": 50, \"gradient_budget\": 100,");
        assert!(SimConfig::from_json_str(&both).is_err());
        let neither = SAMPLE.replace("\"iterations\": 50,", "");
        assert!(SimConfig::from_json_str(&neither).is_err());
        let budget = SAMPLE.replace("\"iterations\": 50,", "\"gradient_budget\": 100,");
        let cfg = SimConfig::from_json_str(&budget).unwrap();
        assert_eq!(cfg.resolved_iterations(), 50);
        let mut sync = cfg.clone();
        sync.algorithm = Algorithm::Prsgdm;
        assert!(sync.validate().is_err(), "100 is not a multiple of K·S = 8");
        sync.gradient_budget = Some(96);
        assert_eq!(sync.resolved_iterations(), 12);
    }

    #[test]
    fn default_cadence() {
        let mut cfg = SimConfig::from_json_str(SAMPLE).unwrap();
        assert_eq!(cfg.diagnostics_cadence(), 1);
        cfg.iterations = Some(5000);
        assert_eq!(cfg.diagnostics_cadence(), 10);
    }

    #[test]
    fn cell_seed_is_pure() {
        let c = CellCoords {
            algorithm: Algorithm::Orlomo,
            workers: 8,
            local_steps: 8,
            momentum: 0.9,
            scenario: "homogeneous".into(),
            slow_multiplier: 1.0,
        };
        assert_eq!(derive_cell_seed(1, &c), derive_cell_seed(1, &c));
        assert_ne!(derive_cell_seed(1, &c), derive_cell_seed(2, &c));
        let mut d = c.clone();
        d.local_steps = 16;
        assert_ne!(derive_cell_seed(1, &c), derive_cell_seed(1, &d));
    }
}
