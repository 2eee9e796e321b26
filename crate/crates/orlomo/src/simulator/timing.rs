use crate::error::{Error, Result};
use crate::rng::RngStream;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingKind {
    /// Every local run takes exactly `local_steps × base`.
    Constant,
    /// Per-run duration `local_steps × base × (1 + jitter·U)`, `U ~ U[0, 1)`.
    UniformJitter,
    /// Uniform jitter plus a designated slow subset scaled by `slow_multiplier`.
    Heterogeneous,
}

/// How long a worker's local run takes in simulated seconds.
///
/// Communication latency is folded into the run (added once per run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingModel {
    pub kind: TimingKind,
    /// Seconds per local iteration.
    #[serde(default = "one")]
    pub base: f64,
    #[serde(default)]
    pub jitter: f64,
    /// Explicit slow worker ids.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub slow_workers: Vec<usize>,
    /// Alternatively, the last `round(fraction · K)` workers are slow.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slow_fraction: Option<f64>,
    #[serde(default = "one")]
    pub slow_multiplier: f64,
    #[serde(default)]
    pub latency: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TimingModel {
    fn default() -> Self {
        TimingModel::constant(1.0)
    }
}

impl TimingModel {
    pub fn constant(base: f64) -> Self {
        TimingModel {
            kind: TimingKind::Constant,
            base,
            jitter: 0.0,
            slow_workers: Vec::new(),
            slow_fraction: None,
            slow_multiplier: 1.0,
            latency: 0.0,
        }
    }

    pub fn uniform_jitter(base: f64, jitter: f64) -> Self {
        TimingModel {
            kind: TimingKind::UniformJitter,
            jitter,
            ..TimingModel::constant(base)
        }
    }

    /// Jittered timing where the listed workers run `multiplier` times slower.
    pub fn heterogeneous(base: f64, jitter: f64, slow_workers: Vec<usize>, multiplier: f64) -> Self {
        TimingModel {
            kind: TimingKind::Heterogeneous,
            jitter,
            slow_workers,
            slow_multiplier: multiplier,
            ..TimingModel::constant(base)
        }
    }

    /// Jittered timing where a fraction of the workers runs `multiplier` times slower.
    pub fn heterogeneous_fraction(base: f64, jitter: f64, fraction: f64, multiplier: f64) -> Self {
        TimingModel {
            kind: TimingKind::Heterogeneous,
            jitter,
            slow_fraction: Some(fraction),
            slow_multiplier: multiplier,
            ..TimingModel::constant(base)
        }
    }

    pub fn validate(&self, workers: usize) -> Result<()> {
        if !(self.base.is_finite() && self.base > 0.0) {
            return Err(Error::config("timing.base", "must be finite and > 0"));
        }
        if !(self.jitter >= 0.0 && self.jitter < 1.0) {
            return Err(Error::config("timing.jitter", "must lie in [0, 1)"));
        }
        if !(self.slow_multiplier.is_finite() && self.slow_multiplier >= 1.0) {
            return Err(Error::config("timing.slow_multiplier", "must be finite and >= 1"));
        }
        if !(self.latency.is_finite() && self.latency >= 0.0) {
            return Err(Error::config("timing.latency", "must be finite and >= 0"));
        }
        if let Some(&k) = self.slow_workers.iter().find(|&&k| k >= workers) {
            return Err(Error::config(
                "timing.slow_workers",
                format!("worker id {k} out of range for {workers} workers"),
            ));
        }
        if let Some(f) = self.slow_fraction {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config("timing.slow_fraction", "must lie in [0, 1]"));
            }
            if !self.slow_workers.is_empty() {
                return Err(Error::config(
                    "timing.slow_fraction",
                    "give either slow_workers or slow_fraction, not both",
                ));
            }
        }
        let has_slow = !self.slow_workers.is_empty() || self.slow_fraction.is_some();
        match self.kind {
            TimingKind::Constant if self.jitter != 0.0 || has_slow => Err(Error::config(
                "timing.kind",
                "constant timing takes no jitter or slow workers",
            )),
            TimingKind::UniformJitter if has_slow => Err(Error::config(
                "timing.kind",
                "uniform-jitter timing takes no slow workers; use heterogeneous",
            )),
            _ => Ok(()),
        }
    }

    pub fn is_slow(&self, worker: usize, workers: usize) -> bool {
        if self.kind != TimingKind::Heterogeneous {
            return false;
        }
        if let Some(f) = self.slow_fraction {
            let count = (f * workers as f64).round() as usize;
            return worker >= workers - count.min(workers);
        }
        self.slow_workers.contains(&worker)
    }

    /// Duration of one local run of `local_steps` iterations on `worker`.
    pub fn run_duration(
        &self,
        worker: usize,
        workers: usize,
        local_steps: usize,
        rng: &mut RngStream,
    ) -> f64 {
        let mut per_step = self.base;
        if self.kind != TimingKind::Constant {
            per_step *= 1.0 + self.jitter * rng.uniform();
        }
        if self.is_slow(worker, workers) {
            per_step *= self.slow_multiplier;
        }
        local_steps as f64 * per_step + self.latency
    }
}
