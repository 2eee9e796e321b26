use super::RunTrace;
use serde::Serialize;
use std::collections::BTreeMap;

/// Delay accounting over a completed trace.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DelayStatistics {
    pub iterations: usize,
    pub workers: usize,
    pub max_delay: usize,
    /// `Σ_t τ_t`.
    pub delay_sum: u64,
    /// `(K − 1)·T`.
    pub delay_sum_bound: u64,
    /// `Σ_k (T − ite(T, k))`, the staleness still outstanding at shutdown.
    pub outstanding_staleness: u64,
    /// `Σ_t η_t` (floating point).
    pub eta_sum: f64,
    /// Iterations with `τ_t < 2K`.
    pub small_delay_count: usize,
    /// Iterations with `τ_t ≤ 2K` (those that receive `η = 1/K` under the penalized schedule).
    pub unpenalized_count: usize,
    /// `delay → count`.
    pub histogram: BTreeMap<usize, usize>,
}

impl DelayStatistics {
    /// `Σ τ_t ≤ (K − 1)T`, in integers.
    pub fn delay_sum_holds(&self) -> bool {
        self.delay_sum <= self.delay_sum_bound
    }

    /// `Σ_t τ_t + Σ_k (T − ite(T,k)) = (K − 1)T`, in integers.
    pub fn staleness_identity_holds(&self) -> bool {
        self.delay_sum + self.outstanding_staleness == self.delay_sum_bound
    }

    /// At least half the delays are below `2K`: `2·#{τ_t < 2K} ≥ T`.
    pub fn half_small_holds(&self) -> bool {
        2 * self.small_delay_count >= self.iterations
    }

    /// Exact certificate for `Σ η_t ≥ T/(2K)` under the delay-penalized schedule:
    /// each of the `#{τ ≤ 2K}` iterations contributes exactly `1/K`, every other
    /// one contributes a positive amount, so `2·#{τ ≤ 2K} ≥ T` suffices.
    pub fn eta_sum_holds(&self) -> bool {
        2 * self.unpenalized_count >= self.iterations
    }
}

/// Exact integer delay statistics from the arrival history.
pub fn delay_statistics(trace: &RunTrace) -> DelayStatistics {
    let k = trace.config.workers;
    let t_total = trace.iterations.len();
    let mut histogram = BTreeMap::new();
    let mut delay_sum = 0u64;
    let mut eta_sum = 0.0;
    let mut small = 0usize;
    let mut unpenalized = 0usize;
    let mut max_delay = 0usize;
    let mut latest = vec![0usize; k];
    for r in &trace.iterations {
        *histogram.entry(r.tau).or_insert(0) += 1;
        delay_sum += r.tau as u64;
        eta_sum += r.eta;
        max_delay = max_delay.max(r.tau);
        if r.tau < 2 * k {
            small += 1;
        }
        if r.tau <= 2 * k {
            unpenalized += 1;
        }
        if let Some(w) = r.worker {
            latest[w] = r.t + 1;
        }
    }
    let outstanding = if trace.config.algorithm.is_synchronous() {
        0
    } else {
        latest.iter().map(|&ite| (t_total - ite.min(t_total)) as u64).sum()
    };
    DelayStatistics {
        iterations: t_total,
        workers: k,
        max_delay,
        delay_sum,
        delay_sum_bound: (k as u64 - 1) * t_total as u64,
        outstanding_staleness: outstanding,
        eta_sum,
        small_delay_count: small,
        unpenalized_count: unpenalized,
        histogram,
    }
}
