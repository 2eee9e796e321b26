#![allow(dead_code)]

use orlomo::config::SimConfig;
use orlomo::problems::ProblemConfig;
use orlomo::simulator::TimingModel;
use orlomo::{Algorithm, Schedule};

pub fn quadratic(dimension: usize, noise: f64) -> ProblemConfig {
    ProblemConfig::NoisyQuadratic {
        dimension,
        noise,
        spectrum_min: 0.5,
        spectrum_max: 10.0,
        optimum_scale: 1.0,
    }
}

pub fn config(algorithm: Algorithm, workers: usize, local_steps: usize, iterations: usize) -> SimConfig {
    SimConfig {
        algorithm,
        workers,
        local_steps,
        iterations: Some(iterations),
        gradient_budget: None,
        momentum: 0.9,
        local_lr: 0.002,
        schedule: Schedule::DelayPenalized,
        seed: 17,
        timing: TimingModel::uniform_jitter(1.0, 0.5),
        problem: quadratic(8, 0.1),
        diagnostics_every: Some(1),
        output: None,
    }
}

/// `‖a − b‖_∞ / max(‖a‖_∞, ‖b‖_∞)`, zero when both vanish.
pub fn rel_dev(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let mut diff = 0.0_f64;
    let mut scale = 0.0_f64;
    for (x, y) in a.iter().zip(b) {
        diff = diff.max((x - y).abs());
        scale = scale.max(x.abs()).max(y.abs());
    }
    if diff == 0.0 {
        0.0
    } else {
        diff / scale
    }
}
