// Slow workers stall synchronous rounds but barely slow the asynchronous
// server. Same gradient budget, simulated wall-clock compared.

use orlomo::problems::ProblemConfig;
use orlomo::simulator::TimingModel;
use orlomo::{run, Algorithm, Schedule, SimConfig};

fn cfg(algorithm: Algorithm, timing: TimingModel) -> SimConfig {
    SimConfig {
        algorithm,
        workers: 8,
        local_steps: 8,
        iterations: None,
        gradient_budget: Some(8 * 8 * 40),
        momentum: 0.9,
        local_lr: 5e-4,
        schedule: Schedule::DelayPenalized,
        seed: 5,
        timing,
        problem: ProblemConfig::NoisyQuadratic {
            dimension: 16,
            noise: 0.1,
            spectrum_min: 1.0,
            spectrum_max: 10.0,
            optimum_scale: 1.0,
        },
        diagnostics_every: None,
        output: None,
    }
}

pub fn run_example() -> orlomo::Result<()> {
    let scenarios = [
        ("homogeneous", TimingModel::constant(1.0)),
        ("25% slow x2", TimingModel::heterogeneous_fraction(1.0, 0.0, 0.25, 2.0)),
    ];
    for (name, timing) in scenarios {
        let sync = run(&cfg(Algorithm::Prsgdm, timing.clone()))?;
        let asynchronous = run(&cfg(Algorithm::Orlomo, timing))?;
        println!(
            "{name:<12} prsgdm {:>7.1}s  orlomo {:>7.1}s  ratio {:.2}",
            sync.wall_clock(),
            asynchronous.wall_clock(),
            sync.wall_clock() / asynchronous.wall_clock()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
