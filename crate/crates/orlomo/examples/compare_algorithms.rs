// OrLoMo, AL-SGD, local OrMo-DA and PRSGDm on the same problem and the same
// gradient budget.

use orlomo::problems::ProblemConfig;
use orlomo::simulator::TimingModel;
use orlomo::{run, Algorithm, Schedule, SimConfig};

fn base() -> SimConfig {
    SimConfig {
        algorithm: Algorithm::Orlomo,
        workers: 4,
        local_steps: 8,
        iterations: None,
        gradient_budget: Some(4 * 8 * 100),
        momentum: 0.9,
        local_lr: 5e-4,
        schedule: Schedule::DelayPenalized,
        seed: 3,
        timing: TimingModel::uniform_jitter(1.0, 0.3),
        problem: ProblemConfig::LogisticRegression {
            dimension: 10,
            noise: 0.05,
            samples: 256,
            l2: 0.01,
        },
        diagnostics_every: None,
        output: None,
    }
}

pub fn run_example() -> orlomo::Result<()> {
    println!("{:<14} {:>10} {:>14} {:>10}", "algorithm", "iterations", "F - F*", "sim time");
    for algorithm in [Algorithm::Orlomo, Algorithm::AlSgd, Algorithm::LocalOrmoDa, Algorithm::Prsgdm] {
        let cfg = SimConfig { algorithm, ..base() };
        let trace = run(&cfg)?;
        println!(
            "{:<14} {:>10} {:>14.4e} {:>10.1}",
            algorithm.name(),
            trace.len(),
            trace.final_loss - trace.f_star,
            trace.wall_clock()
        );
        assert_eq!(trace.gradient_samples, 3200);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
