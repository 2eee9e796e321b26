// One worker is much slower than the other fifteen. Its packets arrive with
// delays in the hundreds and get learning rate `1/τ`.

use orlomo::problems::ProblemConfig;
use orlomo::simulator::TimingModel;
use orlomo::{delay_statistics, run, Algorithm, Schedule, SimConfig};

pub fn run_example() -> orlomo::Result<()> {
    println!("{:>6} {:>10} {:>12} {:>12}", "ratio", "max delay", "Σ η_t", "final F");
    for ratio in [1.0, 2.0, 5.0, 10.0, 50.0] {
        let cfg = SimConfig {
            algorithm: Algorithm::Orlomo,
            workers: 16,
            local_steps: 8,
            iterations: Some(1600),
            gradient_budget: None,
            momentum: 0.9,
            local_lr: 5e-4,
            schedule: Schedule::DelayPenalized,
            seed: 8,
            timing: TimingModel::heterogeneous(1.0, 0.0, vec![15], ratio),
            problem: ProblemConfig::NoisyQuadratic {
                dimension: 16,
                noise: 0.1,
                spectrum_min: 1.0,
                spectrum_max: 10.0,
                optimum_scale: 1.0,
            },
            diagnostics_every: None,
            output: None,
        };
        let trace = run(&cfg)?;
        let stats = delay_statistics(&trace);
        println!(
            "{ratio:>6} {:>10} {:>12.3} {:>12.4e}",
            stats.max_delay, stats.eta_sum, trace.final_loss
        );
        assert!(stats.delay_sum_holds() && stats.eta_sum_holds());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
