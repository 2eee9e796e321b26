// Build a config in code, run OrLoMo, and look at the result.
//
// ```bash
// cargo run --example quickstart
// ```

use orlomo::problems::ProblemConfig;
use orlomo::simulator::TimingModel;
use orlomo::{delay_statistics, run, Algorithm, Schedule, SimConfig};

pub fn run_example() -> orlomo::Result<()> {
    let config = SimConfig {
        algorithm: Algorithm::Orlomo,
        workers: 4,
        local_steps: 4,
        iterations: Some(400),
        gradient_budget: None,
        momentum: 0.9,
        local_lr: 1e-3,
        schedule: Schedule::DelayPenalized,
        seed: 42,
        timing: TimingModel::uniform_jitter(1.0, 0.5),
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
    config.validate()?;

    let trace = run(&config)?;
    let stats = delay_statistics(&trace);
    let first = &trace.diagnostics[0];
    println!("F(w_0) = {:.4e}", first.loss);
    println!("F(w_T) = {:.4e} after {} iterations", trace.final_loss, trace.len());
    println!("max delay {}, mean delay {:.2}", stats.max_delay, stats.delay_sum as f64 / trace.len() as f64);
    println!("simulated time {:.1}s, {} gradients", trace.wall_clock(), trace.gradient_samples);
    assert!(trace.final_loss < first.loss);
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
