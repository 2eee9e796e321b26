// Write a trace and its metrics CSV, read the trace back, and confirm the
// reloaded vectors are bit-identical.

use orlomo::problems::ProblemConfig;
use orlomo::simulator::{TimingModel, CSV_HEADER};
use orlomo::{run, Algorithm, RunTrace, Schedule, SimConfig};

pub fn run_example() -> orlomo::Result<()> {
    let cfg = SimConfig {
        algorithm: Algorithm::Orlomo,
        workers: 3,
        local_steps: 2,
        iterations: Some(50),
        gradient_budget: None,
        momentum: 0.5,
        local_lr: 1e-2,
        schedule: Schedule::Constant { eta: 0.2 },
        seed: 77,
        timing: TimingModel::uniform_jitter(0.5, 0.9),
        problem: ProblemConfig::NoisyQuadratic {
            dimension: 4,
            noise: 0.2,
            spectrum_min: 0.5,
            spectrum_max: 2.0,
            optimum_scale: 1.0,
        },
        diagnostics_every: Some(10),
        output: None,
    };
    let trace = run(&cfg)?;
    let dir = std::env::temp_dir().join(format!("orlomo-trace-example-{}", std::process::id()));
    trace.write_json(&dir.join("trace.json"))?;
    trace.write_csv(&dir.join("metrics.csv"))?;

    let csv = std::fs::read_to_string(dir.join("metrics.csv"))?;
    assert!(csv.starts_with(CSV_HEADER));
    print!("{csv}");

    let back = RunTrace::read_json(&dir.join("trace.json"))?;
    assert!(back.weights.iter().zip(&trace.weights).all(|(a, b)| a.bit_eq(b)));
    assert_eq!(back, trace);
    println!("{} snapshots reloaded bit-identically", back.weights.len());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
