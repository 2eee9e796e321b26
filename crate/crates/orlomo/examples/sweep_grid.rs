// A small sweep: algorithms × local steps at equal budget, each cell with a
// seed derived from the master seed and its coordinates.

use orlomo::cli::run_cell;
use orlomo::{Algorithm, SimConfig, SweepConfig};

const BASE: &str = r#"{
  "algorithm": "orlomo", "workers": 4, "local_steps": 8, "gradient_budget": 4096,
  "momentum": 0.9, "local_lr": 5e-4, "schedule": {"kind": "delay-penalized"}, "seed": 2024,
  "timing": {"kind": "uniform-jitter", "jitter": 0.5},
  "problem": {"kind": "noisy-quadratic", "dimension": 8, "noise": 0.1,
              "spectrum_min": 1.0, "spectrum_max": 10.0}
}"#;

pub fn run_example() -> orlomo::Result<()> {
    let base = SimConfig::from_json_str(BASE)?;
    let sweep = SweepConfig {
        base,
        algorithms: vec![Algorithm::Orlomo, Algorithm::AlSgd],
        workers: vec![],
        local_steps: vec![8, 16],
        momentum: vec![],
        scenarios: vec![],
        slow_multipliers: vec![],
    };
    let out = std::env::temp_dir().join(format!("orlomo-sweep-example-{}", std::process::id()));
    for (coords, cfg) in sweep.cells()? {
        let key = coords.key();
        let cell = run_cell(&key, &cfg, &out.join(&key))?;
        println!(
            "{key:<40} seed {:>20} T={:<5} F={:.3e}",
            cell.seed, cell.iterations, cell.final_loss
        );
    }
    std::fs::remove_dir_all(&out)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
