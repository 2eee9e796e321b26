// Rebuild the auxiliary sequences of an OrLoMo trace and check every
// identity against the recorded iterates.

use orlomo::oracle::{build_aux_sequences, verify_trace};
use orlomo::problems::ProblemConfig;
use orlomo::simulator::TimingModel;
use orlomo::{run, Algorithm, Schedule, SimConfig};

pub fn run_example() -> orlomo::Result<()> {
    let config = SimConfig {
        algorithm: Algorithm::Orlomo,
        workers: 3,
        local_steps: 2,
        iterations: Some(300),
        gradient_budget: None,
        momentum: 0.9,
        local_lr: 2e-3,
        schedule: Schedule::DelayPenalized,
        seed: 11,
        timing: TimingModel::heterogeneous(1.0, 0.5, vec![2], 3.0),
        problem: ProblemConfig::Rank1MatrixFactorization {
            dimension: 8,
            noise: 0.05,
            rows: None,
        },
        // The weighted gradient metric needs ‖∇F(w_t)‖² at every iterate.
        diagnostics_every: Some(1),
        output: None,
    };
    let trace = run(&config)?;
    let aux = build_aux_sequences(&trace)?;
    println!(
        "checkable iterations 0..{} of {} ({} excluded: their packets never came back)",
        aux.checkable,
        trace.len(),
        aux.excluded()
    );
    let report = verify_trace(&trace)?;
    for c in &report.checks {
        println!("{:<24} {:>10.3e}  {}", c.name, c.max_rel_dev, if c.pass { "ok" } else { "FAILED" });
    }
    if let Some(m) = report.weighted_gradient_metric {
        println!("weighted gradient metric {m:.4e}");
    }
    assert!(report.pass);

    let mut tampered = trace.clone();
    tampered.packets[10].delta_u.scale(1.001);
    let bad = verify_trace(&tampered)?;
    println!("after perturbing one packet: {} checks fail", bad.failed().count());
    assert!(!bad.pass);
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
