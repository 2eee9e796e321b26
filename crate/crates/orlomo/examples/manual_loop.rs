// Drive workers and the server by hand, without the event simulator:
// a hand-specified quadratic and a round-robin arrival order.

use orlomo::{
    lr_schedule, server_step, worker_local_run, Algorithm, HyperParams, LocalRule, ParamVector,
    ProblemSpec, RngStream, Schedule, ServerState, StreamPurpose,
};

pub fn run_example() -> orlomo::Result<()> {
    let problem = ProblemSpec::diagonal_quadratic(
        vec![1.0, 2.0, 4.0],
        ParamVector::from_vec(vec![1.0, -1.0, 0.5]),
        ParamVector::zeros(3),
        0.05,
    )?;
    let hp = HyperParams {
        workers: 2,
        local_steps: 4,
        iterations: 60,
        momentum: 0.8,
        local_lr: 0.02,
        schedule: Schedule::DelayPenalized,
    };
    hp.validate()?;
    let mut rngs: Vec<RngStream> = (0..2).map(|k| RngStream::new(1, k, StreamPurpose::Gradient)).collect();
    let mut state = ServerState::new(Algorithm::Orlomo, problem.initial_point.clone());
    // Each worker holds the parameter it was last sent and its dispatch index.
    let mut held = vec![(0usize, state.w.clone()); 2];
    for t in 0..hp.iterations {
        let k = t % 2;
        let (origin, w_k) = held[k].clone();
        let packet = worker_local_run(&hp, &problem, k, &w_k, origin, &mut rngs[k], LocalRule::Msgd)?;
        let eta = lr_schedule(&hp, t - origin);
        state = server_step(&hp, &state, &packet, eta)?;
        held[k] = (t + 1, state.w.clone());
    }
    let dist = state.w.sub(&problem.optimum).norm();
    println!("‖w_T − w*‖ = {dist:.3e}, F(w_T) = {:.3e}", problem.full_objective(&state.w)?);
    assert!(dist < 0.1);
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
