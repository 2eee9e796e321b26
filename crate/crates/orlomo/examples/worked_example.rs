// The server rule on its own: three workers, a fixed arrival pattern, and
// one-hot momentum payloads so every coordinate of `u` shows the weight its
// packet ends up with.

use orlomo::optimizers::{group_lag, opens_new_group};
use orlomo::{server_step, Algorithm, HyperParams, LocalPacket, ParamVector, Schedule, ServerState};

pub fn run_example() -> orlomo::Result<()> {
    let beta: f64 = 0.9;
    let hp = HyperParams {
        workers: 3,
        local_steps: 1,
        iterations: 9,
        momentum: beta,
        local_lr: 0.1,
        schedule: Schedule::Constant { eta: 1.0 },
    };
    let origins = [0, 0, 0, 2, 3, 5, 4, 7, 1];
    let workers = [0, 2, 1, 2, 1, 1, 2, 2, 0];
    let mut state = ServerState::new(Algorithm::Orlomo, ParamVector::zeros(9));
    for t in 0..9 {
        let mut e = ParamVector::zeros(9);
        e.as_mut_slice()[t] = 1.0;
        let packet = LocalPacket {
            worker: workers[t],
            origin: origins[t],
            delta_u: e.clone(),
            delta_w: ParamVector::zeros(9),
            delta_h: e.scaled(beta),
        };
        println!(
            "t={t} worker {} origin {} group lag {}{}",
            workers[t],
            origins[t],
            group_lag(t, origins[t], 3),
            if opens_new_group(t, 3) { "  (new group: u ← βu)" } else { "" }
        );
        state = server_step(&hp, &state, &packet, 1.0)?;
    }
    println!("u_9 by origin:");
    for t in 0..9 {
        let exponent = (state.u[t].ln() / beta.ln()).round() as i64;
        println!("  origin {} -> {:.4} = β^{exponent}", origins[t], state.u[t]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> orlomo::Result<()> {
    run_example()
}
