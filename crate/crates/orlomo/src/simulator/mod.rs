//! Deterministic discrete-event simulation of one server and `K` workers.

mod queue;
mod stats;
mod timing;
mod trace;

pub use queue::{Event, EventQueue};
pub use stats::{delay_statistics, DelayStatistics};
pub use timing::{TimingKind, TimingModel};
pub use trace::{
    CancelledRun, Diagnostic, DispatchRecord, IterationRecord, MetricsRow, RunTrace,
    CSV_HEADER, TRACE_FORMAT,
};
pub use trace::write_atomic;

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::optimizers::{
    lr_schedule, server_round_prsgdm, server_step, worker_local_run, HyperParams, Schedule,
    ServerState,
};
use crate::problems::ProblemSpec;
use crate::rng::{RngStream, StreamPurpose};
use crate::vector::ParamVector;

/// Runs the configured algorithm, asynchronous or synchronous.
pub fn run(config: &SimConfig) -> Result<RunTrace> {
    if config.algorithm.is_synchronous() {
        run_synchronous(config)
    } else {
        run_simulation(config)
    }
}

struct Pending {
    origin: usize,
    w: ParamVector,
    dispatched_at: f64,
    due: f64,
}

struct Recorder {
    problem: ProblemSpec,
    cadence: usize,
    diagnostics: Vec<Diagnostic>,
}

impl Recorder {
    fn observe(&mut self, t: usize, w: &ParamVector) -> Result<()> {
        if t % self.cadence == 0 {
            let loss = self.problem.full_objective(w)?;
            let grad_norm_sq = self.problem.full_gradient(w)?.norm_sq();
            self.diagnostics.push(Diagnostic {
                t,
                loss,
                grad_norm_sq,
            });
        }
        Ok(())
    }
}

fn check_state(state: &ServerState, iteration: usize) -> Result<()> {
    if !(state.w.is_finite() && state.u.is_finite()) {
        return Err(Error::NumericFailure {
            iteration,
            detail: "server state became non-finite".into(),
        });
    }
    Ok(())
}

/// Asynchronous parameter-server run (OrLoMo, AL-SGD, local OrMo-DA).
///
/// All workers receive `w_0` at time 0. Arrivals are served in
/// `(timestamp, worker)` order; after iteration `t` the server immediately
/// re-dispatches `w_{t+1}` to the arriving worker, except after the final
/// iteration. Runs still in flight at shutdown are recorded as cancelled.
pub fn run_simulation(config: &SimConfig) -> Result<RunTrace> {
    config.validate()?;
    if config.algorithm.is_synchronous() {
        return Err(Error::Unsupported(format!(
            "{} is synchronous; use run_synchronous",
            config.algorithm.name()
        )));
    }
    let hp = config.hyper_params()?;
    let k_workers = hp.workers;
    let total = hp.iterations;
    let problem = ProblemSpec::build(&config.problem, config.seed)?;
    let rule = config.algorithm.local_rule();

    let mut grad_rngs: Vec<RngStream> = (0..k_workers)
        .map(|k| RngStream::new(config.seed, k as u32, StreamPurpose::Gradient))
        .collect();
    let mut timing_rngs: Vec<RngStream> = (0..k_workers)
        .map(|k| RngStream::new(config.seed, k as u32, StreamPurpose::Timing))
        .collect();

    let mut state = ServerState::new(config.algorithm, problem.initial_point.clone());
    let mut queue = EventQueue::new();
    let mut pending: Vec<Option<Pending>> = (0..k_workers).map(|_| None).collect();
    let mut dispatches = Vec::with_capacity(total + k_workers);

    let mut dispatch = |worker: usize,
                        origin: usize,
                        w: ParamVector,
                        now: f64,
                        queue: &mut EventQueue,
                        pending: &mut Vec<Option<Pending>>| {
        let due = now
            + config
                .timing
                .run_duration(worker, k_workers, hp.local_steps, &mut timing_rngs[worker]);
        dispatches.push(DispatchRecord {
            worker,
            origin,
            time: now,
            due,
        });
        queue.push(Event {
            timestamp: due,
            worker,
        });
        pending[worker] = Some(Pending {
            origin,
            w,
            dispatched_at: now,
            due,
        });
    };

    for k in 0..k_workers {
        dispatch(k, 0, state.w.clone(), 0.0, &mut queue, &mut pending);
    }

    let mut recorder = Recorder {
        problem: problem.clone(),
        cadence: config.diagnostics_cadence(),
        diagnostics: Vec::new(),
    };
    let mut iterations = Vec::with_capacity(total);
    let mut packets = Vec::with_capacity(total);
    let mut weights = Vec::with_capacity(total + 1);
    let mut momenta = Vec::with_capacity(total + 1);
    weights.push(state.w.clone());
    momenta.push(state.u.clone());
    let mut gradient_samples = 0u64;

    for t in 0..total {
        let event = queue.pop().ok_or_else(|| {
            Error::config("workers", "event queue exhausted before the final iteration")
        })?;
        let worker = event.worker;
        let job = pending[worker]
            .take()
            .ok_or_else(|| Error::Protocol(format!("arrival from idle worker {worker}")))?;
        recorder.observe(t, &state.w)?;

        let packet = worker_local_run(
            &hp,
            &problem,
            worker,
            &job.w,
            job.origin,
            &mut grad_rngs[worker],
            rule,
        )
        .map_err(|e| match e {
            Error::NumericFailure { detail, .. } => Error::NumericFailure {
                iteration: t,
                detail,
            },
            other => other,
        })?;
        gradient_samples += hp.local_steps as u64;
        if !packet.is_finite() {
            return Err(Error::NumericFailure {
                iteration: t,
                detail: format!("non-finite packet from worker {worker}"),
            });
        }

        let tau = t - job.origin;
        let eta = lr_schedule(&hp, tau);
        state = server_step(&hp, &state, &packet, eta)?;
        check_state(&state, t)?;

        iterations.push(IterationRecord {
            t,
            worker: Some(worker),
            origin: job.origin,
            tau,
            eta,
            sim_time: event.timestamp,
        });
        packets.push(packet);
        weights.push(state.w.clone());
        momenta.push(state.u.clone());

        if t + 1 < total {
            dispatch(
                worker,
                t + 1,
                state.w.clone(),
                event.timestamp,
                &mut queue,
                &mut pending,
            );
        }
    }

    let cancelled = queue
        .drain_ordered()
        .into_iter()
        .map(|e| {
            let job = pending[e.worker].take().expect("queued worker has a pending run");
            CancelledRun {
                worker: e.worker,
                origin: job.origin,
                dispatched_at: job.dispatched_at,
                due: job.due,
            }
        })
        .collect();

    finish(
        config,
        &problem,
        recorder,
        TraceParts {
            iterations,
            packets,
            weights,
            momenta,
            dispatches,
            cancelled,
            gradient_samples,
        },
        &state,
    )
}

struct TraceParts {
    iterations: Vec<IterationRecord>,
    packets: Vec<crate::optimizers::LocalPacket>,
    weights: Vec<ParamVector>,
    momenta: Vec<ParamVector>,
    dispatches: Vec<DispatchRecord>,
    cancelled: Vec<CancelledRun>,
    gradient_samples: u64,
}

fn finish(
    config: &SimConfig,
    problem: &ProblemSpec,
    recorder: Recorder,
    parts: TraceParts,
    state: &ServerState,
) -> Result<RunTrace> {
    let final_loss = problem.full_objective(&state.w)?;
    let final_grad_norm_sq = problem.full_gradient(&state.w)?.norm_sq();
    Ok(RunTrace {
        config: config.clone(),
        iterations: parts.iterations,
        packets: parts.packets,
        weights: parts.weights,
        momenta: parts.momenta,
        dispatches: parts.dispatches,
        cancelled: parts.cancelled,
        diagnostics_every: recorder.cadence,
        diagnostics: recorder.diagnostics,
        gradient_samples: parts.gradient_samples,
        f_star: problem.f_star,
        final_loss,
        final_grad_norm_sq,
    })
}

/// Server step size for a synchronous round.
///
/// Rounds have no staleness, so the delay-penalized schedule degenerates to a
/// plain average (`η = 1`, applied as `η/K` per packet); a constant schedule
/// uses its `η̄`.
pub fn synchronous_eta(hp: &HyperParams) -> f64 {
    match hp.schedule {
        Schedule::DelayPenalized => 1.0,
        Schedule::Constant { eta } => eta,
    }
}

/// Synchronous PRSGDm run: every round waits for all `K` workers.
pub fn run_synchronous(config: &SimConfig) -> Result<RunTrace> {
    config.validate()?;
    if !config.algorithm.is_synchronous() {
        return Err(Error::Unsupported(format!(
            "{} is asynchronous; use run_simulation",
            config.algorithm.name()
        )));
    }
    let hp = config.hyper_params()?;
    let k_workers = hp.workers;
    let rounds = hp.iterations;
    let problem = ProblemSpec::build(&config.problem, config.seed)?;
    let rule = config.algorithm.local_rule();
    let eta = synchronous_eta(&hp);

    let mut grad_rngs: Vec<RngStream> = (0..k_workers)
        .map(|k| RngStream::new(config.seed, k as u32, StreamPurpose::Gradient))
        .collect();
    let mut timing_rngs: Vec<RngStream> = (0..k_workers)
        .map(|k| RngStream::new(config.seed, k as u32, StreamPurpose::Timing))
        .collect();

    let mut state = ServerState::new(config.algorithm, problem.initial_point.clone());
    let mut recorder = Recorder {
        problem: problem.clone(),
        cadence: config.diagnostics_cadence(),
        diagnostics: Vec::new(),
    };
    let mut iterations = Vec::with_capacity(rounds);
    let mut packets = Vec::with_capacity(rounds * k_workers);
    let mut weights = vec![state.w.clone()];
    let mut momenta = vec![state.u.clone()];
    let mut dispatches = Vec::with_capacity(rounds * k_workers);
    let mut now = 0.0_f64;
    let mut gradient_samples = 0u64;

    for r in 0..rounds {
        recorder.observe(r, &state.w)?;
        let mut round_time = 0.0_f64;
        let mut round_packets = Vec::with_capacity(k_workers);
        for k in 0..k_workers {
            let duration =
                config
                    .timing
                    .run_duration(k, k_workers, hp.local_steps, &mut timing_rngs[k]);
            round_time = round_time.max(duration);
            dispatches.push(DispatchRecord {
                worker: k,
                origin: r,
                time: now,
                due: now + duration,
            });
            let packet =
                worker_local_run(&hp, &problem, k, &state.w, r, &mut grad_rngs[k], rule)
                    .map_err(|e| match e {
                        Error::NumericFailure { detail, .. } => Error::NumericFailure {
                            iteration: r,
                            detail,
                        },
                        other => other,
                    })?;
            gradient_samples += hp.local_steps as u64;
            round_packets.push(packet);
        }
        now += round_time;
        state = server_round_prsgdm(&hp, &state, &round_packets, eta)?;
        check_state(&state, r)?;
        iterations.push(IterationRecord {
            t: r,
            worker: None,
            origin: r,
            tau: 0,
            eta,
            sim_time: now,
        });
        packets.extend(round_packets);
        weights.push(state.w.clone());
        momenta.push(state.u.clone());
    }

    finish(
        config,
        &problem,
        recorder,
        TraceParts {
            iterations,
            packets,
            weights,
            momenta,
            dispatches,
            cancelled: Vec::new(),
            gradient_samples,
        },
        &state,
    )
}
