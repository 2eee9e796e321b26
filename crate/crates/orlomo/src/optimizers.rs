//! Worker-side local loops and server-side update rules.
//!
//! Everything here is a pure state transition: no scheduling, no clocks.
//! The simulator decides who arrives when and feeds packets through these.

use crate::error::{Error, Result};
use crate::problems::ProblemSpec;
use crate::rng::RngStream;
use crate::vector::ParamVector;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Ordered local momentum: MSGD workers, group-ordered momentum merge.
    Orlomo,
    /// Asynchronous local SGD.
    AlSgd,
    /// SGD workers with the ordered-momentum server rule applied to `Δw`.
    LocalOrmoDa,
    /// Synchronous parallel restarted SGD with momentum.
    Prsgdm,
}

impl Algorithm {
    pub fn local_rule(self) -> LocalRule {
        match self {
            Algorithm::Orlomo | Algorithm::Prsgdm => LocalRule::Msgd,
            Algorithm::AlSgd | Algorithm::LocalOrmoDa => LocalRule::Sgd,
        }
    }

    pub fn is_synchronous(self) -> bool {
        matches!(self, Algorithm::Prsgdm)
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Orlomo => "orlomo",
            Algorithm::AlSgd => "al-sgd",
            Algorithm::LocalOrmoDa => "local-ormo-da",
            Algorithm::Prsgdm => "prsgdm",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LocalRule {
    Msgd,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// `η = 1/K` while `τ ≤ 2K`, `1/τ` beyond.
    DelayPenalized,
    Constant { eta: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub workers: usize,
    pub local_steps: usize,
    pub iterations: usize,
    pub momentum: f64,
    pub local_lr: f64,
    pub schedule: Schedule,
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        if self.workers == 0 {
            return Err(Error::config("workers", "must be at least 1"));
        }
        if self.local_steps == 0 {
            return Err(Error::config("local_steps", "must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::config("iterations", "must be at least 1"));
        }
        if !(self.momentum >= 0.0 && self.momentum < 1.0) {
            return Err(Error::config("momentum", "must lie in [0, 1)"));
        }
        if !(self.local_lr.is_finite() && self.local_lr > 0.0) {
            return Err(Error::config("local_lr", "must be finite and > 0"));
        }
        if let Schedule::Constant { eta } = self.schedule {
            if !(eta.is_finite() && eta > 0.0) {
                return Err(Error::config("schedule.eta", "must be finite and > 0"));
            }
        }
        Ok(())
    }
}

/// Global learning rate for a packet with delay `tau`.
pub fn lr_schedule(hp: &HyperParams, tau: usize) -> f64 {
    match hp.schedule {
        Schedule::Constant { eta } => eta,
        Schedule::DelayPenalized => {
            if tau <= 2 * hp.workers {
                1.0 / hp.workers as f64
            } else {
                1.0 / tau as f64
            }
        }
    }
}

/// One worker→server message.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalPacket {
    pub worker: usize,
    /// Global iteration index of the parameter this run started from.
    pub origin: usize,
    /// Final local momentum (zero for SGD workers).
    pub delta_u: ParamVector,
    /// Local displacement `w̃_0 − w̃_S`.
    pub delta_w: ParamVector,
    /// `γ Σ_s g_s`. Not used by any server rule; carried for trace verification.
    pub delta_h: ParamVector,
}

impl LocalPacket {
    pub fn is_finite(&self) -> bool {
        self.delta_u.is_finite() && self.delta_w.is_finite() && self.delta_h.is_finite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub t: usize,
    pub w: ParamVector,
    pub u: ParamVector,
    pub algorithm: Algorithm,
}

impl ServerState {
    pub fn new(algorithm: Algorithm, w0: ParamVector) -> Self {
        let u = ParamVector::zeros(w0.len());
        ServerState {
            t: 0,
            w: w0,
            u,
            algorithm,
        }
    }
}

/// Per-worker mutable state while a local run is in progress.
#[derive(Debug, Clone)]
pub struct WorkerState {
    pub worker: usize,
    pub w: ParamVector,
    pub u: ParamVector,
    pub origin: usize,
    pub step: usize,
}

impl WorkerState {
    /// State on receipt of a dispatched parameter: `w̃ = w`, `ũ = 0`, `s = 0`.
    pub fn receive(worker: usize, w: ParamVector, origin: usize) -> Self {
        let u = ParamVector::zeros(w.len());
        WorkerState {
            worker,
            w,
            u,
            origin,
            step: 0,
        }
    }
}

/// Runs `S` local steps from `dispatched` and packages the result.
///
/// The displacement `Δw` is accumulated step by step rather than formed as
/// `w̃_0 − w̃_S`; the two agree in exact arithmetic and the accumulated form
/// keeps a single-step run bit-identical to one step of sequential MSGD.
pub fn worker_local_run(
    hp: &HyperParams,
    problem: &ProblemSpec,
    worker: usize,
    dispatched: &ParamVector,
    origin: usize,
    rng: &mut RngStream,
    rule: LocalRule,
) -> Result<LocalPacket> {
    let beta = hp.momentum;
    let gamma = hp.local_lr;
    let mut state = WorkerState::receive(worker, dispatched.clone(), origin);
    let d = dispatched.len();
    let mut delta_w = ParamVector::zeros(d);
    let mut grad_sum = ParamVector::zeros(d);

    while state.step < hp.local_steps {
        let g = problem.sample_gradient(&state.w, rng)?;
        if !g.is_finite() {
            return Err(Error::NumericFailure {
                iteration: origin,
                detail: format!(
                    "non-finite gradient on worker {worker}, local step {}",
                    state.step
                ),
            });
        }
        grad_sum.add_assign(&g);
        match rule {
            LocalRule::Msgd => {
                let u = state.u.as_mut_slice();
                for (ui, gi) in u.iter_mut().zip(g.iter()) {
                    // β = 0 reduces to plain SGD bit-for-bit, signed zeros included.
                    *ui = if beta == 0.0 { gamma * gi } else { beta * *ui + gamma * gi };
                }
                state.w.sub_assign(&state.u);
                delta_w.add_assign(&state.u);
            }
            LocalRule::Sgd => {
                let step = g.scaled(gamma);
                state.w.sub_assign(&step);
                delta_w.add_assign(&step);
            }
        }
        state.step += 1;
    }

    let delta_u = match rule {
        LocalRule::Msgd => state.u,
        LocalRule::Sgd => ParamVector::zeros(d),
    };
    Ok(LocalPacket {
        worker,
        origin,
        delta_u,
        delta_w,
        delta_h: grad_sum.scaled(gamma),
    })
}

/// `⌈t / K⌉`: the group a global iteration index belongs to.
pub fn group_of(t: usize, workers: usize) -> usize {
    t.div_ceil(workers)
}

/// True when `⌈t/K⌉ > ⌈(t−1)/K⌉`, i.e. `K | (t−1)`. False at `t = 0`.
pub fn opens_new_group(t: usize, workers: usize) -> bool {
    t >= 1 && (t - 1) % workers == 0
}

/// Group distance `p = ⌈t/K⌉ − ⌈origin/K⌉` between the current iteration and a packet.
pub fn group_lag(t: usize, origin: usize, workers: usize) -> usize {
    group_of(t, workers) - group_of(origin, workers)
}

/// `β^p` with `β⁰ = 1` (also for `β = 0`), by repeated squaring.
pub fn beta_pow(beta: f64, p: usize) -> f64 {
    let mut result = 1.0;
    let mut base = beta;
    let mut e = p;
    while e > 0 {
        if e & 1 == 1 {
            result *= base;
        }
        base *= base;
        e >>= 1;
    }
    result
}

/// `β + β² + … + β^p`, i.e. `β(1 − β^p)/(1 − β)`; zero when `β = 0` or `p = 0`.
pub fn compensation_coefficient(beta: f64, p: usize) -> f64 {
    if beta == 0.0 || p == 0 {
        return 0.0;
    }
    if p <= 64 {
        let mut sum = 0.0;
        let mut term = beta;
        for _ in 0..p {
            sum += term;
            term *= beta;
        }
        sum
    } else {
        beta * (1.0 - beta_pow(beta, p)) / (1.0 - beta)
    }
}

fn check_packet(state: &ServerState, packet: &LocalPacket, eta: f64) -> Result<()> {
    if packet.origin > state.t {
        return Err(Error::Protocol(format!(
            "packet from worker {} has origin {} ahead of server iteration {}",
            packet.worker, packet.origin, state.t
        )));
    }
    if !(eta.is_finite() && eta > 0.0) {
        return Err(Error::Protocol(format!("learning rate {eta} is not positive")));
    }
    let d = state.w.len();
    for v in [&packet.delta_u, &packet.delta_w, &packet.delta_h] {
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: v.len(),
            });
        }
    }
    Ok(())
}

/// Ordered-momentum server update shared by OrLoMo and local OrMo-DA.
///
/// With `b` the group-boundary indicator, this computes
/// `u' = b·βu + β^p·η·m` and `w' = w − (b·βu + η·Δw + c·η·m)`,
/// where `m` is the momentum payload and `c` the parameter coefficient on it.
fn ordered_step(
    hp: &HyperParams,
    state: &ServerState,
    momentum_payload: &ParamVector,
    displacement: &ParamVector,
    displacement_gain: f64,
    payload_coef: f64,
    momentum_gain: f64,
) -> ServerState {
    let beta = hp.momentum;
    let opens = opens_new_group(state.t, hp.workers);
    let d = state.w.len();
    let mut w = state.w.clone();
    let mut u = state.u.clone();
    for i in 0..d {
        let carried = if opens { beta * state.u[i] } else { state.u[i] };
        let mut step = displacement_gain * displacement[i];
        // With β = 0 the shift is identically zero; leaving it out keeps the
        // parameter path bit-identical to the plain asynchronous SGD rule.
        if opens && beta != 0.0 {
            step = carried + step;
        }
        if payload_coef != 0.0 {
            step += payload_coef * momentum_payload[i];
        }
        w.as_mut_slice()[i] -= step;
        u.as_mut_slice()[i] = carried + momentum_gain * momentum_payload[i];
    }
    ServerState {
        t: state.t + 1,
        w,
        u,
        algorithm: state.algorithm,
    }
}

pub fn server_step_orlomo(
    hp: &HyperParams,
    state: &ServerState,
    packet: &LocalPacket,
    eta: f64,
) -> Result<ServerState> {
    check_packet(state, packet, eta)?;
    let p = group_lag(state.t, packet.origin, hp.workers);
    let beta = hp.momentum;
    Ok(ordered_step(
        hp,
        state,
        &packet.delta_u,
        &packet.delta_w,
        eta,
        compensation_coefficient(beta, p) * eta,
        beta_pow(beta, p) * eta,
    ))
}

pub fn server_step_alsgd(
    hp: &HyperParams,
    state: &ServerState,
    packet: &LocalPacket,
    eta: f64,
) -> Result<ServerState> {
    let _ = hp;
    check_packet(state, packet, eta)?;
    let mut w = state.w.clone();
    for (wi, dw) in w.as_mut_slice().iter_mut().zip(packet.delta_w.iter()) {
        *wi -= eta * dw;
    }
    Ok(ServerState {
        t: state.t + 1,
        w,
        u: state.u.clone(),
        algorithm: state.algorithm,
    })
}

pub fn server_step_local_ormo_da(
    hp: &HyperParams,
    state: &ServerState,
    packet: &LocalPacket,
    eta: f64,
) -> Result<ServerState> {
    check_packet(state, packet, eta)?;
    let p = group_lag(state.t, packet.origin, hp.workers);
    let beta = hp.momentum;
    // (1 − β^{p+1}) / (1 − β) = 1 + β + … + β^p
    let gain = (1.0 + compensation_coefficient(beta, p)) * eta;
    Ok(ordered_step(
        hp,
        state,
        &packet.delta_w,
        &packet.delta_w,
        gain,
        0.0,
        beta_pow(beta, p) * eta,
    ))
}

/// Dispatches to the asynchronous server rule for `state.algorithm`.
pub fn server_step(
    hp: &HyperParams,
    state: &ServerState,
    packet: &LocalPacket,
    eta: f64,
) -> Result<ServerState> {
    match state.algorithm {
        Algorithm::Orlomo => server_step_orlomo(hp, state, packet, eta),
        Algorithm::AlSgd => server_step_alsgd(hp, state, packet, eta),
        Algorithm::LocalOrmoDa => server_step_local_ormo_da(hp, state, packet, eta),
        Algorithm::Prsgdm => Err(Error::Unsupported(
            "prsgdm is synchronous; use server_round_prsgdm".into(),
        )),
    }
}

/// One synchronous round: `w ← w − (η/K) Σ_k Δw_k`. Local momenta are not aggregated.
pub fn server_round_prsgdm(
    hp: &HyperParams,
    state: &ServerState,
    packets: &[LocalPacket],
    eta: f64,
) -> Result<ServerState> {
    if packets.len() != hp.workers {
        return Err(Error::Protocol(format!(
            "synchronous round expects {} packets, got {}",
            hp.workers,
            packets.len()
        )));
    }
    if let Some(p) = packets.iter().find(|p| p.origin != state.t) {
        return Err(Error::Protocol(format!(
            "packet from worker {} has origin {} in round {}",
            p.worker, p.origin, state.t
        )));
    }
    for p in packets {
        check_packet(state, p, eta)?;
    }
    let mut sum = packets[0].delta_w.clone();
    for p in &packets[1..] {
        sum.add_assign(&p.delta_w);
    }
    let scale = eta / hp.workers as f64;
    let mut w = state.w.clone();
    for (wi, s) in w.as_mut_slice().iter_mut().zip(sum.iter()) {
        *wi -= scale * s;
    }
    Ok(ServerState {
        t: state.t + 1,
        w,
        u: state.u.clone(),
        algorithm: state.algorithm,
    })
}

/// Sequential momentum SGD `u ← βu + γg`, `w ← w − u`, from `u = 0`.
/// Returns `w_0, …, w_steps`.
pub fn msgd_reference(
    hp: &HyperParams,
    problem: &ProblemSpec,
    w0: &ParamVector,
    rng: &mut RngStream,
    steps: usize,
) -> Result<Vec<ParamVector>> {
    let beta = hp.momentum;
    let gamma = hp.local_lr;
    let mut w = w0.clone();
    let mut u = ParamVector::zeros(w0.len());
    let mut out = Vec::with_capacity(steps + 1);
    out.push(w.clone());
    for step in 0..steps {
        let g = problem.sample_gradient(&w, rng)?;
        if !g.is_finite() {
            return Err(Error::NumericFailure {
                iteration: step,
                detail: "non-finite gradient in reference MSGD".into(),
            });
        }
        for i in 0..w.len() {
            let ui = beta * u[i] + gamma * g[i];
            u.as_mut_slice()[i] = ui;
            w.as_mut_slice()[i] -= ui;
        }
        out.push(w.clone());
    }
    Ok(out)
}
