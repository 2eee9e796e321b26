//! Post-hoc trace verification.
//!
//! Rebuilds the auxiliary sequences `û`, `ŵ`, `ŷ` from a finished OrLoMo
//! trace, where every packet is credited at its dispatch index with the
//! learning rate it later received (`η̂`), and checks their exact relations to
//! the recorded server iterates.
//!
//! Packets are keyed by `(origin, worker)`. Origin `0` has one packet per
//! worker; origin `t ≥ 1` has exactly one, sent to `k_{t−1}`. A packet that was
//! still in flight at shutdown has no `η̂`, so every index that would need it is
//! left out of the checkable range and counted as excluded.

use crate::error::{Error, Result};
use crate::optimizers::{beta_pow, compensation_coefficient, group_lag, opens_new_group, Algorithm, Schedule};
use crate::simulator::{delay_statistics, RunTrace};
use crate::vector::ParamVector;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

pub const IDENTITY_TOLERANCE: f64 = 1e-10;
pub const PACKET_TOLERANCE: f64 = 1e-12;

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub max_abs_dev: f64,
    pub max_rel_dev: f64,
    /// Inclusive index range that was checked, `None` when empty.
    pub checked_range: Option<(usize, usize)>,
    pub excluded: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// All checks for one trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub algorithm: Algorithm,
    pub workers: usize,
    pub local_steps: usize,
    pub momentum: f64,
    pub iterations: usize,
    pub checks: Vec<CheckReport>,
    /// η̂-weighted mean of `‖∇F(w_t)‖²`, present when every iterate was evaluated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weighted_gradient_metric: Option<f64>,
    pub pass: bool,
}

impl VerificationReport {
    pub fn check(&self, name: &str) -> Option<&CheckReport> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CheckReport> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization is infallible")
    }
}

/// Running maximum of absolute and relative deviations.
#[derive(Debug, Default)]
struct Deviation {
    abs: f64,
    rel: f64,
}

impl Deviation {
    /// Records `‖lhs − rhs‖_∞`, relative to the largest magnitude in `scale`.
    fn record(&mut self, lhs: &ParamVector, rhs: &ParamVector, scale: &[f64]) {
        let abs = lhs.sub(rhs).norm_inf();
        let denom = scale.iter().fold(0.0_f64, |m, &s| m.max(s));
        let rel = if abs == 0.0 {
            0.0
        } else if denom > 0.0 {
            abs / denom
        } else {
            f64::INFINITY
        };
        // NaN must fail, so compare with `!(x <= max)`.
        if !(abs <= self.abs) {
            self.abs = abs;
        }
        if !(rel <= self.rel) {
            self.rel = rel;
        }
    }

    fn report(self, name: &str, range: Option<(usize, usize)>, excluded: usize, tol: f64) -> CheckReport {
        CheckReport {
            name: name.into(),
            pass: self.rel <= tol,
            max_abs_dev: self.abs,
            max_rel_dev: self.rel,
            checked_range: range,
            excluded,
            tolerance: tol,
        }
    }
}

/// The auxiliary sequences and the bookkeeping they need.
#[derive(Debug, Clone)]
pub struct AuxSequences {
    pub workers: usize,
    pub iterations: usize,
    pub momentum: f64,
    /// `k_t` for `t < T`.
    pub arrivals: Vec<usize>,
    /// `next[t][k] = min{j ≥ t : k_j = k}`, `None` when worker `k` never arrives again.
    pub next: Vec<Vec<Option<usize>>>,
    /// Arrival iteration of packet `(origin, worker)`.
    pub packet_index: HashMap<(usize, usize), usize>,
    /// `m`: the smallest origin of a packet that never arrived (`T` if none).
    /// `û_t`, `ŵ_t`, `ŷ_t` are defined for `1 ≤ t ≤ m`.
    pub checkable: usize,
    /// `û_t` for `t = 1..=m` (index `t − 1`).
    pub u_hat: Vec<ParamVector>,
    pub w_hat: Vec<ParamVector>,
    pub y_hat: Vec<ParamVector>,
}

impl AuxSequences {
    /// `η̂_{t,k} = η_{next(t,k)}`.
    pub fn eta_hat(&self, trace: &RunTrace, t: usize, k: usize) -> Option<f64> {
        let j = (*self.next.get(t)?.get(k)?)?;
        Some(trace.iterations[j].eta)
    }

    pub fn u_hat_at(&self, t: usize) -> Option<&ParamVector> {
        t.checked_sub(1).and_then(|i| self.u_hat.get(i))
    }

    pub fn w_hat_at(&self, t: usize) -> Option<&ParamVector> {
        t.checked_sub(1).and_then(|i| self.w_hat.get(i))
    }

    pub fn y_hat_at(&self, t: usize) -> Option<&ParamVector> {
        t.checked_sub(1).and_then(|i| self.y_hat.get(i))
    }

    /// Iterations beyond the checkable range.
    pub fn excluded(&self) -> usize {
        self.iterations - self.checkable
    }

    /// Arrival iteration of packet `(origin, worker)`; errors if it is missing
    /// although its origin lies inside the checkable range.
    fn packet_at(&self, origin: usize, worker: usize) -> Result<usize> {
        self.packet_index.get(&(origin, worker)).copied().ok_or_else(|| {
            Error::TraceCorruption(format!("no packet for origin {origin}, worker {worker}"))
        })
    }

    /// Worker whose packet carries origin `t ≥ 1`.
    fn sender(&self, origin: usize) -> usize {
        self.arrivals[origin - 1]
    }
}

fn require_orlomo(trace: &RunTrace) -> Result<()> {
    if trace.config.algorithm != Algorithm::Orlomo {
        return Err(Error::Unsupported(format!(
            "trace verification needs an orlomo trace, got {}",
            trace.config.algorithm.name()
        )));
    }
    trace.check_shape()
}

fn arrival_workers(trace: &RunTrace) -> Result<Vec<usize>> {
    let k = trace.config.workers;
    trace
        .iterations
        .iter()
        .map(|r| match r.worker {
            Some(w) if w < k => Ok(w),
            Some(w) => Err(Error::TraceCorruption(format!(
                "iteration {} names worker {w} of {k}",
                r.t
            ))),
            None => Err(Error::TraceCorruption(format!(
                "iteration {} has no arriving worker",
                r.t
            ))),
        })
        .collect()
}

/// Replays the trace and builds `û`, `ŵ`, `ŷ` by their defining recurrences.
pub fn build_aux_sequences(trace: &RunTrace) -> Result<AuxSequences> {
    require_orlomo(trace)?;
    let k_workers = trace.config.workers;
    let total = trace.iterations.len();
    let beta = trace.config.momentum;
    let arrivals = arrival_workers(trace)?;

    let mut packet_index = HashMap::with_capacity(total);
    for (j, (rec, packet)) in trace.iterations.iter().zip(&trace.packets).enumerate() {
        if packet.origin != rec.origin || packet.worker != arrivals[j] {
            return Err(Error::TraceCorruption(format!(
                "packet {j} disagrees with its iteration record"
            )));
        }
        if rec.origin > j || rec.tau != j - rec.origin {
            return Err(Error::TraceCorruption(format!("iteration {j} has inconsistent delay")));
        }
        if rec.origin >= 1 && arrivals[rec.origin - 1] != packet.worker {
            return Err(Error::TraceCorruption(format!(
                "packet {j} claims origin {} but that parameter went to worker {}",
                rec.origin,
                arrivals[rec.origin - 1]
            )));
        }
        if packet_index.insert((rec.origin, packet.worker), j).is_some() {
            return Err(Error::TraceCorruption(format!(
                "duplicate packet for origin {}, worker {}",
                rec.origin, packet.worker
            )));
        }
    }

    let mut next = vec![vec![None; k_workers]; total];
    let mut upcoming: Vec<Option<usize>> = vec![None; k_workers];
    for t in (0..total).rev() {
        upcoming[arrivals[t]] = Some(t);
        next[t].clone_from(&upcoming);
    }

    // Every packet with origin < m arrived; origin m (if m < T) did not.
    let mut checkable = total;
    for k in 0..k_workers {
        if !packet_index.contains_key(&(0, k)) {
            checkable = 0;
        }
    }
    for origin in 1..checkable {
        if !packet_index.contains_key(&(origin, arrivals[origin - 1])) {
            checkable = origin;
            break;
        }
    }

    let mut aux = AuxSequences {
        workers: k_workers,
        iterations: total,
        momentum: beta,
        arrivals,
        next,
        packet_index,
        checkable,
        u_hat: Vec::with_capacity(checkable),
        w_hat: Vec::with_capacity(checkable),
        y_hat: Vec::with_capacity(checkable),
    };
    if checkable == 0 {
        return Ok(aux);
    }

    let d = trace.weights[0].len();
    let inv = 1.0 / (1.0 - beta);
    let w0 = &trace.weights[0];
    let mut u = ParamVector::zeros(d);
    let mut w = w0.clone();
    let mut h = ParamVector::zeros(d);
    for k in 0..k_workers {
        let p = &trace.packets[aux.packet_at(0, k)?];
        let eta = aux.eta_hat(trace, 0, k).expect("origin-0 packet arrived");
        u.add_scaled(eta, &p.delta_u);
        w.add_scaled(-eta, &p.delta_w);
        h.add_scaled(eta, &p.delta_h);
    }
    let mut y = w0.clone();
    y.add_scaled(-inv, &h);
    aux.u_hat.push(u);
    aux.w_hat.push(w);
    aux.y_hat.push(y);

    for t in 1..checkable {
        let sender = aux.sender(t);
        let p = &trace.packets[aux.packet_at(t, sender)?];
        let eta = aux.eta_hat(trace, t, sender).expect("packet arrived");
        let shift = opens_new_group(t, k_workers) && beta != 0.0;
        let mut u = aux.u_hat[t - 1].clone();
        if opens_new_group(t, k_workers) {
            u.scale(beta);
        }
        let mut w = aux.w_hat[t - 1].clone();
        for i in 0..d {
            let step = eta * p.delta_w[i];
            w.as_mut_slice()[i] -= if shift { u[i] + step } else { step };
        }
        u.add_scaled(eta, &p.delta_u);
        let mut y = aux.y_hat[t - 1].clone();
        y.add_scaled(-eta * inv, &p.delta_h);
        aux.u_hat.push(u);
        aux.w_hat.push(w);
        aux.y_hat.push(y);
    }
    Ok(aux)
}

/// Pending dispatch index per worker, `ite(t, k)`, advanced one iteration at a time.
struct IteTracker {
    ite: Vec<usize>,
}

impl IteTracker {
    fn new(workers: usize) -> Self {
        IteTracker {
            ite: vec![0; workers],
        }
    }

    /// Moves from `ite(t, ·)` to `ite(t + 1, ·)` given `k_t`.
    fn advance(&mut self, t: usize, arriving: usize) {
        self.ite[arriving] = t + 1;
    }
}

/// Right-hand sides of the `u` and `w` gap identities at iteration `t`.
fn gap_terms(
    trace: &RunTrace,
    aux: &AuxSequences,
    ite: &IteTracker,
    t: usize,
) -> Result<(ParamVector, ParamVector)> {
    let d = trace.weights[0].len();
    let beta = aux.momentum;
    let mut du = ParamVector::zeros(d);
    let mut dw = ParamVector::zeros(d);
    for k in 0..aux.workers {
        if k == aux.arrivals[t] {
            continue;
        }
        let origin = ite.ite[k];
        let p = &trace.packets[aux.packet_at(origin, k)?];
        let eta = aux
            .eta_hat(trace, origin, k)
            .ok_or_else(|| Error::TraceCorruption(format!("no η̂ for origin {origin}, worker {k}")))?;
        let lag = group_lag(t, origin, aux.workers);
        du.add_scaled(beta_pow(beta, lag) * eta, &p.delta_u);
        dw.add_scaled(-eta, &p.delta_w);
        dw.add_scaled(-compensation_coefficient(beta, lag) * eta, &p.delta_u);
    }
    Ok((du, dw))
}

fn range(lo: usize, hi_exclusive: usize) -> Option<(usize, usize)> {
    (hi_exclusive > lo).then(|| (lo, hi_exclusive - 1))
}

/// `û_{t+1} − u_{t+1} = Σ_{k≠k_t} β^{⌈t/K⌉−⌈ite(t,k)/K⌉} η̂_{ite(t,k),k} Δu^k_{ite(t,k)}`
/// for `0 ≤ t < m`.
pub fn check_lemma1(trace: &RunTrace, aux: &AuxSequences) -> Result<CheckReport> {
    let mut dev = Deviation::default();
    let mut ite = IteTracker::new(aux.workers);
    for t in 0..aux.checkable {
        let (rhs, _) = gap_terms(trace, aux, &ite, t)?;
        let u_hat = &aux.u_hat[t];
        let u = &trace.momenta[t + 1];
        dev.record(&u_hat.sub(u), &rhs, &[u_hat.norm_inf(), u.norm_inf(), rhs.norm_inf()]);
        ite.advance(t, aux.arrivals[t]);
    }
    Ok(dev.report("lemma1_momentum_gap", range(0, aux.checkable), aux.excluded(), IDENTITY_TOLERANCE))
}

/// `ŵ_{t+1} − w_{t+1} = −Σ_{k≠k_t} [η̂ Δw^k + β(1−β^p)/(1−β) η̂ Δu^k]` for `0 ≤ t < m`.
pub fn check_lemma2(trace: &RunTrace, aux: &AuxSequences) -> Result<CheckReport> {
    let mut dev = Deviation::default();
    let mut ite = IteTracker::new(aux.workers);
    for t in 0..aux.checkable {
        let (_, rhs) = gap_terms(trace, aux, &ite, t)?;
        let w_hat = &aux.w_hat[t];
        let w = &trace.weights[t + 1];
        dev.record(&w_hat.sub(w), &rhs, &[w_hat.norm_inf(), w.norm_inf(), rhs.norm_inf()]);
        ite.advance(t, aux.arrivals[t]);
    }
    Ok(dev.report("lemma2_parameter_gap", range(0, aux.checkable), aux.excluded(), IDENTITY_TOLERANCE))
}

/// `ŷ_t − ŵ_t = −β/(1−β) û_t` for `1 ≤ t ≤ m`.
pub fn check_lemma3(trace: &RunTrace, aux: &AuxSequences) -> Result<CheckReport> {
    require_orlomo(trace)?;
    let beta = aux.momentum;
    let mut dev = Deviation::default();
    for i in 0..aux.checkable {
        let (y, w, u) = (&aux.y_hat[i], &aux.w_hat[i], &aux.u_hat[i]);
        let rhs = u.scaled(-beta / (1.0 - beta));
        dev.record(&y.sub(w), &rhs, &[y.norm_inf(), w.norm_inf(), rhs.norm_inf()]);
    }
    Ok(dev.report("lemma3_auxiliary_gap", range(1, aux.checkable + 1), aux.excluded(), IDENTITY_TOLERANCE))
}

/// Rebuilds each `u_{t+1}` as `Σ_{j≤t} β^{⌈t/K⌉−⌈origin_j/K⌉} η_j Δu_j` over the
/// packets received so far, summed per origin group.
pub fn check_momentum_decomposition(trace: &RunTrace) -> Result<CheckReport> {
    require_orlomo(trace)?;
    let k_workers = trace.config.workers;
    let beta = trace.config.momentum;
    let total = trace.iterations.len();
    let d = trace.weights[0].len();
    let mut groups: Vec<ParamVector> = Vec::new();
    let mut dev = Deviation::default();
    for t in 0..total {
        let rec = &trace.iterations[t];
        let g = rec.origin.div_ceil(k_workers);
        if groups.len() <= g {
            groups.resize(g + 1, ParamVector::zeros(d));
        }
        groups[g].add_scaled(rec.eta, &trace.packets[t].delta_u);
        let current = t.div_ceil(k_workers);
        let mut rebuilt = ParamVector::zeros(d);
        for (gi, sum) in groups.iter().enumerate() {
            rebuilt.add_scaled(beta_pow(beta, current - gi), sum);
        }
        let u = &trace.momenta[t + 1];
        dev.record(u, &rebuilt, &[u.norm_inf(), rebuilt.norm_inf()]);
    }
    Ok(dev.report("momentum_decomposition", range(0, total), 0, IDENTITY_TOLERANCE))
}

/// `‖Δh/(1−β) − βΔu/(1−β) − Δw‖ ≤ 1e-12·(1 + ‖Δh‖)` for every packet.
pub fn check_packet_identity(trace: &RunTrace) -> Result<CheckReport> {
    require_orlomo(trace)?;
    let beta = trace.config.momentum;
    let inv = 1.0 / (1.0 - beta);
    let mut abs_max = 0.0_f64;
    let mut rel_max = 0.0_f64;
    for p in &trace.packets {
        let mut r = p.delta_h.scaled(inv);
        r.add_scaled(-beta * inv, &p.delta_u);
        r.sub_assign(&p.delta_w);
        let abs = r.norm();
        let rel = abs / (1.0 + p.delta_h.norm());
        if !(abs <= abs_max) {
            abs_max = abs;
        }
        if !(rel <= rel_max) {
            rel_max = rel;
        }
    }
    Ok(CheckReport {
        name: "packet_identity".into(),
        max_abs_dev: abs_max,
        max_rel_dev: rel_max,
        checked_range: range(0, trace.packets.len()),
        excluded: 0,
        tolerance: PACKET_TOLERANCE,
        pass: rel_max <= PACKET_TOLERANCE,
    })
}

/// Integer delay-accounting checks; the learning-rate bound only applies to the
/// delay-penalized schedule.
pub fn check_delay_accounting(trace: &RunTrace) -> Vec<CheckReport> {
    let stats = delay_statistics(trace);
    let t_range = range(0, stats.iterations);
    let exact = |name: &str, slack: i128, pass: bool| CheckReport {
        name: name.into(),
        max_abs_dev: slack.max(0) as f64,
        max_rel_dev: if pass { 0.0 } else { 1.0 },
        checked_range: t_range,
        excluded: 0,
        tolerance: 0.0,
        pass,
    };
    let mut out = vec![
        exact(
            "delay_sum_bound",
            stats.delay_sum as i128 - stats.delay_sum_bound as i128,
            stats.delay_sum_holds(),
        ),
        exact(
            "staleness_identity",
            (stats.delay_sum as i128 + stats.outstanding_staleness as i128
                - stats.delay_sum_bound as i128)
                .abs(),
            stats.staleness_identity_holds(),
        ),
    ];
    if trace.config.schedule == Schedule::DelayPenalized && !trace.config.algorithm.is_synchronous() {
        out.push(exact(
            "eta_sum_bound",
            stats.iterations as i128 - 2 * stats.unpenalized_count as i128,
            stats.eta_sum_holds(),
        ));
    }
    out
}

/// Weight of iterate `w_t` in the averaged gradient metric:
/// `Σ_k η̂_{0,k}` at `t = 0`, `η̂_{t,k_{t−1}}` after.
fn metric_weight(trace: &RunTrace, aux: &AuxSequences, t: usize) -> f64 {
    if t == 0 {
        (0..aux.workers)
            .map(|k| aux.eta_hat(trace, 0, k).expect("checkable origin"))
            .sum()
    } else {
        aux.eta_hat(trace, t, aux.sender(t)).expect("checkable origin")
    }
}

/// η̂-weighted mean of `‖∇F(w_t)‖²` over `0 ≤ t < horizon`, truncated to the
/// checkable range. Needs a diagnostic at every iterate.
pub fn weighted_gradient_metric_until(trace: &RunTrace, aux: &AuxSequences, horizon: usize) -> Result<f64> {
    if trace.diagnostics_every != 1 || trace.diagnostics.len() != trace.iterations.len() {
        return Err(Error::InsufficientDiagnostics(format!(
            "need ‖∇F(w_t)‖² at every iterate, trace evaluated every {}",
            trace.diagnostics_every
        )));
    }
    let end = horizon.min(aux.checkable);
    if end == 0 {
        return Err(Error::InsufficientDiagnostics("no iterate has a defined weight".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for t in 0..end {
        let weight = metric_weight(trace, aux, t);
        num += weight * trace.diagnostics[t].grad_norm_sq;
        den += weight;
    }
    Ok(num / den)
}

/// The averaged gradient metric over the whole (checkable) run.
pub fn weighted_gradient_metric(trace: &RunTrace, aux: &AuxSequences) -> Result<f64> {
    weighted_gradient_metric_until(trace, aux, trace.iterations.len())
}

/// Runs every identity and delay check on an OrLoMo trace.
pub fn verify_trace(trace: &RunTrace) -> Result<VerificationReport> {
    let aux = build_aux_sequences(trace)?;
    let mut checks = vec![
        check_lemma1(trace, &aux)?,
        check_lemma2(trace, &aux)?,
        check_lemma3(trace, &aux)?,
        check_momentum_decomposition(trace)?,
        check_packet_identity(trace)?,
    ];
    checks.extend(check_delay_accounting(trace));
    let metric = weighted_gradient_metric(trace, &aux).ok();
    let pass = checks.iter().all(|c| c.pass);
    Ok(VerificationReport {
        algorithm: trace.config.algorithm,
        workers: trace.config.workers,
        local_steps: trace.config.local_steps,
        momentum: trace.config.momentum,
        iterations: trace.iterations.len(),
        checks,
        weighted_gradient_metric: metric,
        pass,
    })
}
