//! Run traces and their on-disk forms.
//!
//! The trace container is compact JSON. Vectors are stored as base64 of their
//! little-endian IEEE-754 bytes so a reloaded trace is bit-identical.
//! Per-iteration scalars go to a CSV with header [`CSV_HEADER`].

use crate::config::SimConfig;
use crate::error::{Error, Result};
use crate::optimizers::{HyperParams, LocalPacket};
use crate::vector::ParamVector;
use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub const CSV_HEADER: &str = "t,sim_time,k_t,origin,tau,eta,loss,grad_norm_sq";
pub const TRACE_FORMAT: &str = "orlomo-trace";
const TRACE_VERSION: u32 = 1;

/// One server iteration (one synchronous round when `worker` is `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub worker: Option<usize>,
    pub origin: usize,
    pub tau: usize,
    pub eta: f64,
    /// Simulated seconds at which the packet arrived (round end when synchronous).
    pub sim_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispatchRecord {
    pub worker: usize,
    pub origin: usize,
    pub time: f64,
    pub due: f64,
}

/// A run still in flight at shutdown; never computed, never applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CancelledRun {
    pub worker: usize,
    pub origin: usize,
    pub dispatched_at: f64,
    pub due: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub t: usize,
    /// `F(w_t)`.
    pub loss: f64,
    /// `‖∇F(w_t)‖²`.
    pub grad_norm_sq: f64,
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub t: usize,
    pub sim_time: f64,
    pub k_t: Option<usize>,
    pub origin: usize,
    pub tau: usize,
    pub eta: f64,
    pub loss: f64,
    pub grad_norm_sq: f64,
}

/// Complete record of a run.
///
/// For asynchronous runs `packets[t]` is the packet applied at iteration `t`.
/// For synchronous runs round `r` owns `packets[r·K .. (r+1)·K]` in worker order.
/// `weights` and `momenta` hold `w_t`, `u_t` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub config: SimConfig,
    pub iterations: Vec<IterationRecord>,
    pub packets: Vec<LocalPacket>,
    pub weights: Vec<ParamVector>,
    pub momenta: Vec<ParamVector>,
    pub dispatches: Vec<DispatchRecord>,
    pub cancelled: Vec<CancelledRun>,
    pub diagnostics: Vec<Diagnostic>,
    pub diagnostics_every: usize,
    pub gradient_samples: u64,
    pub f_star: f64,
    pub final_loss: f64,
    pub final_grad_norm_sq: f64,
}

impl RunTrace {
    pub fn hyper_params(&self) -> Result<HyperParams> {
        self.config.hyper_params()
    }

    /// Number of recorded server iterations `T`.
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    /// Simulated time at which the last iteration completed.
    pub fn wall_clock(&self) -> f64 {
        self.iterations.last().map_or(0.0, |r| r.sim_time)
    }

    pub fn max_delay(&self) -> usize {
        self.iterations.iter().map(|r| r.tau).max().unwrap_or(0)
    }

    pub fn metrics_rows(&self) -> Vec<MetricsRow> {
        self.diagnostics
            .iter()
            .map(|d| {
                let it = &self.iterations[d.t];
                MetricsRow {
                    t: d.t,
                    sim_time: it.sim_time,
                    k_t: it.worker,
                    origin: it.origin,
                    tau: it.tau,
                    eta: it.eta,
                    loss: d.loss,
                    grad_norm_sq: d.grad_norm_sq,
                }
            })
            .collect()
    }

    pub fn metrics_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.diagnostics.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for r in self.metrics_rows() {
            let k = r.k_t.map(|k| k.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{:?},{},{},{},{:?},{:?},{:?}",
                r.t, r.sim_time, k, r.origin, r.tau, r.eta, r.loss, r.grad_norm_sq
            );
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TraceDocument::from_trace(self))
            .expect("trace serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<RunTrace> {
        let doc: TraceDocument =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("trace: {e}")))?;
        doc.into_trace()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.metrics_csv().as_bytes())
    }

    pub fn read_json(path: &Path) -> Result<RunTrace> {
        RunTrace::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Writes via a sibling temp file and rename so readers never see partial output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PacketDocument {
    worker: usize,
    origin: usize,
    delta_u: String,
    delta_w: String,
    delta_h: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceDocument {
    format: String,
    version: u32,
    config: SimConfig,
    dimension: usize,
    diagnostics_every: usize,
    gradient_samples: u64,
    f_star: f64,
    final_loss: f64,
    final_grad_norm_sq: f64,
    iterations: Vec<IterationRecord>,
    dispatches: Vec<DispatchRecord>,
    cancelled: Vec<CancelledRun>,
    diagnostics: Vec<Diagnostic>,
    packets: Vec<PacketDocument>,
    weights: Vec<String>,
    momenta: Vec<String>,
}

fn encode(v: &ParamVector) -> String {
    B64.encode(v.to_le_bytes())
}

fn decode(s: &str, dim: usize, what: &str) -> Result<ParamVector> {
    let bytes = B64
        .decode(s)
        .map_err(|e| Error::Parse(format!("{what}: bad base64: {e}")))?;
    let v = ParamVector::from_le_bytes(&bytes)
        .ok_or_else(|| Error::Parse(format!("{what}: byte length not a multiple of 8")))?;
    if v.len() != dim {
        return Err(Error::TraceCorruption(format!(
            "{what}: dimension {} does not match {dim}",
            v.len()
        )));
    }
    Ok(v)
}

impl TraceDocument {
    fn from_trace(t: &RunTrace) -> Self {
        TraceDocument {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            config: t.config.clone(),
            dimension: t.weights.first().map_or(0, |w| w.len()),
            diagnostics_every: t.diagnostics_every,
            gradient_samples: t.gradient_samples,
            f_star: t.f_star,
            final_loss: t.final_loss,
            final_grad_norm_sq: t.final_grad_norm_sq,
            iterations: t.iterations.clone(),
            dispatches: t.dispatches.clone(),
            cancelled: t.cancelled.clone(),
            diagnostics: t.diagnostics.clone(),
            packets: t
                .packets
                .iter()
                .map(|p| PacketDocument {
                    worker: p.worker,
                    origin: p.origin,
                    delta_u: encode(&p.delta_u),
                    delta_w: encode(&p.delta_w),
                    delta_h: encode(&p.delta_h),
                })
                .collect(),
            weights: t.weights.iter().map(encode).collect(),
            momenta: t.momenta.iter().map(encode).collect(),
        }
    }

    fn into_trace(self) -> Result<RunTrace> {
        if self.format != TRACE_FORMAT {
            return Err(Error::Parse(format!("unknown trace format `{}`", self.format)));
        }
        if self.version != TRACE_VERSION {
            return Err(Error::Parse(format!("unsupported trace version {}", self.version)));
        }
        let d = self.dimension;
        let packets = self
            .packets
            .into_iter()
            .enumerate()
            .map(|(i, p)| {
                Ok(LocalPacket {
                    worker: p.worker,
                    origin: p.origin,
                    delta_u: decode(&p.delta_u, d, &format!("packets[{i}].delta_u"))?,
                    delta_w: decode(&p.delta_w, d, &format!("packets[{i}].delta_w"))?,
                    delta_h: decode(&p.delta_h, d, &format!("packets[{i}].delta_h"))?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let weights = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, s)| decode(s, d, &format!("weights[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let momenta = self
            .momenta
            .iter()
            .enumerate()
            .map(|(i, s)| decode(s, d, &format!("momenta[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        let trace = RunTrace {
            config: self.config,
            iterations: self.iterations,
            packets,
            weights,
            momenta,
            dispatches: self.dispatches,
            cancelled: self.cancelled,
            diagnostics: self.diagnostics,
            diagnostics_every: self.diagnostics_every,
            gradient_samples: self.gradient_samples,
            f_star: self.f_star,
            final_loss: self.final_loss,
            final_grad_norm_sq: self.final_grad_norm_sq,
        };
        trace.check_shape()?;
        Ok(trace)
    }
}

impl RunTrace {
    /// Structural consistency of a (possibly reloaded) trace.
    pub fn check_shape(&self) -> Result<()> {
        let t = self.iterations.len();
        let per_iter = if self.config.algorithm.is_synchronous() {
            self.config.workers
        } else {
            1
        };
        if self.packets.len() != t * per_iter {
            return Err(Error::TraceCorruption(format!(
                "{} packets for {t} iterations",
                self.packets.len()
            )));
        }
        if self.weights.len() != t + 1 || self.momenta.len() != t + 1 {
            return Err(Error::TraceCorruption(format!(
                "expected {} state snapshots",
                t + 1
            )));
        }
        if let Some((i, r)) = self.iterations.iter().enumerate().find(|(i, r)| r.t != *i) {
            return Err(Error::TraceCorruption(format!(
                "iteration record {i} carries t = {}",
                r.t
            )));
        }
        if let Some(d) = self.diagnostics.iter().find(|d| d.t >= t) {
            return Err(Error::TraceCorruption(format!(
                "diagnostic at t = {} beyond {t} iterations",
                d.t
            )));
        }
        Ok(())
    }
}
