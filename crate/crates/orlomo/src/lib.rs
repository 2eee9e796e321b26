//! Asynchronous local momentum SGD: a deterministic event-driven simulator
//! plus the server/worker update rules it drives.
//!
//! ```no_run
//! use orlomo::{run, SimConfig};
//! let cfg = SimConfig::from_path("run.json".as_ref())?;
//! let trace = run(&cfg)?;
//! println!("final loss {}", trace.final_loss);
//! # Ok::<(), orlomo::Error>(())
//! ```

pub mod cli;
pub mod config;
pub mod error;
pub mod optimizers;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod simulator;
pub mod vector;

pub use config::{derive_cell_seed, CellCoords, Scenario, SimConfig, SweepConfig, SEED_ENV};
pub use error::{Error, Result};
pub use optimizers::{
    lr_schedule, server_round_prsgdm, server_step, worker_local_run, Algorithm, HyperParams,
    LocalPacket, LocalRule, Schedule, ServerState,
};
pub use oracle::{verify_trace, VerificationReport};
pub use problems::{ProblemConfig, ProblemSpec};
pub use rng::{RngStream, StreamPurpose};
pub use simulator::{delay_statistics, run, run_simulation, run_synchronous, RunTrace};
pub use vector::ParamVector;
