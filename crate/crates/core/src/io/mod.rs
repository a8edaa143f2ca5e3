//! Configuration, snapshots and result files.

mod config;
mod snapshot;
mod write;

pub use config::{Format, RunConfig};
pub use snapshot::{Snapshot, SNAPSHOT_VERSION};
pub use write::{
    atomic_write, dispersion_csv, k_history_csv, profiles_csv, round_sig, trace_csv, write_json,
};
