//! Byzantine-robust distributed source coding.
//!
//! The crate computes the minimum variable-rate sum rate achievable when up
//! to `t` of `m` sensors may be traitors, checks membership in the
//! fixed-rate achievable regions, and simulates the multiround
//! variable-rate protocol against several adversary strategies.

pub mod commands;
pub mod error;
pub mod info;
pub mod maxent;
pub mod regions;
pub mod sim;
pub mod typicality;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};
pub use info::{JointPmf, SensorSet, SequenceBlock};

/// Version tag carried by every file format this crate reads or writes.
pub const SCHEMA_VERSION: u32 = 1;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
