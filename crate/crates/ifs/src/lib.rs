//! Scenario files, reports and commands for the `ifs` binary.
//!
//! Scenarios are TOML, reports are JSON with sorted keys, point clouds are
//! CSV with Cartesian coordinates. Outputs are byte-deterministic for a
//! given scenario file and arguments, independent of the thread count.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod par;

pub use error::CliError;
