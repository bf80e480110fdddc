//! Experiment runner for the `kinetic-swarm` library: parses a run
//! configuration, dispatches to the library, and writes data files plus a
//! manifest into the output directory.

pub mod config;
pub mod error;
pub mod manifest;
pub mod run;

pub use config::{parse_config, Mode, RunConfig};
pub use error::CliError;
pub use manifest::{config_hash, RunManifest};
pub use run::run;
