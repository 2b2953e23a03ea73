//! Driver for the channel-reduction anomaly detection experiments: dataset
//! synthesis, channel ranking, scorer training, evaluation and latency
//! benchmarking, with every artifact on disk and every random draw derived
//! from one seed.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod plot;
pub mod stages;

pub use commands::{run, Command};
pub use config::{Method, Overrides, RunConfig};
pub use error::CliError;
