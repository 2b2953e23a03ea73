//! Hyperspectral channel reduction and anomaly scoring.
//!
//! The crate covers the full experiment loop: synthesise spectral cubes
//! from RGB images ([`datacube`]), rank or project channels
//! ([`reduction`]), train a small convolutional anomaly scorer
//! ([`scorer`]), measure AUROC ([`evalmetrics`]) and inference latency
//! ([`bench`]).

pub mod bench;
pub mod datacube;
pub mod evalmetrics;
pub mod numeric;
pub mod reduction;
pub mod scorer;
