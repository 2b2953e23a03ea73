//! Dataset ingestion and hyperspectral cube synthesis.
//!
//! RGB images are loaded from an MVTec-AD style directory tree, resized,
//! lifted to a spectral cube by per-pixel spline interpolation over a
//! wavelength grid, min-max scaled per channel, and sampled into a pixel
//! table for the channel-ranking stage.

mod cache;
mod cube;
mod image;
mod mvtec;
mod planted;
mod sampling;
mod scaling;
mod spectral;

pub use cache::{decode_hsic, encode_hsic, read_hsic, write_hsic, HSIC_MAGIC, HSIC_VERSION};
pub use cube::{CubeView, FeatureCube, SpectralCube};
pub use image::{resize_bilinear, resize_mask, Mask, RgbImage};
pub use mvtec::{load_mvtec_class, move_anomalies_to_train, LabeledDataset, LabeledItem, Split};
pub use planted::{generate_planted, PlantedConfig, PlantedDataset};
pub use sampling::sample_pixels;
pub use scaling::{minmax_apply, minmax_fit, MinMaxStats};
pub use spectral::{synthesize_hsi, WavelengthGrid, DEFAULT_ANCHORS, DEFAULT_CHANNELS, DEFAULT_END_NM, DEFAULT_START_NM};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("directory not found: {0}")]
    MissingDirectory(PathBuf),
    #[error("cannot decode image {path}: {reason}")]
    Decode { path: PathBuf, reason: String },
    #[error("mask {path} is {got_h}x{got_w}, image is {want_h}x{want_w}")]
    MaskShape { path: PathBuf, want_h: usize, want_w: usize, got_h: usize, got_w: usize },
    #[error("no ground-truth mask for anomalous image {0}")]
    MissingMask(PathBuf),
    #[error("image dimensions must be positive, got {0}x{1}")]
    ZeroDimension(usize, usize),
    #[error("invalid wavelength grid: {0}")]
    InvalidGrid(String),
    #[error("cube has {got} channels, expected {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("buffer length {len} does not match shape {channels}x{height}x{width}")]
    ShapeMismatch { channels: usize, height: usize, width: usize, len: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("requested {requested} pixels from an image with only {available}")]
    PerImageTooLarge { requested: usize, available: usize },
    #[error("balanced sampling requested but no anomalous pixels are available")]
    NoAnomalousPixels,
    #[error("cubes do not share one wavelength grid")]
    GridMismatch,
    #[error("corrupt cube file: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
