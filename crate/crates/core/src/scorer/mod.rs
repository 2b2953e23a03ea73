//! Convolutional anomaly scorer with hand-written forward and backward passes.
//!
//! Four 3x3 stride-2 convolutions with ReLU, global average pooling and a
//! single logit. Only the first layer depends on the input channel count,
//! so a reduced cube pays proportionally less for that layer and the same
//! fixed cost downstream.
//!
//! The network is generic over [`Real`]; production code uses `f32`, the
//! gradient checks run the same code in `f64`.

mod adam;
mod net;
mod train;
mod weights;

pub use adam::{adam_step, AdamState};
pub use net::{cross_entropy, init_model, Gradients, Real, ScorerNet, Tensor, CONV_WIDTHS, PARAM_NAMES};
pub use train::{train, TrainConfig};
pub use weights::{decode_weights, encode_weights, load_weights, save_weights, WEIGHTS_MAGIC, WEIGHTS_VERSION};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("network needs at least one input channel")]
    ZeroChannels,
    #[error("input has {got} channels, network expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("input contains non-finite values")]
    NonFinite,
    #[error("empty batch")]
    EmptyBatch,
    #[error("{labels} labels for {items} items")]
    LabelCount { labels: usize, items: usize },
    #[error("input has zero spatial extent")]
    ZeroExtent,
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training data must contain both classes")]
    SingleClass,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("corrupt weights file: {0}")]
    Corrupt(String),
    #[error("weights file version {found}, supported {supported}")]
    Version { found: u16, supported: u16 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
