//! Channel reduction: Gini feature importance and permutation importance
//! over a random forest (feature selection), and PCA (feature extraction).

mod artifacts;
mod forest;
mod importance;
mod pca;
mod select;

pub use artifacts::{
    decode_pca, encode_pca, load_pca, load_ranking, ranking_from_json, ranking_to_json, save_pca, save_ranking,
    PCAM_MAGIC, PCAM_VERSION, RANKING_VERSION,
};
pub use forest::{fit_random_forest, gini, DecisionTree, Forest, ForestConfig, NodeKind, TreeNode};
pub use importance::{feature_importance, permutation_importance, ChannelRanking, RankEntry, RankingMethod};
pub use pca::{fit_pca, pca_inverse_transform, pca_transform, PcaModel};
pub use select::{select_channels, selected_channel_set, Reduced, Reducer};

use thiserror::Error;

use crate::datacube::DataError;
use crate::numeric::NumericError;

#[derive(Debug, Error, PartialEq)]
pub enum ReductionError {
    #[error("input has no rows or no features")]
    EmptyInput,
    #[error("need at least 2 samples, got {0}")]
    TooFewSamples(usize),
    #[error("labels contain a single class")]
    SingleClass,
    #[error("{rows} rows but {labels} labels")]
    LabelCount { rows: usize, labels: usize },
    #[error("expected {expected} channels, got {got}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("requested {requested} channels but only {available} exist")]
    TooManyChannels { requested: usize, available: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
    #[error("corrupt artifact: {0}")]
    Corrupt(String),
    #[error("artifact version {found} is not supported (expected {supported})")]
    Version { found: u64, supported: u64 },
    #[error("metric failure: {0}")]
    Metric(String),
    #[error(transparent)]
    Numeric(#[from] NumericError),
    #[error("{0}")]
    Data(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<DataError> for ReductionError {
    fn from(e: DataError) -> Self {
        ReductionError::Data(e.to_string())
    }
}

impl From<std::io::Error> for ReductionError {
    fn from(e: std::io::Error) -> Self {
        ReductionError::Io(e.to_string())
    }
}
