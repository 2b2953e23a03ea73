use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Forest, NodeKind, ReductionError};
use crate::evalmetrics::auroc;
use crate::numeric::{Matrix, RngStream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RankingMethod {
    /// Mean decrease in Gini impurity.
    #[serde(rename = "FI")]
    FeatureImportance,
    /// Validation AUROC drop under column permutation.
    #[serde(rename = "PI")]
    PermutationImportance,
}

impl fmt::Display for RankingMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankingMethod::FeatureImportance => "FI",
            RankingMethod::PermutationImportance => "PI",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub channel: usize,
    pub importance: f64,
}

/// Channels sorted by importance (descending, ties by ascending index).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRanking {
    method: RankingMethod,
    channel_count: usize,
    entries: Vec<RankEntry>,
}

impl ChannelRanking {
    /// Ranks `scores[j]` for every channel `j`.
    pub fn from_scores(method: RankingMethod, scores: &[f64]) -> Self {
        let mut entries: Vec<RankEntry> =
            scores.iter().enumerate().map(|(channel, &importance)| RankEntry { channel, importance }).collect();
        entries.sort_by(|a, b| b.importance.total_cmp(&a.importance).then(a.channel.cmp(&b.channel)));
        Self { method, channel_count: scores.len(), entries }
    }

    /// Validates and wraps externally supplied entries (e.g. from a file).
    pub fn from_entries(method: RankingMethod, channel_count: usize, entries: Vec<RankEntry>) -> Result<Self, ReductionError> {
        let mut seen = vec![false; channel_count];
        for e in &entries {
            if e.channel >= channel_count || std::mem::replace(&mut seen[e.channel], true) {
                return Err(ReductionError::InvalidRanking(format!("channel {} duplicated or out of range", e.channel)));
            }
            if !e.importance.is_finite() {
                return Err(ReductionError::InvalidRanking(format!("channel {} has non-finite importance", e.channel)));
            }
        }
        let sorted = entries
            .windows(2)
            .all(|w| w[0].importance > w[1].importance || (w[0].importance == w[1].importance && w[0].channel < w[1].channel));
        if !sorted {
            return Err(ReductionError::InvalidRanking("entries are not sorted by importance".into()));
        }
        Ok(Self { method, channel_count, entries })
    }

    pub fn method(&self) -> RankingMethod {
        self.method
    }

    pub fn channel_count(&self) -> usize {
        self.channel_count
    }

    pub fn entries(&self) -> &[RankEntry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// First `n` channel indices in ranking order.
    pub fn top(&self, n: usize) -> Result<Vec<usize>, ReductionError> {
        if n > self.entries.len() {
            return Err(ReductionError::TooManyChannels { requested: n, available: self.entries.len() });
        }
        Ok(self.entries[..n].iter().map(|e| e.channel).collect())
    }

    /// Importance indexed by channel.
    pub fn scores_by_channel(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.channel_count];
        for e in &self.entries {
            out[e.channel] = e.importance;
        }
        out
    }
}

/// Mean decrease in impurity: for every split on feature `j`, add
/// `samples * impurity_decrease`, summed over all trees, then normalise the
/// totals to sum to one. A forest without any split ranks all channels equal.
pub fn feature_importance(forest: &Forest) -> ChannelRanking {
    let mut totals = vec![0.0; forest.feature_count()];
    for tree in forest.trees() {
        for node in tree.nodes() {
            if let NodeKind::Split { feature, .. } = node.kind {
                totals[feature] += node.samples as f64 * node.impurity_decrease;
            }
        }
    }
    let sum: f64 = totals.iter().sum();
    if sum > 0.0 {
        totals.iter_mut().for_each(|t| *t /= sum);
    } else {
        let uniform = 1.0 / totals.len() as f64;
        totals.iter_mut().for_each(|t| *t = uniform);
    }
    ChannelRanking::from_scores(RankingMethod::FeatureImportance, &totals)
}

/// Permutation importance on held-out rows.
///
/// `s` is the probe's AUROC on `(x_val, y_val)`. For feature `j` and repeat
/// `k`, column `j` is shuffled with sub-stream `(j, k)` of `rng` and the
/// AUROC `s_kj` recomputed; the importance is `s - mean_k s_kj`. Features
/// run in parallel, repeats in order, so output is independent of threads.
pub fn permutation_importance(
    probe: &Forest,
    x_val: &Matrix,
    y_val: &[u8],
    repeats: usize,
    rng: &RngStream,
) -> Result<ChannelRanking, ReductionError> {
    if repeats == 0 {
        return Err(ReductionError::InvalidConfig("permutation repeats must be >= 1".into()));
    }
    if x_val.rows() != y_val.len() {
        return Err(ReductionError::LabelCount { rows: x_val.rows(), labels: y_val.len() });
    }
    if x_val.cols() != probe.feature_count() {
        return Err(ReductionError::ChannelMismatch { expected: probe.feature_count(), got: x_val.cols() });
    }
    let positives = y_val.iter().filter(|&&v| v != 0).count();
    if x_val.rows() < 2 || positives == 0 || positives == y_val.len() {
        return Err(ReductionError::SingleClass);
    }

    let base_scores = probe.predict_matrix(x_val);
    let base = auroc(y_val, &base_scores).map_err(|e| ReductionError::Metric(e.to_string()))?;
    let m = x_val.rows();

    let drops: Vec<f64> = (0..x_val.cols())
        .into_par_iter()
        .map(|j| {
            let feature_stream = rng.substream(j as u64);
            let column = x_val.column(j);
            let mut permuted_sum = 0.0;
            for k in 0..repeats {
                let mut sub = feature_stream.substream(k as u64);
                let mut shuffled = column.clone();
                sub.shuffle(&mut shuffled);
                let scores: Vec<f64> = (0..m)
                    .map(|r| {
                        let row = x_val.row(r);
                        let v = shuffled[r];
                        probe.predict_with(|f| if f == j { v } else { row[f] })
                    })
                    .collect();
                permuted_sum += auroc(y_val, &scores).expect("labels validated above");
            }
            base - permuted_sum / repeats as f64
        })
        .collect();
    Ok(ChannelRanking::from_scores(RankingMethod::PermutationImportance, &drops))
}
