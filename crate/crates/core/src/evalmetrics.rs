//! Image-level anomaly scoring and AUROC.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::datacube::LabeledDataset;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("AUROC needs at least one positive and one negative label")]
    SingleClass,
    #[error("{labels} labels but {scores} scores")]
    LengthMismatch { labels: usize, scores: usize },
    #[error("score {0} is not finite")]
    NonFinite(f64),
    #[error("pipeline failed on {item}: {reason}")]
    Pipeline { item: String, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// The scorer's probability is used as the anomaly score unchanged.
#[inline]
pub fn anomaly_score(q: f64) -> f64 {
    q
}

/// Area under the ROC curve via the Mann–Whitney rank-sum statistic.
///
/// Tied scores receive their average rank, so a tied (positive, negative)
/// pair contributes one half.
pub fn auroc(labels: &[u8], scores: &[f64]) -> Result<f64, MetricError> {
    if labels.len() != scores.len() {
        return Err(MetricError::LengthMismatch { labels: labels.len(), scores: scores.len() });
    }
    if let Some(&s) = scores.iter().find(|s| !s.is_finite()) {
        return Err(MetricError::NonFinite(s));
    }
    let positives = labels.iter().filter(|&&l| l != 0).count();
    let negatives = labels.len() - positives;
    if positives == 0 || negatives == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1..=j share their mean.
        let avg = (i + 1 + j) as f64 / 2.0;
        let pos_in_group = order[i..j].iter().filter(|&&k| labels[k] != 0).count();
        rank_sum += avg * pos_in_group as f64;
        i = j;
    }
    let p = positives as f64;
    let n = negatives as f64;
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * n))
}

/// AUROC as a percentage rounded half-up to one decimal.
pub fn percent_one_decimal(auc: f64) -> f64 {
    (auc * 1000.0 + 0.5).floor() / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredItem {
    pub label: u8,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub class_name: String,
    pub method: String,
    pub auroc_percent: f64,
    pub samples: usize,
    pub items: Vec<ScoredItem>,
}

impl ScoreReport {
    pub fn from_scores(class_name: &str, method: &str, items: Vec<ScoredItem>) -> Result<Self, MetricError> {
        let labels: Vec<u8> = items.iter().map(|i| i.label).collect();
        let scores: Vec<f64> = items.iter().map(|i| i.score).collect();
        let auc = auroc(&labels, &scores)?;
        Ok(Self {
            class_name: class_name.to_owned(),
            method: method.to_owned(),
            auroc_percent: percent_one_decimal(auc),
            samples: items.len(),
            items,
        })
    }

    /// Unrounded AUROC recomputed from the stored pairs.
    pub fn auroc(&self) -> Result<f64, MetricError> {
        let labels: Vec<u8> = self.items.iter().map(|i| i.label).collect();
        let scores: Vec<f64> = self.items.iter().map(|i| i.score).collect();
        auroc(&labels, &scores)
    }

    pub const CSV_HEADER: &'static str = "class,method,auroc_percent,n";

    pub fn csv_row(&self) -> String {
        format!("{},{},{:.1},{}", self.class_name, self.method, self.auroc_percent, self.samples)
    }

    pub fn write_csv(&self, path: &Path) -> Result<(), MetricError> {
        fs::write(path, format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row()))?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<(), MetricError> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }
}

/// Runs `pipeline` (reduce, then score) on every test item and reports AUROC.
pub fn evaluate<T, E: std::fmt::Display>(
    class_name: &str,
    method: &str,
    test: &LabeledDataset<T>,
    mut pipeline: impl FnMut(&T) -> Result<f64, E>,
) -> Result<ScoreReport, MetricError> {
    if !test.has_both_classes() {
        return Err(MetricError::SingleClass);
    }
    let mut items = Vec::with_capacity(test.len());
    for it in &test.items {
        let q = pipeline(&it.data).map_err(|e| MetricError::Pipeline { item: it.name.clone(), reason: e.to_string() })?;
        items.push(ScoredItem { label: it.label, score: anomaly_score(q) });
    }
    ScoreReport::from_scores(class_name, method, items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datacube::{LabeledItem, Split};
    use crate::numeric::RngStream;

    fn brute_force(labels: &[u8], scores: &[f64]) -> f64 {
        let mut hits = 0.0;
        let mut pairs = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li == 1 && lj == 0 {
                    pairs += 1.0;
                    if scores[i] > scores[j] {
                        hits += 1.0;
                    } else if scores[i] == scores[j] {
                        hits += 0.5;
                    }
                }
            }
        }
        hits / pairs
    }

    #[test]
    fn perfect_separation() {
        assert_eq!(auroc(&[0, 0, 1, 1], &[0.1, 0.2, 0.8, 0.9]).unwrap(), 1.0);
    }

    #[test]
    fn three_of_four_pairs() {
        assert_eq!(auroc(&[0, 0, 1, 1], &[0.1, 0.4, 0.35, 0.8]).unwrap(), 0.75);
    }

    #[test]
    fn all_ties_half() {
        assert_eq!(auroc(&[0, 1, 0, 1, 1], &[0.3; 5]).unwrap(), 0.5);
    }

    #[test]
    fn single_class_rejected() {
        assert!(matches!(auroc(&[1, 1], &[0.1, 0.2]), Err(MetricError::SingleClass)));
    }

    #[test]
    fn matches_pairwise_brute_force() {
        let mut rng = RngStream::new(123);
        for _ in 0..200 {
            let n = 2 + rng.index(49);
            let mut labels: Vec<u8> = (0..n).map(|_| rng.below(2) as u8).collect();
            labels[0] = 0;
            labels[1] = 1;
            // Coarse scores force plenty of ties.
            let scores: Vec<f64> = (0..n).map(|_| rng.below(8) as f64 / 8.0).collect();
            let fast = auroc(&labels, &scores).unwrap();
            assert!((fast - brute_force(&labels, &scores)).abs() <= 1e-12);
        }
    }

    #[test]
    fn monotone_transform_and_negation() {
        let mut rng = RngStream::new(77);
        let labels: Vec<u8> = (0..40).map(|i| (i % 3 == 0) as u8).collect();
        let scores: Vec<f64> = (0..40).map(|_| rng.below(10) as f64).collect();
        let a = auroc(&labels, &scores).unwrap();
        let warped: Vec<f64> = scores.iter().map(|s| (s * 0.3).exp() + 2.0).collect();
        assert_eq!(a, auroc(&labels, &warped).unwrap());
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        assert_eq!(a + auroc(&labels, &neg).unwrap(), 1.0);
    }

    #[test]
    fn random_scores_near_chance() {
        let mut rng = RngStream::new(5);
        let trials = 400;
        let mut sum = 0.0;
        for _ in 0..trials {
            let labels: Vec<u8> = (0..40).map(|i| (i % 2) as u8).collect();
            let scores: Vec<f64> = (0..40).map(|_| rng.next_f64()).collect();
            sum += auroc(&labels, &scores).unwrap();
        }
        let mean = sum / trials as f64;
        // AUROC of 20 vs 20 under the null: var = (n1 + n2 + 1) / (12 n1 n2).
        let sigma = (41.0f64 / (12.0 * 400.0)).sqrt() / (trials as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");
    }

    #[test]
    fn percent_rounding() {
        assert_eq!(percent_one_decimal(0.8825), 88.3);
        assert_eq!(percent_one_decimal(0.875), 87.5);
        assert_eq!(percent_one_decimal(1.0), 100.0);
        assert_eq!(percent_one_decimal(2.0 / 3.0), 66.7);
    }

    fn test_set() -> LabeledDataset<u8> {
        let items = [0u8, 1, 0, 1, 1]
            .iter()
            .enumerate()
            .map(|(i, &l)| LabeledItem { name: i.to_string(), data: l, label: l, mask: None })
            .collect();
        LabeledDataset { split: Split::Test, items }
    }

    #[test]
    fn evaluate_label_and_constant_pipelines() {
        let perfect = evaluate("toy", "FI", &test_set(), |l: &u8| Ok::<_, MetricError>(*l as f64)).unwrap();
        assert_eq!(perfect.auroc_percent, 100.0);
        assert_eq!(perfect.csv_row(), "toy,FI,100.0,5");
        let flat = evaluate("toy", "PCA", &test_set(), |_: &u8| Ok::<_, MetricError>(0.5)).unwrap();
        assert_eq!(flat.auroc_percent, 50.0);
        assert_eq!(flat.auroc().unwrap(), 0.5);
    }

    #[test]
    fn evaluate_single_class() {
        let mut t = test_set();
        t.items.retain(|i| i.label == 1);
        assert!(matches!(evaluate("toy", "FI", &t, |_: &u8| Ok::<_, MetricError>(0.5)), Err(MetricError::SingleClass)));
    }

    #[test]
    fn anomaly_score_is_identity() {
        assert_eq!(anomaly_score(0.5), 0.5);
        let labels = [0, 1, 1, 0];
        let q = [0.2, 0.7, 0.4, 0.5];
        let s: Vec<f64> = q.iter().map(|&v| anomaly_score(v)).collect();
        assert_eq!(auroc(&labels, &q).unwrap(), auroc(&labels, &s).unwrap());
    }
}
