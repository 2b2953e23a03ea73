use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::net::{Real, ScorerNet};
use super::ScorerError;
use crate::datacube::CubeView;
use crate::numeric::{permute, RngStream};

const PLATEAU_TOL: f64 = 1e-4;
const PLATEAU_WINDOW: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Stop once the epoch loss improves by less than 1e-4 (relative)
    /// over five epochs.
    pub early_stop: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 8,
            epochs: 50,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            early_stop: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ScorerError> {
        let bad = |m: &str| Err(ScorerError::InvalidConfig(m.into()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("betas must lie in [0, 1)");
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return bad("epsilon must be positive");
        }
        Ok(())
    }
}

/// Mini-batch Adam on the mean cross-entropy. Each epoch visits the data in
/// an order drawn from substream `epoch` of `cfg.seed`; the returned history
/// holds the mean per-sample loss seen during each epoch.
pub fn train<T: Real>(
    net: ScorerNet<T>,
    images: &[CubeView<'_, T>],
    labels: &[u8],
    cfg: &TrainConfig,
) -> Result<(ScorerNet<T>, Vec<f64>), ScorerError> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(ScorerError::EmptyBatch);
    }
    if labels.len() != images.len() {
        return Err(ScorerError::LabelCount { labels: labels.len(), items: images.len() });
    }
    if !(labels.contains(&0) && labels.iter().any(|&l| l != 0)) {
        return Err(ScorerError::SingleClass);
    }
    let mut net = net;
    let mut state = AdamState::new(&net);
    let root = RngStream::new(cfg.seed);
    let all: Vec<usize> = (0..images.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let order = permute(&all, &mut root.substream(epoch as u64));
        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<CubeView<'_, T>> = chunk.iter().map(|&i| images[i]).collect();
            let ys: Vec<u8> = chunk.iter().map(|&i| labels[i]).collect();
            let (loss, grads) = net.loss_and_gradients(&batch, &ys)?;
            total += loss * chunk.len() as f64;
            adam_step(&mut net, &grads, &mut state, cfg)?;
        }
        history.push(total / images.len() as f64);
        if cfg.early_stop && plateaued(&history) {
            break;
        }
    }
    Ok((net, history))
}

fn plateaued(history: &[f64]) -> bool {
    let n = history.len();
    if n <= PLATEAU_WINDOW {
        return false;
    }
    let then = history[n - 1 - PLATEAU_WINDOW];
    let now = history[n - 1];
    then > 0.0 && (then - now) / then < PLATEAU_TOL
}
