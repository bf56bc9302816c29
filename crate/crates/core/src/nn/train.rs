use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{AdamConfig, AdamState};
use super::loss::{mse_loss, multilabel_soft_margin_loss};
use super::network::Network;
use super::tensor::Tensor;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    Mse,
    MultilabelSoftMargin,
}

impl Loss {
    pub fn evaluate(self, pred: &Tensor, target: &Tensor) -> Result<(f64, Tensor)> {
        match self {
            Loss::Mse => mse_loss(pred, target),
            Loss::MultilabelSoftMargin => multilabel_soft_margin_loss(pred, target),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            weight_decay: 0.0,
            epochs: 10,
            batch_size: 32,
            seed: 0,
        }
    }
}

/// Minibatch Adam training. Returns the per-epoch mean training loss.
///
/// Sample order is reshuffled every epoch from a stream seeded by
/// `config.seed`, so identical inputs give identical parameter trajectories.
pub fn train(
    net: &mut Network,
    inputs: &Tensor,
    targets: &Tensor,
    loss: Loss,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let n = inputs.batch();
    if n == 0 {
        return Err(Error::Validation("training set is empty".into()));
    }
    if targets.batch() != n {
        return Err(Error::Shape(format!(
            "{n} inputs but {} targets",
            targets.batch()
        )));
    }
    let batch_size = config.batch_size.max(1);
    let mut adam = AdamState::new(AdamConfig {
        lr: config.lr,
        weight_decay: config.weight_decay,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch_size) {
            let x = inputs.gather(chunk);
            let y = targets.gather(chunk);
            net.zero_grad();
            let pred = net.forward(&x)?;
            let (value, grad) = loss.evaluate(&pred, &y)?;
            if !value.is_finite() {
                return Err(Error::Divergence { epoch, loss: value });
            }
            net.backward(&grad)?;
            adam.step(net.params_and_grads());
            net.step += 1;
            total += value * chunk.len() as f64;
        }
        let mean = total / n as f64;
        log::debug!("epoch {epoch}: loss {mean:.6}");
        curve.push(mean);
    }
    Ok(curve)
}

/// Mean loss over a dataset without updating parameters.
pub fn evaluate_loss(net: &Network, inputs: &Tensor, targets: &Tensor, loss: Loss, batch_size: usize) -> Result<f64> {
    let n = inputs.batch();
    if n == 0 {
        return Err(Error::Validation("evaluation set is empty".into()));
    }
    let idx: Vec<usize> = (0..n).collect();
    let mut total = 0.0;
    for chunk in idx.chunks(batch_size.max(1)) {
        let pred = net.predict(&inputs.gather(chunk))?;
        total += loss.evaluate(&pred, &targets.gather(chunk))?.0 * chunk.len() as f64;
    }
    Ok(total / n as f64)
}

/// Runs `predict` over a dataset in fixed-size chunks and concatenates rows.
pub fn predict_batched(net: &Network, inputs: &Tensor, batch_size: usize) -> Result<Tensor> {
    let n = inputs.batch();
    let idx: Vec<usize> = (0..n).collect();
    let mut data = Vec::new();
    let mut sample_shape = net.output_shape()?;
    for chunk in idx.chunks(batch_size.max(1)) {
        data.extend(net.predict(&inputs.gather(chunk))?.data);
    }
    sample_shape.insert(0, n);
    Tensor::new(sample_shape, data)
}
