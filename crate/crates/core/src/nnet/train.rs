use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{dataset_loss, mse_loss, AdamState, Network};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr0: f64,
    /// Multiplicative decay applied every `step_epochs` epochs.
    pub gamma: f64,
    pub step_epochs: usize,
    pub seed: u64,
}

impl TrainConfig {
    /// `lr0 * gamma^floor(epoch / step_epochs)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr0 * self.gamma.powi((epoch / self.step_epochs) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.step_epochs == 0 {
            return Err(Error::Config("schedule step must be positive".into()));
        }
        if !(self.lr0 > 0.0 && self.lr0.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate {} is not positive",
                self.lr0
            )));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!(
                "decay factor {} outside (0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    /// Full-pass training loss before any update.
    pub initial_loss: f64,
    /// Sample-weighted mean of the mini-batch losses of each epoch.
    pub train_loss: Vec<f64>,
    /// Full-pass validation loss after each epoch, if a validation set was given.
    pub val_loss: Vec<f64>,
    pub lr: Vec<f64>,
}

/// Mini-batch Adam on the MSE loss. Batches are drawn from a fresh
/// permutation each epoch using a generator seeded from `config.seed`.
pub fn train(
    net: &mut Network,
    x: &Matrix,
    y: &Matrix,
    validation: Option<(&Matrix, &Matrix)>,
    config: &TrainConfig,
) -> Result<TrainHistory> {
    config.validate()?;
    if x.rows() == 0 {
        return Err(Error::Empty("training inputs"));
    }
    if x.rows() != y.rows() {
        return Err(Error::Shape(format!(
            "{} inputs vs {} targets",
            x.rows(),
            y.rows()
        )));
    }
    if y.cols() != net.output_dim() {
        return Err(Error::Shape(format!(
            "targets of width {} for a network with {} outputs",
            y.cols(),
            net.output_dim()
        )));
    }
    let mut history = TrainHistory {
        initial_loss: dataset_loss(net, x, y)?,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = AdamState::new(net);
    let mut order: Vec<usize> = (0..x.rows()).collect();

    for epoch in 0..config.epochs {
        let lr = config.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, idx) in order.chunks(config.batch_size).enumerate() {
            let xb = x.select_rows(idx);
            let yb = y.select_rows(idx);
            let (pred, cache) = net.forward(&xb)?;
            let (loss, grad) = mse_loss(&pred, &yb)?;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            let grads = net.backward(&cache, &grad)?;
            adam.apply(net, &grads, lr)?;
            total += loss * idx.len() as f64;
        }
        history.train_loss.push(total / x.rows() as f64);
        history.lr.push(lr);
        if let Some((vx, vy)) = validation {
            history.val_loss.push(dataset_loss(net, vx, vy)?);
        }
    }
    Ok(history)
}
