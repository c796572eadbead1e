use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use super::loss::Loss;
use super::network::{Mode, Network};
use super::optim::{Optimizer, OptimizerKind};
use super::rng;
use super::tensor::Tensor;
use super::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub seed: u64,
    #[serde(default)]
    pub early_stop: Option<EarlyStop>,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NnError> {
        if self.batch_size == 0 {
            return Err(NnError::Config("batch_size must be at least 1".into()));
        }
        if self.epochs == 0 {
            return Err(NnError::Config("epochs must be at least 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NnError::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(es) = &self.early_stop {
            if es.patience == 0 || es.min_delta < 0.0 {
                return Err(NnError::Config(
                    "early stop needs patience >= 1 and min_delta >= 0".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
    pub epochs_run: usize,
    pub final_loss: f64,
    pub stopped_early: bool,
}

/// Mini-batch training of `net` on `(inputs[i], targets[i])` pairs.
///
/// A single seeded RNG stream (derived from `config.seed`) drives epoch
/// shuffles and dropout masks, so identical seed, config, data and initial
/// weights yield bit-identical results. Early stopping halts once the epoch
/// loss has failed to improve on the best seen by more than `min_delta` for
/// `patience` consecutive epochs.
pub fn train(
    net: &mut Network<f32>,
    inputs: &Tensor<f32>,
    targets: &Tensor<f32>,
    loss: Loss,
    config: &TrainConfig,
) -> Result<TrainReport, NnError> {
    config.validate()?;
    let n = inputs.batch();
    if n == 0 || targets.batch() != n {
        return Err(NnError::Config(format!(
            "dataset has {} inputs and {} targets",
            n,
            targets.batch()
        )));
    }
    let mut rng = rng::derive(config.seed, "train");
    let mut optimizer = Optimizer::new(config.optimizer, net);
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best = f64::INFINITY;
    let mut stale = 0usize;
    let mut stopped_early = false;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0f64;
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let x = inputs.select_rows(chunk);
            let t = targets.select_rows(chunk);
            net.zero_grads();
            let out = net.forward(&x, Mode::Train, Some(&mut rng))?;
            let value = f64::from(net.backward_loss(&out, &t, loss)?);
            if !value.is_finite() {
                return Err(NnError::Diverged {
                    epoch,
                    batch: b,
                    loss: value,
                });
            }
            optimizer.step(net, config.learning_rate);
            total += value * chunk.len() as f64;
        }
        net.clear_caches();
        if !net.all_finite() {
            return Err(NnError::Diverged {
                epoch,
                batch: n.div_ceil(config.batch_size),
                loss: f64::NAN,
            });
        }
        let epoch_loss = total / n as f64;
        history.push(epoch_loss);
        if epoch % 10 == 0 || epoch + 1 == config.epochs {
            info!(epoch, loss = epoch_loss, "epoch done");
        } else {
            debug!(epoch, loss = epoch_loss, "epoch done");
        }
        if let Some(es) = &config.early_stop {
            if epoch_loss < best - es.min_delta {
                best = epoch_loss;
                stale = 0;
            } else {
                stale += 1;
                if stale >= es.patience {
                    stopped_early = true;
                    info!(epoch, loss = epoch_loss, "early stop");
                    break;
                }
            }
        }
    }
    Ok(TrainReport {
        epochs_run: history.len(),
        final_loss: *history.last().unwrap(),
        loss_history: history,
        stopped_early,
    })
}
