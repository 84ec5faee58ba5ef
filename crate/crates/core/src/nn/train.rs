use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{AdamConfig, AdamState, Network, Objective};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 500,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train: f64,
    pub val: Option<f64>,
}

/// Mini-batch Adam training. The recorded train loss of an epoch is the
/// sample-weighted mean of its batch losses.
pub fn train(
    net: &mut Network,
    x: &Array2<f64>,
    y: &Array2<f64>,
    objective: &dyn Objective,
    cfg: &TrainConfig,
    validation: Option<(&Array2<f64>, &Array2<f64>)>,
) -> Result<Vec<EpochLoss>> {
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be at least 1".into()));
    }
    if x.nrows() != y.nrows() {
        return Err(Error::Shape {
            expected: x.nrows(),
            got: y.nrows(),
        });
    }
    if x.nrows() == 0 {
        return Err(Error::Training("no training samples".into()));
    }
    let mut adam = AdamState::new(net, AdamConfig::with_lr(cfg.lr));
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..x.nrows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), batch);
            let yb = y.select(Axis(0), batch);
            let pass = net.forward(&xb)?;
            let (loss, upstream) = objective.evaluate(pass.output(), &yb);
            if !loss.is_finite() {
                return Err(Error::Training(format!("loss diverged at epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            let grads = net.backward(&pass, &upstream);
            adam.step(net, &grads)
                .map_err(|e| Error::Training(format!("epoch {epoch}: {e}")))?;
        }
        let val = match validation {
            Some((vx, vy)) => {
                let (loss, _) = objective.evaluate(&net.predict(vx)?, vy);
                Some(loss)
            }
            None => None,
        };
        history.push(EpochLoss {
            epoch,
            train: total / x.nrows() as f64,
            val,
        });
    }
    Ok(history)
}
