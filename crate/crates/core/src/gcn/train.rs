use std::time::Instant;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::{forward, gradients, sigmoid, GcnModel};
use crate::error::{Error, Result};
use crate::gcn::bce_loss;
use crate::graph::{Graph, NormalizedAdjacency, SplitMasks};
use crate::metrics::auc;
use crate::optim::{adamw_step, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub seed: u64,
    /// Multiplier on the Glorot-uniform bound.
    pub init_scale: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            weight_decay: 5e-4,
            epochs: 1400,
            hidden: 16,
            seed: 42,
            init_scale: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight_decay must be >= 0, got {}",
                self.weight_decay
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden must be >= 1".into()));
        }
        if !(self.init_scale > 0.0 && self.init_scale.is_finite()) {
            return Err(Error::Config(format!(
                "init_scale must be > 0, got {}",
                self.init_scale
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Training loss at each epoch, measured before that epoch's update.
    pub train_loss: Vec<f64>,
    /// Validation loss after each epoch's update.
    pub val_loss: Vec<f64>,
    /// Validation AUC after each update; `None` when the validation set
    /// holds a single class.
    pub val_auc: Vec<Option<f64>>,
    pub test_auc: Option<f64>,
    pub wall_clock_seconds: f64,
}

impl TrainReport {
    /// The report with timing zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_seconds: 0.0,
            ..self.clone()
        }
    }
}

/// Full-batch training with AdamW for `config.epochs` steps.
pub fn train(graph: &Graph, masks: &SplitMasks, config: &TrainConfig) -> Result<(GcnModel, TrainReport)> {
    let adj = NormalizedAdjacency::new(graph);
    train_with_adjacency(&adj, graph.features().view(), graph.labels(), masks, config)
}

fn masked_auc(logits: &[f64], labels: &[u8], mask: &[usize]) -> Option<f64> {
    let scores: Vec<f64> = mask.iter().map(|&i| sigmoid(logits[i])).collect();
    let ys: Vec<u8> = mask.iter().map(|&i| labels[i]).collect();
    auc(&scores, &ys).ok()
}

pub fn train_with_adjacency(
    adj: &NormalizedAdjacency,
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    masks: &SplitMasks,
    config: &TrainConfig,
) -> Result<(GcnModel, TrainReport)> {
    config.validate()?;
    let started = Instant::now();
    let mut model = GcnModel::init(features.ncols(), config.hidden, config.seed, config.init_scale);
    let opt = AdamConfig::new(config.learning_rate, config.weight_decay);
    let mut states = [
        AdamState::new(model.w1.len()),
        AdamState::new(model.b1.len()),
        AdamState::new(model.w2.len()),
        AdamState::new(1),
    ];

    let mut report = TrainReport {
        train_loss: Vec::with_capacity(config.epochs),
        val_loss: Vec::with_capacity(config.epochs),
        val_auc: Vec::with_capacity(config.epochs),
        test_auc: None,
        wall_clock_seconds: 0.0,
    };

    for epoch in 0..config.epochs {
        let grads = gradients(&model, adj, features, labels, &masks.train)?;
        if !grads.loss.is_finite() {
            return Err(Error::NonFinite {
                stage: "training",
                epoch,
            });
        }
        let [s_w1, s_b1, s_w2, s_b2] = &mut states;
        adamw_step(
            model.w1.as_slice_mut().expect("standard layout"),
            grads.w1.as_slice().expect("standard layout"),
            s_w1,
            &opt,
        );
        adamw_step(
            model.b1.as_slice_mut().expect("standard layout"),
            grads.b1.as_slice().expect("standard layout"),
            s_b1,
            &opt,
        );
        adamw_step(
            model.w2.as_slice_mut().expect("standard layout"),
            grads.w2.as_slice().expect("standard layout"),
            s_w2,
            &opt,
        );
        adamw_step(std::slice::from_mut(&mut model.b2), &[grads.b2], s_b2, &opt);
        if !model.is_finite() {
            return Err(Error::NonFinite {
                stage: "training",
                epoch,
            });
        }

        let logits = forward(&model, adj, features)?;
        let val_loss = bce_loss(&logits, labels, &masks.val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFinite {
                stage: "validation",
                epoch,
            });
        }
        report.train_loss.push(grads.loss);
        report.val_loss.push(val_loss);
        report.val_auc.push(masked_auc(&logits, labels, &masks.val));
    }

    let logits = forward(&model, adj, features)?;
    report.test_auc = masked_auc(&logits, labels, &masks.test);
    report.wall_clock_seconds = started.elapsed().as_secs_f64();
    Ok((model, report))
}
