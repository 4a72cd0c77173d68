//! Mini-batch BPTT with MSE loss, AdamW and early stopping on validation MSE.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::WindowedSample;
use crate::error::{Error, Result};
use crate::models::{Model, ParameterSet};
use crate::numeric::Array2;
use crate::rng;

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Global-norm gradient clipping threshold.
    pub grad_clip: Option<f64>,
    /// Stop as soon as validation MSE falls to or below this value.
    pub target_valid_mse: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 16,
            learning_rate: 1e-3,
            weight_decay: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 500,
            patience: 20,
            seed: 0,
            shuffle: true,
            grad_clip: None,
            target_valid_mse: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.beta1) || !in_unit(self.beta2) {
            return Err(Error::Parameter(
                "beta1 and beta2 must lie in (0, 1)".into(),
            ));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Parameter("learning_rate must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch_size must be at least 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::Parameter("max_epochs must be at least 1".into()));
        }
        if self.epsilon <= 0.0 || self.weight_decay < 0.0 {
            return Err(Error::Parameter(
                "epsilon must be positive and weight_decay non-negative".into(),
            ));
        }
        if self.grad_clip.is_some_and(|c| c <= 0.0) {
            return Err(Error::Parameter("grad_clip must be positive".into()));
        }
        Ok(())
    }
}

/// Mean of squared differences over every element.
pub fn mse_loss(pred: &Array2, target: &Array2) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!(
            "prediction {}x{} vs target {}x{}",
            pred.rows(),
            pred.cols(),
            target.rows(),
            target.cols()
        )));
    }
    if pred.is_empty() {
        return Err(Error::Contract("mse of an empty batch".into()));
    }
    let sum: f64 = pred
        .data()
        .iter()
        .zip(target.data())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / pred.len() as f64)
}

/// First and second moment estimates of AdamW.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: BTreeMap<String, Array2>,
    v: BTreeMap<String, Array2>,
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }
}

/// One AdamW update with decoupled weight decay:
///
/// ```text
/// m = b1 m + (1 - b1) g          v = b2 v + (1 - b2) g^2
/// m^ = m / (1 - b1^t)            v^ = v / (1 - b2^t)
/// theta = theta - lr m^ / (sqrt(v^) + eps) - lr wd theta
/// ```
pub fn adamw_step(
    params: &mut ParameterSet,
    grads: &BTreeMap<String, Array2>,
    state: &mut AdamState,
    config: &TrainConfig,
) -> Result<()> {
    if let Some(extra) = grads.keys().find(|k| params.get(k).is_err()) {
        return Err(Error::Contract(format!(
            "gradient for unknown parameter `{extra}`"
        )));
    }
    for (name, theta) in params.iter() {
        let g = grads
            .get(name)
            .ok_or_else(|| Error::Contract(format!("missing gradient for `{name}`")))?;
        if g.shape() != theta.shape() {
            return Err(Error::Shape(format!(
                "gradient shape mismatch for `{name}`"
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (config.beta1, config.beta2);
    let bias1 = 1.0 - b1.powi(t);
    let bias2 = 1.0 - b2.powi(t);
    let (lr, wd, eps) = (config.learning_rate, config.weight_decay, config.epsilon);

    for (name, theta) in params.iter_mut() {
        let g = &grads[name];
        let (r, c) = theta.shape();
        let m = state
            .m
            .entry(name.clone())
            .or_insert_with(|| Array2::zeros(r, c));
        let v = state
            .v
            .entry(name.clone())
            .or_insert_with(|| Array2::zeros(r, c));
        for (((p, &gi), mi), vi) in theta
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(m.data_mut())
            .zip(v.data_mut())
        {
            *mi = b1 * *mi + (1.0 - b1) * gi;
            *vi = b2 * *vi + (1.0 - b2) * gi * gi;
            let m_hat = *mi / bias1;
            let v_hat = *vi / bias2;
            *p = *p - lr * (m_hat / (v_hat.sqrt() + eps)) - lr * wd * *p;
        }
    }
    Ok(())
}

fn clip_global_norm(grads: &mut BTreeMap<String, Array2>, max_norm: f64) {
    let norm = grads
        .values()
        .flat_map(|g| g.data().iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let factor = max_norm / norm;
        for g in grads.values_mut() {
            for v in g.data_mut() {
                *v *= factor;
            }
        }
    }
}

/// Per-epoch sample order: a seeded reshuffle each epoch, or the identity
/// order when shuffling is off.
#[derive(Debug, Clone)]
pub struct EpochSchedule {
    rng: rng::Rng,
    order: Vec<usize>,
    shuffle: bool,
}

impl EpochSchedule {
    pub fn new(samples: usize, seed: u64, shuffle: bool) -> Self {
        Self {
            rng: rng::seeded(seed),
            order: (0..samples).collect(),
            shuffle,
        }
    }

    pub fn next_epoch(&mut self) -> &[usize] {
        if self.shuffle {
            self.order.shuffle(&mut self.rng);
        }
        &self.order
    }
}

/// MSE of `model` over `samples` (scaled space).
pub fn evaluate_mse(model: &Model, samples: &[WindowedSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Contract(
            "cannot evaluate on an empty sample set".into(),
        ));
    }
    let pred = model.predict_samples(samples, EVAL_CHUNK)?;
    let refs: Vec<&WindowedSample> = samples.iter().collect();
    mse_loss(
        &pred,
        &crate::models::targets_matrix(&refs, model.spec.horizon)?,
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxEpochs,
    TargetReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_mse: f64,
    pub valid_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_valid_mse: f64,
    pub stop_reason: StopReason,
}

impl TrainReport {
    /// `epoch,train_mse,valid_mse`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,train_mse,valid_mse\n");
        for e in &self.epochs {
            let _ = writeln!(out, "{},{},{}", e.epoch, e.train_mse, e.valid_mse);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

/// Trains `model` and returns the parameters with the lowest validation MSE.
///
/// `train_mse` in the report is the sample-weighted mean of the batch losses
/// seen during the epoch; `valid_mse` is measured after the epoch's updates.
pub fn train(
    model: Model,
    train_set: &[WindowedSample],
    valid_set: &[WindowedSample],
    config: &TrainConfig,
) -> Result<(Model, TrainReport)> {
    config.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::Contract(
            "training needs non-empty train and validation sets".into(),
        ));
    }
    let mut model = model;
    let mut schedule = EpochSchedule::new(train_set.len(), config.seed, config.shuffle);
    let mut state = AdamState::new();
    let mut epochs = Vec::new();
    let mut best: Option<(usize, f64, ParameterSet)> = None;
    let mut since_best = 0;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=config.max_epochs {
        let order = schedule.next_epoch().to_vec();
        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<&WindowedSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (loss, grads) = model.loss_and_gradients(&batch)?;
            if !loss.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    batch: batch_idx + 1,
                    loss,
                });
            }
            let mut grads = grads.into_params();
            if let Some(max_norm) = config.grad_clip {
                clip_global_norm(&mut grads, max_norm);
            }
            adamw_step(&mut model.params, &grads, &mut state, config)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_mse = loss_sum / train_set.len() as f64;
        let valid_mse = evaluate_mse(&model, valid_set)?;
        if !valid_mse.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: valid_mse,
            });
        }
        epochs.push(EpochRecord {
            epoch,
            train_mse,
            valid_mse,
        });

        if best.as_ref().is_none_or(|(_, b, _)| valid_mse < *b) {
            best = Some((epoch, valid_mse, model.params.clone()));
            since_best = 0;
        } else {
            since_best += 1;
        }
        if config.target_valid_mse.is_some_and(|t| valid_mse <= t) {
            stop_reason = StopReason::TargetReached;
            break;
        }
        if since_best >= config.patience {
            stop_reason = StopReason::Patience;
            break;
        }
    }

    let (best_epoch, best_valid_mse, params) = best.expect("at least one epoch ran");
    model.params = params;
    Ok((
        model,
        TrainReport {
            epochs,
            best_epoch,
            best_valid_mse,
            stop_reason,
        },
    ))
}
