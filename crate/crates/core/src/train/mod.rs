//! Mini-batch Adam training with early stopping on validation AUC.
//!
//! The loop is deterministic: the validation split, every epoch's shuffle and
//! the initialization come from seeded portable streams, and per-example
//! gradients computed in parallel are summed in example order.

mod adam;
mod gradcheck;
mod probe;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ImageRecord;
use crate::error::{Error, Result};
use crate::loss::{total_loss, LossConfig};
use crate::metrics::{roc_auc, MetricReport, ScoredSet};
use crate::model::{init_params, model_backward_into, model_forward, ModelConfig, ModelParams};
use crate::rng::{Stream, STREAM_EPOCH_BASE, STREAM_SPLIT};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{gradcheck, random_params, random_record, Fault, GradcheckReport, FD_STEP, PASS_THRESHOLD};
pub use probe::{anchor_linear_probe, ProbeConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub lambda_rep: f64,
    pub val_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            batch_size: 32,
            epochs: 50,
            patience: 10,
            seed: 0,
            lambda_rep: 1.0,
            val_fraction: 0.2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::config("lr", "must be > 0"));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::config("beta1", "must lie in [0,1)"));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::config("beta2", "must lie in [0,1)"));
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::config("adam_eps", "must be > 0"));
        }
        if self.batch_size < 1 {
            return Err(Error::config("batch_size", "must be ≥ 1"));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(Error::config("val_fraction", "must lie in (0,1)"));
        }
        self.loss().validate()
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.adam_eps,
        }
    }

    pub fn loss(&self) -> LossConfig {
        LossConfig {
            lambda_rep: self.lambda_rep,
            ..LossConfig::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-example objective seen during each epoch.
    pub train_loss: Vec<f64>,
    pub val_auc: Vec<f64>,
    /// Zero-based epoch whose parameters were returned.
    pub best_epoch: Option<usize>,
    pub best_val_auc: Option<f64>,
    pub stopped_early: bool,
    pub n_train: usize,
    pub n_val: usize,
}

/// Stratified split: each class is shuffled and its leading
/// `round(len · fraction)` members go to validation.
pub fn split_indices(records: &[ImageRecord], fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut s = Stream::new(seed, STREAM_SPLIT);
    let mut train = Vec::new();
    let mut val = Vec::new();
    for label in [0u8, 1] {
        let mut idx: Vec<usize> = (0..records.len()).filter(|&i| records[i].label == label).collect();
        s.shuffle(&mut idx);
        let n_val = (idx.len() as f64 * fraction).round() as usize;
        val.extend_from_slice(&idx[..n_val]);
        train.extend_from_slice(&idx[n_val..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    (train, val)
}

/// Scores every record in input order.
pub fn predict(records: &[ImageRecord], params: &ModelParams, cfg: &ModelConfig) -> Result<Vec<f64>> {
    records
        .par_iter()
        .map(|r| model_forward(r, params, cfg).map(|t| t.y_hat))
        .collect()
}

pub fn evaluate(records: &[ImageRecord], params: &ModelParams, cfg: &ModelConfig) -> Result<MetricReport> {
    let scores = predict(records, params, cfg)?;
    let labels = records.iter().map(|r| r.label).collect();
    MetricReport::compute(&ScoredSet::new(scores, labels)?)
}

fn auc_of(records: &[&ImageRecord], params: &ModelParams, cfg: &ModelConfig) -> Result<f64> {
    let scores: Vec<f64> = records
        .par_iter()
        .map(|r| model_forward(r, params, cfg).map(|t| t.y_hat))
        .collect::<Result<_>>()?;
    roc_auc(&ScoredSet::new(scores, records.iter().map(|r| r.label).collect())?)
}

/// Loss and gradient of one example.
fn example_grad(
    rec: &ImageRecord,
    params: &ModelParams,
    mcfg: &ModelConfig,
    lcfg: &LossConfig,
) -> Result<(f64, ModelParams)> {
    let tr = model_forward(rec, params, mcfg)?;
    let lv = total_loss(tr.y_hat, rec.label, &tr.x_l, tr.k, lcfg)?;
    let mut g = params.zeros_like();
    model_backward_into(&tr, lv.grad_y_hat, lv.grad_x_l.as_deref(), params, mcfg, &mut g);
    Ok((lv.value, g))
}

/// Trains from a seeded initialization and returns the parameters of the
/// epoch with the best validation AUC.
pub fn train(dataset: &[ImageRecord], mcfg: &ModelConfig, tcfg: &TrainConfig) -> Result<(ModelParams, TrainReport)> {
    mcfg.validate()?;
    tcfg.validate()?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if let Some(r) = dataset.iter().find(|r| r.dim() != mcfg.a) {
        return Err(Error::DimMismatch {
            expected: mcfg.a,
            found: r.dim(),
        });
    }
    let lcfg = tcfg.loss();
    let (mut train_idx, val_idx) = split_indices(dataset, tcfg.val_fraction, tcfg.seed);
    let val: Vec<&ImageRecord> = val_idx.iter().map(|&i| &dataset[i]).collect();
    let val_pos = val.iter().filter(|r| r.label == 1).count();
    if val_pos == 0 || val_pos == val.len() {
        return Err(Error::AucUndefined("validation split has a single class"));
    }
    if train_idx.is_empty() {
        return Err(Error::EmptyDataset);
    }

    let mut params = init_params(mcfg, tcfg.seed)?;
    let mut best = params.clone();
    let mut flat = params.to_flat();
    let mut state = AdamState::new(flat.len());
    let adam = tcfg.adam();
    let mut report = TrainReport {
        train_loss: Vec::new(),
        val_auc: Vec::new(),
        best_epoch: None,
        best_val_auc: None,
        stopped_early: false,
        n_train: train_idx.len(),
        n_val: val.len(),
    };
    let mut since_best = 0;

    for epoch in 0..tcfg.epochs {
        Stream::new(tcfg.seed, STREAM_EPOCH_BASE + epoch as u64).shuffle(&mut train_idx);
        let mut epoch_loss = 0.0;
        for batch in train_idx.chunks(tcfg.batch_size) {
            let per_example: Vec<(f64, ModelParams)> = batch
                .par_iter()
                .map(|&i| example_grad(&dataset[i], &params, mcfg, &lcfg))
                .collect::<Result<_>>()?;
            let mut grad = vec![0.0; flat.len()];
            for (loss, g) in &per_example {
                epoch_loss += loss;
                let mut off = 0;
                for (_, _, t) in g.tensors() {
                    for (acc, v) in grad[off..off + t.len()].iter_mut().zip(t) {
                        *acc += v;
                    }
                    off += t.len();
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam_step(&mut flat, &grad, &mut state, &adam)?;
            params.from_flat(&flat)?;
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters"));
        }
        report.train_loss.push(epoch_loss / train_idx.len() as f64);
        let auc = auc_of(&val, &params, mcfg)?;
        report.val_auc.push(auc);
        if report.best_val_auc.is_none_or(|b| auc > b) {
            report.best_val_auc = Some(auc);
            report.best_epoch = Some(epoch);
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= tcfg.patience {
                report.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, report))
}
