//! Logistic-regression probe on the raw anchor embedding.
//!
//! Useful as a control: on the planted-signal benchmark the anchor carries no
//! label information, so the probe should sit near chance.

use serde::{Deserialize, Serialize};

use crate::data::ImageRecord;
use crate::error::{Error, Result};
use crate::loss::{bce_grad, LossConfig};
use crate::metrics::{roc_auc, ScoredSet};
use crate::model::Linear;

use super::adam::{adam_step, AdamConfig, AdamState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProbeConfig {
    pub steps: usize,
    pub lr: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig { steps: 300, lr: 0.05 }
    }
}

fn anchor_score(w: &[f64], x: &[f64]) -> f64 {
    let a = x.len();
    let logit = w[..a].iter().zip(x).map(|(p, q)| p * q).sum::<f64>() + w[a];
    1.0 / (1.0 + (-logit).exp())
}

/// Fits `sigmoid(w·z_anchor + b)` on `train` with full-batch Adam from zero
/// weights and returns the fitted layer with the held-out AUC on `test`.
pub fn anchor_linear_probe(train: &[ImageRecord], test: &[ImageRecord], cfg: &ProbeConfig) -> Result<(Linear, f64)> {
    let a = train.first().ok_or(Error::EmptyDataset)?.dim();
    let eps = LossConfig::default().eps;
    let mut w = vec![0.0; a + 1];
    let mut state = AdamState::new(a + 1);
    let adam = AdamConfig {
        lr: cfg.lr,
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
    for _ in 0..cfg.steps {
        let mut g = vec![0.0; a + 1];
        for r in train {
            let x = &r.rois[0].embedding;
            let p = anchor_score(&w, x);
            let dlogit = bce_grad(p, r.label, eps) * p * (1.0 - p);
            g[..a].iter_mut().zip(x).for_each(|(gi, xi)| *gi += dlogit * xi);
            g[a] += dlogit;
        }
        g.iter_mut().for_each(|v| *v /= train.len() as f64);
        adam_step(&mut w, &g, &mut state, &adam)?;
    }
    let scores = test.iter().map(|r| anchor_score(&w, &r.rois[0].embedding)).collect();
    let auc = roc_auc(&ScoredSet::new(scores, test.iter().map(|r| r.label).collect())?)?;
    let layer = Linear {
        b: vec![w[a]],
        w: w[..a].to_vec(),
        inp: a,
        out: 1,
    };
    Ok((layer, auc))
}
