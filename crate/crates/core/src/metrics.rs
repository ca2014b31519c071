//! Ranking and threshold metrics for binary scores.
//!
//! `R@x` is reported as the best recall reachable while the empirical
//! false-positive rate stays at or below `x`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FPR_TARGETS: [f64; 3] = [0.1, 0.3, 0.5];

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSet {
    scores: Vec<f64>,
    labels: Vec<u8>,
}

impl ScoredSet {
    pub fn new(scores: Vec<f64>, labels: Vec<u8>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::Shape(format!(
                "{} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("score"));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::config("labels", format!("non-binary label {bad}")));
        }
        Ok(ScoredSet { scores, labels })
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    pub fn n_pos(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    pub fn n_neg(&self) -> usize {
        self.len() - self.n_pos()
    }

    fn require_both_classes(&self) -> Result<()> {
        if self.n_pos() == 0 || self.n_neg() == 0 {
            return Err(Error::AucUndefined("both classes must be present"));
        }
        Ok(())
    }

    /// Indices sorted by descending score.
    fn order_desc(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.sort_by(|&a, &b| self.scores[b].total_cmp(&self.scores[a]));
        idx
    }
}

/// Mann–Whitney form of the ROC area; tied scores count one half.
pub fn roc_auc(s: &ScoredSet) -> Result<f64> {
    s.require_both_classes()?;
    let mut idx: Vec<usize> = (0..s.len()).collect();
    idx.sort_by(|&a, &b| s.scores[a].total_cmp(&s.scores[b]));

    // Sum of mid-ranks (1-based) of the positives, doubled to stay integral.
    let mut twice_rank_sum: u64 = 0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && s.scores[idx[j + 1]] == s.scores[idx[i]] {
            j += 1;
        }
        let twice_mid = (i + 1 + j + 1) as u64;
        let pos = idx[i..=j].iter().filter(|&&t| s.labels[t] == 1).count() as u64;
        twice_rank_sum += pos * twice_mid;
        i = j + 1;
    }
    let (np, nn) = (s.n_pos() as u64, s.n_neg() as u64);
    let twice_u = twice_rank_sum - np * (np + 1);
    Ok(twice_u as f64 / (2 * np * nn) as f64)
}

/// F1 when predicting positive for `score >= threshold`; `0/0` is 0.
pub fn f1(s: &ScoredSet, threshold: f64) -> f64 {
    let (mut tp, mut fp, mut fn_) = (0usize, 0usize, 0usize);
    for (&score, &label) in s.scores.iter().zip(&s.labels) {
        match (score >= threshold, label == 1) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            _ => {}
        }
    }
    f1_from_counts(tp, fp, fn_)
}

fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Best F1 over thresholds placed at the lowest score and at every midpoint
/// between consecutive distinct scores. Ties keep the lower threshold.
pub fn best_f1(s: &ScoredSet) -> (f64, f64) {
    let mut distinct: Vec<f64> = s.scores.clone();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    let Some(&lowest) = distinct.first() else {
        return (0.0, 0.5);
    };
    let candidates = std::iter::once(lowest).chain(distinct.windows(2).map(|w| (w[0] + w[1]) / 2.0));
    let mut best = (f64::NEG_INFINITY, lowest);
    for t in candidates {
        let v = f1(s, t);
        if v > best.0 {
            best = (v, t);
        }
    }
    best
}

/// Highest recall whose empirical false-positive rate is at most `target`.
pub fn recall_at_fpr(s: &ScoredSet, target: f64) -> Result<f64> {
    s.require_both_classes()?;
    let (np, nn) = (s.n_pos() as f64, s.n_neg() as f64);
    let order = s.order_desc();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best = 0.0;
    let mut i = 0;
    // Lower the threshold one distinct score at a time.
    while i < order.len() {
        let score = s.scores[order[i]];
        while i < order.len() && s.scores[order[i]] == score {
            if s.labels[order[i]] == 1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        if fp as f64 / nn <= target {
            best = tp as f64 / np;
        } else {
            break;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub auc: f64,
    pub f1: f64,
    pub f1_threshold: f64,
    pub r_at: BTreeMap<String, f64>,
    pub n_pos: usize,
    pub n_neg: usize,
}

impl MetricReport {
    pub fn compute(s: &ScoredSet) -> Result<Self> {
        let auc = roc_auc(s)?;
        let (f1, f1_threshold) = best_f1(s);
        let mut r_at = BTreeMap::new();
        for t in FPR_TARGETS {
            r_at.insert(format!("{t}"), recall_at_fpr(s, t)?);
        }
        Ok(MetricReport {
            auc,
            f1,
            f1_threshold,
            r_at,
            n_pos: s.n_pos(),
            n_neg: s.n_neg(),
        })
    }
}
