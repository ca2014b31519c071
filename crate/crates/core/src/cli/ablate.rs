//! Ablation harness: the same data and seed pushed through each readout,
//! position and loss variant, plus a linear probe on the raw anchor.

use serde::{Deserialize, Serialize};

use crate::data::ImageRecord;
use crate::error::{Error, Result};
use crate::metrics::{MetricReport, ScoredSet};
use crate::model::{ModelConfig, Readout};
use crate::train::{anchor_linear_probe, evaluate, train, ProbeConfig, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Max-pool over projected RoI embeddings, no attention, BCE only.
    Maxpool,
    /// Attention without rotary positions, anchor readout, BCE only.
    Anchor,
    AnchorRope,
    /// The full model: attention with RoPE, anchor readout, BCE + repulsion.
    AnchorRopeRcl,
    /// Logistic regression on the raw anchor embedding.
    AnchorProbe,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Maxpool,
        Variant::Anchor,
        Variant::AnchorRope,
        Variant::AnchorRopeRcl,
        Variant::AnchorProbe,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Maxpool => "maxpool",
            Variant::Anchor => "anchor",
            Variant::AnchorRope => "anchor-rope",
            Variant::AnchorRopeRcl => "anchor-rope-rcl",
            Variant::AnchorProbe => "anchor-probe",
        }
    }

    /// Model and training settings derived from the base configuration.
    pub fn configure(self, model: &ModelConfig, train: &TrainConfig) -> (ModelConfig, TrainConfig) {
        let mut m = model.clone();
        let mut t = train.clone();
        match self {
            Variant::Maxpool => {
                m.readout = Readout::MaxPool;
                m.attention = false;
                m.use_rope = false;
                t.lambda_rep = 0.0;
            }
            Variant::Anchor => {
                m.readout = Readout::Anchor;
                m.attention = true;
                m.use_rope = false;
                t.lambda_rep = 0.0;
            }
            Variant::AnchorRope => {
                m.readout = Readout::Anchor;
                m.attention = true;
                m.use_rope = true;
                t.lambda_rep = 0.0;
            }
            Variant::AnchorRopeRcl | Variant::AnchorProbe => {
                m.readout = Readout::Anchor;
                m.attention = true;
                m.use_rope = true;
            }
        }
        (m, t)
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config("variants", format!("unknown variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: String,
    pub status: String,
    pub metrics: Option<MetricReport>,
    pub best_epoch: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub n_train: usize,
    pub n_test: usize,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn any_failed(&self) -> bool {
        self.rows.iter().any(|r| r.metrics.is_none())
    }

    pub fn auc(&self, v: Variant) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.variant == v.name())
            .and_then(|r| r.metrics.as_ref())
            .map(|m| m.auc)
    }

    /// Fixed-width text rendering.
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<16} {:>7} {:>7} {:>7} {:>7} {:>7} {:>6}\n",
            "variant", "AUC", "F1", "R@0.1", "R@0.3", "R@0.5", "epoch"
        );
        for r in &self.rows {
            match &r.metrics {
                Some(m) => {
                    let ra = |k: &str| m.r_at.get(k).copied().unwrap_or(f64::NAN);
                    let epoch = r.best_epoch.map_or("-".to_string(), |e| e.to_string());
                    out += &format!(
                        "{:<16} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>7.4} {:>6}\n",
                        r.variant,
                        m.auc,
                        m.f1,
                        ra("0.1"),
                        ra("0.3"),
                        ra("0.5"),
                        epoch
                    );
                }
                None => out += &format!("{:<16} {:>7}\n", r.variant, "failed"),
            }
        }
        out
    }
}

fn run_variant(
    v: Variant,
    train_set: &[ImageRecord],
    test_set: &[ImageRecord],
    model: &ModelConfig,
    tcfg: &TrainConfig,
) -> Result<(MetricReport, Option<usize>)> {
    if v == Variant::AnchorProbe {
        let (layer, _) = anchor_linear_probe(train_set, test_set, &ProbeConfig::default())?;
        let scores = test_set
            .iter()
            .map(|r| {
                let x = &r.rois[0].embedding;
                let logit = layer.w.iter().zip(x).map(|(w, z)| w * z).sum::<f64>() + layer.b[0];
                1.0 / (1.0 + (-logit).exp())
            })
            .collect();
        let report = MetricReport::compute(&ScoredSet::new(scores, test_set.iter().map(|r| r.label).collect())?)?;
        return Ok((report, None));
    }
    let (m, t) = v.configure(model, tcfg);
    let (params, report) = train(train_set, &m, &t)?;
    Ok((evaluate(test_set, &params, &m)?, report.best_epoch))
}

/// Trains every requested variant with the shared seed. A failing variant
/// yields a `failed` row instead of aborting the table.
pub fn run_ablation(
    variants: &[Variant],
    train_set: &[ImageRecord],
    test_set: &[ImageRecord],
    model: &ModelConfig,
    tcfg: &TrainConfig,
) -> AblationTable {
    let rows = variants
        .iter()
        .map(|&v| match run_variant(v, train_set, test_set, model, tcfg) {
            Ok((m, best_epoch)) => AblationRow {
                variant: v.name().to_string(),
                status: "ok".into(),
                metrics: Some(m),
                best_epoch,
                error: None,
            },
            Err(e) => AblationRow {
                variant: v.name().to_string(),
                status: "failed".into(),
                metrics: None,
                best_epoch: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    AblationTable {
        n_train: train_set.len(),
        n_test: test_set.len(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("bogus".parse::<Variant>().is_err());
    }

    #[test]
    fn variants_toggle_the_right_axes() {
        let (m, t) = Variant::Maxpool.configure(&ModelConfig::default(), &TrainConfig::default());
        assert_eq!(m.readout, Readout::MaxPool);
        assert!(!m.attention && !m.use_rope);
        assert_eq!(t.lambda_rep, 0.0);
        let (m, t) = Variant::AnchorRopeRcl.configure(&ModelConfig::default(), &TrainConfig::default());
        assert!(m.attention && m.use_rope);
        assert_eq!(t.lambda_rep, 1.0);
    }
}
