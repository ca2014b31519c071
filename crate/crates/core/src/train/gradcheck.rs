//! Central finite-difference check of the hand-written gradients.

use serde::{Deserialize, Serialize};

use crate::data::{ImageRecord, RoiRecord};
use crate::error::Result;
use crate::geometry::{BBox, RoiProposal};
use crate::loss::{total_loss, LossConfig};
use crate::model::{init_params, model_backward, model_forward, ModelConfig, ModelParams};
use crate::rng::Stream;

pub const FD_STEP: f64 = 1e-5;
pub const DENOM_FLOOR: f64 = 1e-8;
pub const PASS_THRESHOLD: f64 = 1e-4;

/// Deliberate corruption of the analytic gradient, used to show the check
/// can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fault {
    SignFlip,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradcheckReport {
    pub seed: u64,
    pub n_params: usize,
    pub max_rel_error: f64,
    pub worst_param: String,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub passed: bool,
}

/// A random record with a unit anchor box and `k - 1` random fine boxes.
pub fn random_record(k: usize, a: usize, seed: u64) -> ImageRecord {
    let mut s = Stream::new(seed, 0x6772_6164);
    let mut rois = Vec::with_capacity(k);
    for i in 0..k {
        let bbox = if i == 0 {
            BBox::unit()
        } else {
            let w = s.uniform_range(0.05, 0.4);
            let h = s.uniform_range(0.05, 0.4);
            let x1 = s.uniform_range(0.0, 1.0 - w);
            let y1 = s.uniform_range(0.0, 1.0 - h);
            BBox::new(x1, y1, x1 + w, y1 + h).expect("box inside unit square")
        };
        rois.push(RoiRecord {
            proposal: RoiProposal {
                bbox,
                confidence: s.uniform(),
            },
            embedding: (0..a).map(|_| s.normal()).collect(),
            padded: false,
        });
    }
    ImageRecord {
        id: format!("gradcheck-{seed}"),
        label: u8::from(s.uniform() < 0.5),
        rois,
    }
}

/// Initialized parameters with every entry jittered, so the zero classifier
/// layer does not hide gradients upstream of it.
pub fn random_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    let mut p = init_params(cfg, seed)?;
    let mut s = Stream::new(seed, 0x6a69_7474);
    p.for_each_mut(|_, t| t.iter_mut().for_each(|v| *v += 0.2 * s.normal()));
    Ok(p)
}

fn objective(rec: &ImageRecord, p: &ModelParams, mcfg: &ModelConfig, lcfg: &LossConfig) -> Result<f64> {
    let tr = model_forward(rec, p, mcfg)?;
    Ok(total_loss(tr.y_hat, rec.label, &tr.x_l, tr.k, lcfg)?.value)
}

/// Compares `model_backward ∘ total_loss` against central differences on
/// every parameter. Relative error is `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn gradcheck(
    mcfg: &ModelConfig,
    lcfg: &LossConfig,
    k: usize,
    seed: u64,
    fault: Option<Fault>,
) -> Result<GradcheckReport> {
    mcfg.validate()?;
    lcfg.validate()?;
    let rec = random_record(k, mcfg.a, seed);
    let params = random_params(mcfg, seed)?;

    let tr = model_forward(&rec, &params, mcfg)?;
    let lv = total_loss(tr.y_hat, rec.label, &tr.x_l, tr.k, lcfg)?;
    let grads = model_backward(&tr, lv.grad_y_hat, lv.grad_x_l.as_deref(), &params, mcfg);
    let mut analytic = grads.to_flat();
    if fault == Some(Fault::SignFlip) {
        analytic.iter_mut().for_each(|g| *g = -*g);
    }
    let names: Vec<(String, usize)> = params.tensors().into_iter().map(|(n, _, t)| (n, t.len())).collect();

    let base = params.to_flat();
    let mut probe = params.clone();
    let mut worst = (0.0f64, 0usize, 0.0, 0.0);
    let mut flat = base.clone();
    for i in 0..base.len() {
        flat[i] = base[i] + FD_STEP;
        probe.from_flat(&flat)?;
        let up = objective(&rec, &probe, mcfg, lcfg)?;
        flat[i] = base[i] - FD_STEP;
        probe.from_flat(&flat)?;
        let down = objective(&rec, &probe, mcfg, lcfg)?;
        flat[i] = base[i];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[i];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(DENOM_FLOOR);
        if rel > worst.0 {
            worst = (rel, i, a, numeric);
        }
    }

    let mut offset = 0;
    let mut worst_param = String::new();
    for (name, len) in names {
        if worst.1 < offset + len {
            worst_param = format!("{name}[{}]", worst.1 - offset);
            break;
        }
        offset += len;
    }
    Ok(GradcheckReport {
        seed,
        n_params: base.len(),
        max_rel_error: worst.0,
        worst_param,
        worst_analytic: worst.2,
        worst_numeric: worst.3,
        passed: worst.0 < PASS_THRESHOLD,
    })
}
