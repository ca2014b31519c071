//! Full forward pass over one image and its exact reverse-mode gradient.

use crate::data::ImageRecord;
use crate::error::{Error, Result};

use super::attention::{attention_backward, attention_forward, AttentionTrace};
use super::layers::{dot, gelu, gelu_grad, sigmoid, LnCache};
use super::{ModelConfig, ModelParams, Readout};

#[derive(Debug, Clone)]
pub struct BlockTrace {
    pub attn: AttentionTrace,
    /// Residual stream after the attention sublayer.
    pub x_mid: Vec<f64>,
    pub ffn_normed: Vec<f64>,
    pub ffn_ln: LnCache,
    pub ffn_pre: Vec<f64>,
    pub ffn_act: Vec<f64>,
}

/// Activations of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub k: usize,
    pub z: Vec<f64>,
    pub centers: Vec<(f64, f64)>,
    pub x0: Vec<f64>,
    pub blocks: Vec<BlockTrace>,
    /// Final sequence `X_L`, `k × d`.
    pub x_l: Vec<f64>,
    pub pooled: Vec<f64>,
    /// Winning row per feature for max-pool readout.
    pub argmax: Vec<usize>,
    pub cls_pre: Vec<f64>,
    pub cls_act: Vec<f64>,
    pub logit: f64,
    pub y_hat: f64,
}

impl ForwardTrace {
    pub fn row(&self, i: usize) -> &[f64] {
        let d = self.x_l.len() / self.k;
        &self.x_l[i * d..(i + 1) * d]
    }
}

/// Runs the head on one record. Row 0 must be the anchor.
pub fn model_forward(record: &ImageRecord, params: &ModelParams, cfg: &ModelConfig) -> Result<ForwardTrace> {
    if record.dim() != cfg.a {
        return Err(Error::DimMismatch {
            expected: cfg.a,
            found: record.dim(),
        });
    }
    let z: Vec<f64> = record.rois.iter().flat_map(|r| r.embedding.iter().copied()).collect();
    forward_embeddings(&z, &record.centers(), params, cfg)
}

/// Same as [`model_forward`] on raw `k × a` embeddings and box centers.
pub fn forward_embeddings(
    z: &[f64],
    centers: &[(f64, f64)],
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<ForwardTrace> {
    let (n, d) = (centers.len(), cfg.d);
    if n == 0 {
        return Err(Error::Shape("empty RoI sequence".into()));
    }
    if z.len() != n * cfg.a {
        return Err(Error::DimMismatch {
            expected: cfg.a,
            found: z.len() / n,
        });
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("embedding"));
    }

    let x0 = params.input.forward(z, n);
    let mut x = x0.clone();
    let mut blocks = Vec::new();
    if cfg.attention {
        for bp in &params.blocks {
            let (x_mid, attn) = attention_forward(&x, centers, bp, cfg)?;
            let (ffn_normed, ffn_ln) = bp.ln2.forward(&x_mid, n);
            let ffn_pre = bp.ffn_in.forward(&ffn_normed, n);
            let ffn_act: Vec<f64> = ffn_pre.iter().map(|&u| gelu(u)).collect();
            let ffn_out = bp.ffn_out.forward(&ffn_act, n);
            x = x_mid.iter().zip(&ffn_out).map(|(a, b)| a + b).collect();
            blocks.push(BlockTrace {
                attn,
                x_mid,
                ffn_normed,
                ffn_ln,
                ffn_pre,
                ffn_act,
            });
        }
    }
    let x_l = x;

    let mut argmax = Vec::new();
    let pooled: Vec<f64> = match cfg.readout {
        Readout::Anchor => x_l[..d].to_vec(),
        Readout::MeanPool => (0..d)
            .map(|j| (0..n).map(|i| x_l[i * d + j]).sum::<f64>() / n as f64)
            .collect(),
        Readout::MaxPool => {
            argmax = (0..d)
                .map(|j| {
                    (1..n).fold(0, |best, i| if x_l[i * d + j] > x_l[best * d + j] { i } else { best })
                })
                .collect();
            argmax.iter().enumerate().map(|(j, &i)| x_l[i * d + j]).collect()
        }
    };

    let cls_pre = params.cls_hidden.forward(&pooled, 1);
    let cls_act: Vec<f64> = cls_pre.iter().map(|&u| gelu(u)).collect();
    let logit = dot(&params.cls_out.w, &cls_act) + params.cls_out.b[0];
    if !logit.is_finite() || x_l.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("activation"));
    }
    Ok(ForwardTrace {
        k: n,
        z: z.to_vec(),
        centers: centers.to_vec(),
        x0,
        blocks,
        x_l,
        pooled,
        argmax,
        cls_pre,
        cls_act,
        logit,
        y_hat: sigmoid(logit),
    })
}

/// Exact parameter gradients for upstream gradients `dL/dŷ` and (optionally)
/// `dL/dX_L`.
pub fn model_backward(
    trace: &ForwardTrace,
    grad_y_hat: f64,
    grad_x_l: Option<&[f64]>,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> ModelParams {
    let mut grads = params.zeros_like();
    model_backward_into(trace, grad_y_hat, grad_x_l, params, cfg, &mut grads);
    grads
}

/// Accumulating form of [`model_backward`].
pub fn model_backward_into(
    trace: &ForwardTrace,
    grad_y_hat: f64,
    grad_x_l: Option<&[f64]>,
    params: &ModelParams,
    cfg: &ModelConfig,
    grads: &mut ModelParams,
) {
    let (n, d) = (trace.k, cfg.d);
    let dlogit = grad_y_hat * trace.y_hat * (1.0 - trace.y_hat);

    grads.cls_out.b[0] += dlogit;
    for (g, a) in grads.cls_out.w.iter_mut().zip(&trace.cls_act) {
        *g += dlogit * a;
    }
    let dpre: Vec<f64> = params
        .cls_out
        .w
        .iter()
        .zip(&trace.cls_pre)
        .map(|(w, &u)| dlogit * w * gelu_grad(u))
        .collect();
    let dpooled = params.cls_hidden.backward(&trace.pooled, &dpre, 1, &mut grads.cls_hidden);

    let mut dx = match grad_x_l {
        Some(g) => g.to_vec(),
        None => vec![0.0; n * d],
    };
    match cfg.readout {
        Readout::Anchor => dx[..d].iter_mut().zip(&dpooled).for_each(|(g, p)| *g += p),
        Readout::MeanPool => {
            for i in 0..n {
                for j in 0..d {
                    dx[i * d + j] += dpooled[j] / n as f64;
                }
            }
        }
        Readout::MaxPool => {
            for (j, &i) in trace.argmax.iter().enumerate() {
                dx[i * d + j] += dpooled[j];
            }
        }
    }

    if cfg.attention {
        for ((bp, bg), bt) in params.blocks.iter().zip(grads.blocks.iter_mut()).zip(&trace.blocks).rev() {
            let dact = bp.ffn_out.backward(&bt.ffn_act, &dx, n, &mut bg.ffn_out);
            let dffn_pre: Vec<f64> = dact.iter().zip(&bt.ffn_pre).map(|(g, &u)| g * gelu_grad(u)).collect();
            let dnormed = bp.ffn_in.backward(&bt.ffn_normed, &dffn_pre, n, &mut bg.ffn_in);
            let dln = bp.ln2.backward(&bt.ffn_ln, &dnormed, n, &mut bg.ln2);
            let dmid: Vec<f64> = dx.iter().zip(dln).map(|(a, b)| a + b).collect();
            dx = attention_backward(&bt.attn, &dmid, &trace.centers, bp, bg, cfg);
        }
    }
    params.input.backward(&trace.z, &dx, n, &mut grads.input);
}
