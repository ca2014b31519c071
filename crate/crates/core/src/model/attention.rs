//! Pre-norm multi-head self-attention sublayer with rotary queries and keys.
//!
//! `X′ = X + Wo · concat_h softmax(rot(q_h) rot(k_h)ᵀ / √dh) v_h`, where
//! `q, k, v` are projections of `LN(X)` and values are never rotated.

use crate::error::{Error, Result};

use super::layers::{dot, LnCache};
use super::rope::rotate_in_place;
use super::{BlockParams, ModelConfig};

#[derive(Debug, Clone)]
pub struct AttentionTrace {
    pub normed: Vec<f64>,
    pub ln: LnCache,
    /// Rotated queries and keys, `k × d`.
    pub q: Vec<f64>,
    pub k: Vec<f64>,
    pub v: Vec<f64>,
    /// `heads × k × k`, rows sum to one.
    pub probs: Vec<f64>,
    /// Concatenated head outputs before `Wo`.
    pub mixed: Vec<f64>,
}

impl AttentionTrace {
    pub fn head_probs(&self, h: usize, k: usize) -> &[f64] {
        &self.probs[h * k * k..(h + 1) * k * k]
    }
}

fn rotate_rows(x: &mut [f64], centers: &[(f64, f64)], cfg: &ModelConfig, sign: f64) {
    let dh = cfg.head_dim();
    for (r, &(cx, cy)) in centers.iter().enumerate() {
        let row = &mut x[r * cfg.d..(r + 1) * cfg.d];
        for head in row.chunks_exact_mut(dh) {
            rotate_in_place(head, cx, cy, cfg.rope_base, cfg.rope_scale, sign);
        }
    }
}

pub fn attention_forward(
    x: &[f64],
    centers: &[(f64, f64)],
    block: &BlockParams,
    cfg: &ModelConfig,
) -> Result<(Vec<f64>, AttentionTrace)> {
    let (n, d, dh) = (centers.len(), cfg.d, cfg.head_dim());
    if x.len() != n * d {
        return Err(Error::Shape(format!("attention input has {} values, expected {n}×{d}", x.len())));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("attention input"));
    }
    let (normed, ln) = block.ln1.forward(x, n);
    let mut q = block.wq.forward(&normed, n);
    let mut k = block.wk.forward(&normed, n);
    let v = block.wv.forward(&normed, n);
    if cfg.use_rope {
        rotate_rows(&mut q, centers, cfg, 1.0);
        rotate_rows(&mut k, centers, cfg, 1.0);
    }

    let scale = 1.0 / (dh as f64).sqrt();
    let mut probs = vec![0.0; cfg.heads * n * n];
    let mut mixed = vec![0.0; n * d];
    for h in 0..cfg.heads {
        let off = h * dh;
        for i in 0..n {
            let qi = &q[i * d + off..i * d + off + dh];
            let row = &mut probs[(h * n + i) * n..(h * n + i + 1) * n];
            for (j, p) in row.iter_mut().enumerate() {
                *p = dot(qi, &k[j * d + off..j * d + off + dh]) * scale;
            }
            let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for p in row.iter_mut() {
                *p = (*p - m).exp();
                z += *p;
            }
            row.iter_mut().for_each(|p| *p /= z);
            let out = &mut mixed[i * d + off..i * d + off + dh];
            for (j, &p) in row.iter().enumerate() {
                let vj = &v[j * d + off..j * d + off + dh];
                out.iter_mut().zip(vj).for_each(|(o, vv)| *o += p * vv);
            }
        }
    }

    let proj = block.wo.forward(&mixed, n);
    let out: Vec<f64> = x.iter().zip(&proj).map(|(a, b)| a + b).collect();
    Ok((
        out,
        AttentionTrace {
            normed,
            ln,
            q,
            k,
            v,
            probs,
            mixed,
        },
    ))
}

/// Backpropagates `dout` (gradient w.r.t. the sublayer output) and returns
/// the gradient w.r.t. the sublayer input.
pub(crate) fn attention_backward(
    trace: &AttentionTrace,
    dout: &[f64],
    centers: &[(f64, f64)],
    block: &BlockParams,
    grad: &mut BlockParams,
    cfg: &ModelConfig,
) -> Vec<f64> {
    let (n, d, dh) = (centers.len(), cfg.d, cfg.head_dim());
    let scale = 1.0 / (dh as f64).sqrt();
    let dmixed = block.wo.backward(&trace.mixed, dout, n, &mut grad.wo);

    let mut dq = vec![0.0; n * d];
    let mut dk = vec![0.0; n * d];
    let mut dv = vec![0.0; n * d];
    let mut dp = vec![0.0; n];
    for h in 0..cfg.heads {
        let off = h * dh;
        for i in 0..n {
            let p = &trace.probs[(h * n + i) * n..(h * n + i + 1) * n];
            let dmi = &dmixed[i * d + off..i * d + off + dh];
            for j in 0..n {
                let vj = &trace.v[j * d + off..j * d + off + dh];
                dp[j] = dot(dmi, vj);
                let dvj = &mut dv[j * d + off..j * d + off + dh];
                dvj.iter_mut().zip(dmi).for_each(|(g, m)| *g += p[j] * m);
            }
            let rowdot = dot(p, &dp);
            for j in 0..n {
                let ds = p[j] * (dp[j] - rowdot) * scale;
                if ds == 0.0 {
                    continue;
                }
                for t in 0..dh {
                    dq[i * d + off + t] += ds * trace.k[j * d + off + t];
                    dk[j * d + off + t] += ds * trace.q[i * d + off + t];
                }
            }
        }
    }
    if cfg.use_rope {
        rotate_rows(&mut dq, centers, cfg, -1.0);
        rotate_rows(&mut dk, centers, cfg, -1.0);
    }

    let mut dnormed = block.wq.backward(&trace.normed, &dq, n, &mut grad.wq);
    let from_k = block.wk.backward(&trace.normed, &dk, n, &mut grad.wk);
    let from_v = block.wv.backward(&trace.normed, &dv, n, &mut grad.wv);
    for ((g, a), b) in dnormed.iter_mut().zip(from_k).zip(from_v) {
        *g += a + b;
    }
    let dx_ln = block.ln1.backward(&trace.ln, &dnormed, n, &mut grad.ln1);
    dout.iter().zip(dx_ln).map(|(a, b)| a + b).collect()
}
