//! The RoI aggregation head.
//!
//! Embeddings `z_1..z_k` are projected to width `d`, passed through `L`
//! pre-norm transformer blocks whose attention rotates queries and keys by the
//! box centers (2D axial RoPE), reduced to one vector by the configured
//! readout, and scored by a two-layer MLP with a sigmoid output.
//!
//! There is no autodiff engine here: every layer has a hand-written backward
//! pass that consumes the activations kept in [`ForwardTrace`].

mod attention;
mod checkpoint;
mod layers;
mod network;
mod rope;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{Stream, STREAM_PARAMS};

pub use attention::{attention_forward, AttentionTrace};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use layers::{LayerNorm, Linear};
pub use network::{forward_embeddings, model_backward, model_backward_into, model_forward, BlockTrace, ForwardTrace};
pub use rope::{rope_angles, rope_rotate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Row 0 of the final sequence (the full-image RoI).
    Anchor,
    MeanPool,
    MaxPool,
}

impl std::str::FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anchor" => Ok(Readout::Anchor),
            "meanpool" => Ok(Readout::MeanPool),
            "maxpool" => Ok(Readout::MaxPool),
            other => Err(Error::config("readout", format!("unknown readout {other:?}"))),
        }
    }
}

impl std::fmt::Display for Readout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Readout::Anchor => "anchor",
            Readout::MeanPool => "meanpool",
            Readout::MaxPool => "maxpool",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Input embedding width.
    pub a: usize,
    /// Model width.
    pub d: usize,
    pub heads: usize,
    pub layers: usize,
    pub mlp_ratio: usize,
    pub rope_base: f64,
    /// Maps `[0,1]` box coordinates to rotary positions.
    pub rope_scale: f64,
    pub readout: Readout,
    pub use_rope: bool,
    /// When false the transformer blocks are bypassed and the readout sees
    /// the projected embeddings directly.
    pub attention: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            a: 32,
            d: 64,
            heads: 4,
            layers: 2,
            mlp_ratio: 4,
            rope_base: 10_000.0,
            rope_scale: 100.0,
            readout: Readout::Anchor,
            use_rope: true,
            attention: true,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.a == 0 {
            return Err(Error::config("a", "must be ≥ 1"));
        }
        if self.d < 2 || self.heads == 0 || self.d % self.heads != 0 {
            return Err(Error::config("d", format!("d={} must be divisible by heads={}", self.d, self.heads)));
        }
        if self.head_dim() % 4 != 0 {
            return Err(Error::config(
                "heads",
                format!("head dim {} must be divisible by 4", self.head_dim()),
            ));
        }
        if self.layers < 1 {
            return Err(Error::config("layers", "L ≥ 1 required"));
        }
        if self.mlp_ratio < 1 {
            return Err(Error::config("mlp_ratio", "must be ≥ 1"));
        }
        if !(self.rope_base > 1.0 && self.rope_base.is_finite()) {
            return Err(Error::config("rope_base", "must be finite and > 1"));
        }
        if !self.rope_scale.is_finite() {
            return Err(Error::config("rope_scale", "must be finite"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        if self.heads == 0 {
            0
        } else {
            self.d / self.heads
        }
    }

    pub fn hidden(&self) -> usize {
        self.d * self.mlp_ratio
    }

    pub fn head_hidden(&self) -> usize {
        self.d / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlockParams {
    pub ln1: LayerNorm,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub ln2: LayerNorm,
    pub ffn_in: Linear,
    pub ffn_out: Linear,
}

/// Every learnable tensor of the head. Gradients use the same type.
///
/// Nothing here depends on the sequence length: position enters only through
/// the rotary maps applied to queries and keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub input: Linear,
    pub blocks: Vec<BlockParams>,
    pub cls_hidden: Linear,
    pub cls_out: Linear,
}

impl ModelParams {
    pub fn zeros(cfg: &ModelConfig) -> Self {
        let d = cfg.d;
        let block = BlockParams {
            ln1: LayerNorm::zeros(d),
            wq: Linear::zeros(d, d, false),
            wk: Linear::zeros(d, d, false),
            wv: Linear::zeros(d, d, false),
            wo: Linear::zeros(d, d, false),
            ln2: LayerNorm::zeros(d),
            ffn_in: Linear::zeros(d, cfg.hidden(), true),
            ffn_out: Linear::zeros(cfg.hidden(), d, true),
        };
        ModelParams {
            input: Linear::zeros(cfg.a, d, true),
            blocks: vec![block; cfg.layers],
            cls_hidden: Linear::zeros(d, cfg.head_hidden(), true),
            cls_out: Linear::zeros(cfg.head_hidden(), 1, true),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.for_each_mut(|_, t| t.iter_mut().for_each(|v| *v = 0.0));
        z
    }

    /// Visits every tensor as `(name, shape, data)` in a fixed order.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out = Vec::new();
        push_linear(&mut out, "input", &self.input);
        for (i, b) in self.blocks.iter().enumerate() {
            push_ln(&mut out, &format!("blocks.{i}.ln1"), &b.ln1);
            push_linear(&mut out, &format!("blocks.{i}.attn.wq"), &b.wq);
            push_linear(&mut out, &format!("blocks.{i}.attn.wk"), &b.wk);
            push_linear(&mut out, &format!("blocks.{i}.attn.wv"), &b.wv);
            push_linear(&mut out, &format!("blocks.{i}.attn.wo"), &b.wo);
            push_ln(&mut out, &format!("blocks.{i}.ln2"), &b.ln2);
            push_linear(&mut out, &format!("blocks.{i}.ffn.in"), &b.ffn_in);
            push_linear(&mut out, &format!("blocks.{i}.ffn.out"), &b.ffn_out);
        }
        push_linear(&mut out, "cls.hidden", &self.cls_hidden);
        push_linear(&mut out, "cls.out", &self.cls_out);
        out
    }

    /// Mutable counterpart of [`ModelParams::tensors`], same order.
    pub fn for_each_mut(&mut self, mut f: impl FnMut(&str, &mut Vec<f64>)) {
        let lin = |name: &str, l: &mut Linear, f: &mut dyn FnMut(&str, &mut Vec<f64>)| {
            f(&format!("{name}.weight"), &mut l.w);
            if l.has_bias() {
                f(&format!("{name}.bias"), &mut l.b);
            }
        };
        let ln = |name: &str, l: &mut LayerNorm, f: &mut dyn FnMut(&str, &mut Vec<f64>)| {
            f(&format!("{name}.gain"), &mut l.gain);
            f(&format!("{name}.bias"), &mut l.bias);
        };
        lin("input", &mut self.input, &mut f);
        for (i, b) in self.blocks.iter_mut().enumerate() {
            ln(&format!("blocks.{i}.ln1"), &mut b.ln1, &mut f);
            lin(&format!("blocks.{i}.attn.wq"), &mut b.wq, &mut f);
            lin(&format!("blocks.{i}.attn.wk"), &mut b.wk, &mut f);
            lin(&format!("blocks.{i}.attn.wv"), &mut b.wv, &mut f);
            lin(&format!("blocks.{i}.attn.wo"), &mut b.wo, &mut f);
            ln(&format!("blocks.{i}.ln2"), &mut b.ln2, &mut f);
            lin(&format!("blocks.{i}.ffn.in"), &mut b.ffn_in, &mut f);
            lin(&format!("blocks.{i}.ffn.out"), &mut b.ffn_out, &mut f);
        }
        lin("cls.hidden", &mut self.cls_hidden, &mut f);
        lin("cls.out", &mut self.cls_out, &mut f);
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|(_, _, t)| t.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, _, t)| t.iter().all(|v| v.is_finite()))
    }

    /// Flattened copy of all tensors in visiting order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.tensors().into_iter().flat_map(|(_, _, t)| t.iter().copied()).collect()
    }

    pub fn from_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.num_params() {
            return Err(Error::Shape(format!(
                "flat vector has {} entries, params have {}",
                flat.len(),
                self.num_params()
            )));
        }
        let mut off = 0;
        self.for_each_mut(|_, t| {
            let n = t.len();
            t.copy_from_slice(&flat[off..off + n]);
            off += n;
        });
        Ok(())
    }
}

fn push_linear<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f64])>, name: &str, l: &'a Linear) {
    out.push((format!("{name}.weight"), vec![l.out, l.inp], &l.w));
    if l.has_bias() {
        out.push((format!("{name}.bias"), vec![l.out], &l.b));
    }
}

fn push_ln<'a>(out: &mut Vec<(String, Vec<usize>, &'a [f64])>, name: &str, l: &'a LayerNorm) {
    out.push((format!("{name}.gain"), vec![l.gain.len()], &l.gain));
    out.push((format!("{name}.bias"), vec![l.bias.len()], &l.bias));
}

/// Deterministic initialization: weights `U(-1/√fan_in, 1/√fan_in)`, biases
/// zero, layer-norm gains one, and a zero final classifier layer so a fresh
/// model predicts exactly 0.5.
pub fn init_params(cfg: &ModelConfig, seed: u64) -> Result<ModelParams> {
    cfg.validate()?;
    let mut p = ModelParams::zeros(cfg);
    let mut s = Stream::new(seed, STREAM_PARAMS);
    let mut fill = |l: &mut Linear| {
        let bound = 1.0 / (l.inp as f64).sqrt();
        l.w.iter_mut().for_each(|w| *w = s.uniform_range(-bound, bound));
    };
    fill(&mut p.input);
    for b in &mut p.blocks {
        b.ln1.gain.fill(1.0);
        b.ln2.gain.fill(1.0);
        for l in [&mut b.wq, &mut b.wk, &mut b.wv, &mut b.wo, &mut b.ffn_in, &mut b.ffn_out] {
            fill(l);
        }
    }
    fill(&mut p.cls_hidden);
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let cfg = ModelConfig::default();
        assert_eq!(init_params(&cfg, 3).unwrap(), init_params(&cfg, 3).unwrap());
        assert_ne!(init_params(&cfg, 3).unwrap(), init_params(&cfg, 4).unwrap());
    }

    #[test]
    fn head_dim_divisibility() {
        let cfg = ModelConfig {
            d: 64,
            heads: 4,
            ..Default::default()
        };
        assert_eq!(cfg.head_dim(), 16);
        assert!(cfg.validate().is_ok());
        let bad = ModelConfig {
            d: 24,
            heads: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ModelConfig {
            d: 30,
            heads: 4,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn final_layer_starts_at_zero() {
        let p = init_params(&ModelConfig::default(), 0).unwrap();
        assert!(p.cls_out.w.iter().all(|&w| w == 0.0));
        assert!(p.cls_out.b.iter().all(|&w| w == 0.0));
        assert!(p.cls_hidden.w.iter().any(|&w| w != 0.0));
    }

    #[test]
    fn no_positional_tables() {
        // Parameter count is a closed form in (a, d, L, mlp_ratio); nothing
        // scales with the number of RoIs.
        let cfg = ModelConfig::default();
        let p = init_params(&cfg, 0).unwrap();
        let (a, d, h, c) = (cfg.a, cfg.d, cfg.hidden(), cfg.head_hidden());
        let block = 2 * d + 4 * d * d + 2 * d + (h * d + h) + (d * h + d);
        let expected = (a * d + d) + cfg.layers * block + (d * c + c) + (c + 1);
        assert_eq!(p.num_params(), expected);
        for (name, _, _) in p.tensors() {
            assert!(!name.contains("pos"), "{name}");
        }
    }

    #[test]
    fn flat_round_trip() {
        let cfg = ModelConfig::default();
        let p = init_params(&cfg, 1).unwrap();
        let mut q = ModelParams::zeros(&cfg);
        q.from_flat(&p.to_flat()).unwrap();
        assert_eq!(p, q);
        assert!(q.from_flat(&[0.0]).is_err());
    }
}
