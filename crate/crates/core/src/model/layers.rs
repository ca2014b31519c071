//! Dense, layer-norm and GELU primitives with their backward passes.
//!
//! Activations are row-major `rows × width` slices.

use std::f64::consts::PI;

pub(crate) const LN_EPS: f64 = 1e-5;

/// `y = x Wᵀ + b` with `W` stored `out × inp`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Vec<f64>,
    /// Empty when the layer has no bias.
    pub b: Vec<f64>,
    pub inp: usize,
    pub out: usize,
}

impl Linear {
    pub fn zeros(inp: usize, out: usize, bias: bool) -> Self {
        Linear {
            w: vec![0.0; inp * out],
            b: if bias { vec![0.0; out] } else { Vec::new() },
            inp,
            out,
        }
    }

    pub fn has_bias(&self) -> bool {
        !self.b.is_empty()
    }

    pub(crate) fn forward(&self, x: &[f64], rows: usize) -> Vec<f64> {
        debug_assert_eq!(x.len(), rows * self.inp);
        let mut y = vec![0.0; rows * self.out];
        for r in 0..rows {
            let xr = &x[r * self.inp..(r + 1) * self.inp];
            let yr = &mut y[r * self.out..(r + 1) * self.out];
            for (j, yj) in yr.iter_mut().enumerate() {
                let wj = &self.w[j * self.inp..(j + 1) * self.inp];
                *yj = dot(wj, xr) + self.b.get(j).copied().unwrap_or(0.0);
            }
        }
        y
    }

    /// Accumulates parameter gradients into `grad` and returns `dL/dx`.
    pub(crate) fn backward(&self, x: &[f64], dy: &[f64], rows: usize, grad: &mut Linear) -> Vec<f64> {
        let mut dx = vec![0.0; rows * self.inp];
        for r in 0..rows {
            let xr = &x[r * self.inp..(r + 1) * self.inp];
            let dyr = &dy[r * self.out..(r + 1) * self.out];
            let dxr = &mut dx[r * self.inp..(r + 1) * self.inp];
            for (j, &g) in dyr.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let wj = &self.w[j * self.inp..(j + 1) * self.inp];
                let gw = &mut grad.w[j * self.inp..(j + 1) * self.inp];
                for i in 0..self.inp {
                    gw[i] += g * xr[i];
                    dxr[i] += g * wj[i];
                }
                if let Some(gb) = grad.b.get_mut(j) {
                    *gb += g;
                }
            }
        }
        dx
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub gain: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Per-row normalized input and inverse standard deviation.
#[derive(Debug, Clone)]
pub struct LnCache {
    pub xhat: Vec<f64>,
    pub inv_std: Vec<f64>,
}

impl LayerNorm {
    pub fn zeros(d: usize) -> Self {
        LayerNorm {
            gain: vec![0.0; d],
            bias: vec![0.0; d],
        }
    }

    pub(crate) fn forward(&self, x: &[f64], rows: usize) -> (Vec<f64>, LnCache) {
        let d = self.gain.len();
        let mut y = vec![0.0; rows * d];
        let mut xhat = vec![0.0; rows * d];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let xr = &x[r * d..(r + 1) * d];
            let mean = xr.iter().sum::<f64>() / d as f64;
            let var = xr.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let inv = 1.0 / (var + LN_EPS).sqrt();
            inv_std[r] = inv;
            for i in 0..d {
                let h = (xr[i] - mean) * inv;
                xhat[r * d + i] = h;
                y[r * d + i] = self.gain[i] * h + self.bias[i];
            }
        }
        (y, LnCache { xhat, inv_std })
    }

    pub(crate) fn backward(&self, cache: &LnCache, dy: &[f64], rows: usize, grad: &mut LayerNorm) -> Vec<f64> {
        let d = self.gain.len();
        let mut dx = vec![0.0; rows * d];
        let mut dxhat = vec![0.0; d];
        for r in 0..rows {
            let xh = &cache.xhat[r * d..(r + 1) * d];
            let dyr = &dy[r * d..(r + 1) * d];
            for i in 0..d {
                grad.gain[i] += dyr[i] * xh[i];
                grad.bias[i] += dyr[i];
                dxhat[i] = dyr[i] * self.gain[i];
            }
            let m1 = dxhat.iter().sum::<f64>() / d as f64;
            let m2 = dot(&dxhat, xh) / d as f64;
            let inv = cache.inv_std[r];
            for i in 0..d {
                dx[r * d + i] = inv * (dxhat[i] - m1 - xh[i] * m2);
            }
        }
        dx
    }
}

const GELU_C: f64 = 0.044_715;

/// Tanh-approximated GELU.
pub(crate) fn gelu(x: f64) -> f64 {
    let k = (2.0 / PI).sqrt();
    0.5 * x * (1.0 + (k * (x + GELU_C * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let k = (2.0 / PI).sqrt();
    let t = (k * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * k * (1.0 + 3.0 * GELU_C * x * x)
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
