//! Binary cross-entropy, the repulsive contrastive term and their sum.
//!
//! The repulsive term looks only at the non-anchor rows of the final
//! sequence: with `e_i` the unit-normalized rows `1..k` and `K = k - 1`,
//! `L_rep = 1/(K(K-1)) Σ_{i≠j} cos(e_i, e_j)²`, averaged over the batch.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossConfig {
    pub lambda_rep: f64,
    pub eps: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            lambda_rep: 1.0,
            eps: 1e-7,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_rep >= 0.0 && self.lambda_rep.is_finite()) {
            return Err(Error::config("lambda_rep", "must be finite and ≥ 0"));
        }
        if !(self.eps > 0.0 && self.eps <= 1e-3) {
            return Err(Error::config("eps", "must lie in (0, 1e-3]"));
        }
        Ok(())
    }
}

/// `-[y ln ŷ + (1-y) ln(1-ŷ)]` with `ŷ` clamped to `[eps, 1-eps]`.
pub fn bce(y_hat: f64, y: u8, eps: f64) -> f64 {
    let p = y_hat.clamp(eps, 1.0 - eps);
    if y == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

/// `dL/dŷ`; zero where the clamp is active.
pub fn bce_grad(y_hat: f64, y: u8, eps: f64) -> f64 {
    if y_hat < eps || y_hat > 1.0 - eps {
        return 0.0;
    }
    if y == 1 {
        -1.0 / y_hat
    } else {
        1.0 / (1.0 - y_hat)
    }
}

/// Repulsive loss of one `k × d` sequence and its gradient w.r.t. every row.
/// The anchor row 0 receives an exactly zero gradient.
pub fn repulsive_single(x_l: &[f64], k: usize, eps: f64) -> Result<(f64, Vec<f64>)> {
    if k < 3 {
        return Err(Error::TooFewRois);
    }
    let d = x_l.len() / k;
    let big_k = k - 1;
    let rows: Vec<&[f64]> = (1..k).map(|i| &x_l[i * d..(i + 1) * d]).collect();
    let norms: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt().max(eps))
        .collect();
    let unit: Vec<Vec<f64>> = rows
        .iter()
        .zip(&norms)
        .map(|(r, n)| r.iter().map(|v| v / n).collect())
        .collect();

    let norm = 1.0 / (big_k * (big_k - 1)) as f64;
    let mut cos = vec![0.0; big_k * big_k];
    let mut loss = 0.0;
    for i in 0..big_k {
        for j in 0..big_k {
            if i != j {
                let c: f64 = unit[i].iter().zip(&unit[j]).map(|(a, b)| a * b).sum();
                cos[i * big_k + j] = c;
                loss += c * c;
            }
        }
    }
    loss *= norm;

    let mut grad = vec![0.0; k * d];
    for i in 0..big_k {
        // dL/de_i counts both ordered pairs (i,j) and (j,i).
        let mut ge = vec![0.0; d];
        for j in 0..big_k {
            if i != j {
                let w = 4.0 * norm * cos[i * big_k + j];
                ge.iter_mut().zip(&unit[j]).for_each(|(g, e)| *g += w * e);
            }
        }
        let row = &mut grad[(i + 1) * d..(i + 2) * d];
        let raw_norm = rows[i].iter().map(|v| v * v).sum::<f64>().sqrt();
        if raw_norm > eps {
            let proj: f64 = ge.iter().zip(&unit[i]).map(|(g, e)| g * e).sum();
            for t in 0..d {
                row[t] = (ge[t] - proj * unit[i][t]) / norms[i];
            }
        } else {
            for t in 0..d {
                row[t] = ge[t] / eps;
            }
        }
    }
    Ok((loss, grad))
}

/// Batch mean of [`repulsive_single`] over `B` sequences of shape `k × d`.
pub fn repulsive_loss(batch: &[&[f64]], k: usize, eps: f64) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for x in batch {
        total += repulsive_single(x, k, eps)?.0;
    }
    Ok(total / batch.len() as f64)
}

/// Per-example objective with its upstream gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub bce: f64,
    pub repulsive: f64,
    pub grad_y_hat: f64,
    /// `None` when the repulsive weight is zero.
    pub grad_x_l: Option<Vec<f64>>,
}

/// `bce + lambda_rep · repulsive` for one image.
pub fn total_loss(y_hat: f64, y: u8, x_l: &[f64], k: usize, cfg: &LossConfig) -> Result<LossValue> {
    let b = bce(y_hat, y, cfg.eps);
    let grad_y_hat = bce_grad(y_hat, y, cfg.eps);
    if cfg.lambda_rep == 0.0 {
        return Ok(LossValue {
            value: b,
            bce: b,
            repulsive: 0.0,
            grad_y_hat,
            grad_x_l: None,
        });
    }
    let (rep, mut g) = repulsive_single(x_l, k, cfg.eps)?;
    g.iter_mut().for_each(|v| *v *= cfg.lambda_rep);
    Ok(LossValue {
        value: b + cfg.lambda_rep * rep,
        bce: b,
        repulsive: rep,
        grad_y_hat,
        grad_x_l: Some(g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::LN_2;

    const EPS: f64 = 1e-7;

    #[test]
    fn bce_examples() {
        assert!(bce(1.0 - EPS, 1, EPS) < 2e-7);
        assert!((bce(0.5, 1, EPS) - LN_2).abs() < 1e-12);
        assert!((bce(0.9, 0, EPS) - 2.302_585_092_994_045).abs() < 1e-9);
        assert!(bce(0.0, 1, EPS).is_finite());
    }

    #[test]
    fn repulsive_examples() {
        // identical non-anchor rows
        let x = [9.0, 9.0, 1.0, 2.0, 1.0, 2.0, 2.0, 4.0];
        assert!((repulsive_single(&x, 4, EPS).unwrap().0 - 1.0).abs() < 1e-12);
        // orthogonal non-anchor rows
        let x = [1.0, 1.0, 0.0, 0.0, 3.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 5.0, 0.0];
        assert!(repulsive_single(&x, 4, EPS).unwrap().0.abs() < 1e-12);
        // K = 2 with cos = 0.5
        let x = [0.3, -0.2, 1.0, 0.0, 0.5, 0.75f64.sqrt()];
        assert!((repulsive_single(&x, 3, EPS).unwrap().0 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn repulsive_needs_two_fine_rows() {
        let err = repulsive_single(&[1.0, 0.0, 0.0, 1.0], 2, EPS).unwrap_err();
        assert_eq!(err.to_string(), "need ≥2 non-anchor RoIs");
    }

    #[test]
    fn anchor_gradient_is_exactly_zero() {
        let x: Vec<f64> = (0..20).map(|i| ((i * 7) % 11) as f64 - 5.0).collect();
        let (_, g) = repulsive_single(&x, 5, EPS).unwrap();
        assert!(g[..4].iter().all(|&v| v == 0.0));
        assert!(g[4..].iter().any(|&v| v != 0.0));
    }

    #[test]
    fn total_loss_examples() {
        let x = [9.0, 9.0, 1.0, 2.0, 1.0, 2.0];
        let off = LossConfig {
            lambda_rep: 0.0,
            eps: EPS,
        };
        assert_eq!(total_loss(0.3, 1, &x, 3, &off).unwrap().value, bce(0.3, 1, EPS));
        let on = LossConfig {
            lambda_rep: 1.0,
            eps: EPS,
        };
        let v = total_loss(0.5, 1, &x, 3, &on).unwrap().value;
        assert!((v - (LN_2 + 1.0)).abs() < 1e-12, "{v}");
    }

    #[test]
    fn batch_mean() {
        let same = [0.0, 1.0, 1.0, 0.0, 1.0, 0.0];
        let orth = [0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
        let v = repulsive_loss(&[&same, &orth], 3, EPS).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn repulsive_is_bounded_and_scale_free(
            x in proptest::collection::vec(-5.0f64..5.0, 20),
            s in 0.1f64..10.0,
        ) {
            let (v, _) = repulsive_single(&x, 5, EPS).unwrap();
            proptest::prop_assert!((0.0..=1.0 + 1e-12).contains(&v));
            let mut y = x.clone();
            y[8..12].iter_mut().for_each(|t| *t *= s);
            let (w, _) = repulsive_single(&y, 5, EPS).unwrap();
            proptest::prop_assert!((v - w).abs() < 1e-9);
        }

        #[test]
        fn bce_is_convex(a in 0.001f64..0.999, b in 0.001f64..0.999, y in 0u8..2) {
            let mid = bce((a + b) / 2.0, y, EPS);
            proptest::prop_assert!(mid <= (bce(a, y, EPS) + bce(b, y, EPS)) / 2.0 + 1e-12);
        }
    }
}
