//! 2D axial rotary position embedding over box centers.
//!
//! A head vector of width `dh` is split in two halves. The first half is
//! rotated pairwise by angles derived from `cx`, the second by `cy`; pair `t`
//! of a half uses `θ_t = pos · scale · base^(-4t/dh)`. Each rotation is planar
//! and orthogonal, so `q·k` after rotation depends only on the center offset.

/// Angles for one axis position: `dh / 4` values.
pub fn rope_angles(pos: f64, head_dim: usize, base: f64, scale: f64) -> Vec<f64> {
    (0..head_dim / 4)
        .map(|t| pos * scale * base.powf(-4.0 * t as f64 / head_dim as f64))
        .collect()
}

/// Rotates `v` (one head) in place. `sign = -1.0` applies the inverse map.
pub(crate) fn rotate_in_place(v: &mut [f64], cx: f64, cy: f64, base: f64, scale: f64, sign: f64) {
    let dh = v.len();
    let half = dh / 2;
    for (axis, pos) in [(0, cx), (1, cy)] {
        let seg = &mut v[axis * half..(axis + 1) * half];
        for (t, theta) in rope_angles(pos, dh, base, scale).into_iter().enumerate() {
            let (s, c) = (sign * theta).sin_cos();
            let (x0, x1) = (seg[2 * t], seg[2 * t + 1]);
            seg[2 * t] = x0 * c - x1 * s;
            seg[2 * t + 1] = x0 * s + x1 * c;
        }
    }
}

/// Rotated copy of a single head vector; `vec.len()` must be a multiple of 4.
pub fn rope_rotate(vec: &[f64], center: (f64, f64), base: f64, scale: f64) -> Vec<f64> {
    assert!(vec.len() % 4 == 0, "head dim {} not divisible by 4", vec.len());
    let mut out = vec.to_vec();
    rotate_in_place(&mut out, center.0, center.1, base, scale, 1.0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn norm(v: &[f64]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn origin_is_identity() {
        let v = [0.3, -1.2, 0.5, 2.0, 0.1, 0.0, -0.4, 0.9];
        assert_eq!(rope_rotate(&v, (0.0, 0.0), 10_000.0, 100.0), v.to_vec());
    }

    #[test]
    fn quarter_turn_on_first_pair() {
        // scale·cx = π/2 makes θ₀ = π/2; cy = 0 leaves the second half alone.
        let out = rope_rotate(&[1.0, 0.0, 1.0, 0.0], (FRAC_PI_2, 0.0), 10_000.0, 1.0);
        let expected = [0.0, 1.0, 1.0, 0.0];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() < 1e-15, "{out:?}");
        }
    }

    #[test]
    fn inverse_undoes_rotation() {
        let v = vec![0.3, -1.2, 0.5, 2.0, 0.1, 0.7, -0.4, 0.9];
        let mut w = rope_rotate(&v, (0.37, 0.81), 10_000.0, 100.0);
        rotate_in_place(&mut w, 0.37, 0.81, 10_000.0, 100.0, -1.0);
        for (a, b) in v.iter().zip(&w) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn relative_offsets_only() {
        let q = [0.2, 0.9, -0.5, 1.1, 0.3, -0.8, 0.6, 0.05];
        let k = [1.0, -0.3, 0.4, 0.2, -0.9, 0.5, 0.1, 0.7];
        let logit = |pq: (f64, f64), pk: (f64, f64)| {
            let a = rope_rotate(&q, pq, 10_000.0, 100.0);
            let b = rope_rotate(&k, pk, 10_000.0, 100.0);
            a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>()
        };
        let base = logit((0.2, 0.3), (0.6, 0.1));
        let shifted = logit((0.3, 0.4), (0.7, 0.2));
        assert!((base - shifted).abs() < 1e-10);
    }

    proptest::proptest! {
        #[test]
        fn norm_is_preserved(
            v in proptest::collection::vec(-10.0f64..10.0, 16),
            cx in -1.0f64..2.0,
            cy in -1.0f64..2.0,
        ) {
            let out = rope_rotate(&v, (cx, cy), 10_000.0, 100.0);
            proptest::prop_assert!((norm(&out) - norm(&v)).abs() < 1e-9);
        }
    }
}
