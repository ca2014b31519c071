//! Rotary position embedding over box centers: angles, rotation, and the
//! fact that attention scores depend only on center offsets.
//!
//! Run with `cargo run --example rope_geometry`.

use roi_attention::model::{rope_angles, rope_rotate};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn main() {
    let (base, scale) = (10_000.0, 100.0);
    let dh = 8;
    println!("angles for position 0.5, head dim {dh}: {:?}", rope_angles(0.5, dh, base, scale));

    let q = [0.3, -1.2, 0.8, 0.5, -0.4, 0.9, 1.1, -0.7];
    let k = [1.0, 0.2, -0.6, 0.4, 0.7, -0.3, 0.1, 0.8];
    let pairs = [((0.20, 0.30), (0.60, 0.75)), ((0.30, 0.40), (0.70, 0.85)), ((0.00, 0.10), (0.40, 0.55))];
    println!("\nsame offset (+0.40, +0.45) at three absolute locations:");
    for (cq, ck) in pairs {
        let s = dot(&rope_rotate(&q, cq, base, scale), &rope_rotate(&k, ck, base, scale));
        println!("  q at {cq:?}, k at {ck:?}: score {s:+.12}");
    }

    let rotated = rope_rotate(&q, (0.37, 0.81), base, scale);
    println!("\nnorm before {:.12}, after {:.12}", dot(&q, &q).sqrt(), dot(&rotated, &rotated).sqrt());
    println!("quarter turn example: {:?}", rope_rotate(&[1.0, 0.0, 1.0, 0.0], (std::f64::consts::FRAC_PI_2, 0.0), base, 1.0));
}
