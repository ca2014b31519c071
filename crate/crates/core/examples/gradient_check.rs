//! Finite-difference check of the hand-derived gradients, once clean and
//! once with a deliberately sign-flipped analytic gradient.
//!
//! Run with `cargo run --release --example gradient_check`.

use roi_attention::loss::LossConfig;
use roi_attention::model::{ModelConfig, Readout};
use roi_attention::train::{gradcheck, Fault};

fn main() -> roi_attention::Result<()> {
    let loss = LossConfig::default();
    for readout in [Readout::Anchor, Readout::MeanPool, Readout::MaxPool] {
        let cfg = ModelConfig {
            a: 16,
            d: 16,
            heads: 2,
            layers: 1,
            readout,
            ..ModelConfig::default()
        };
        for seed in 0..3 {
            let r = gradcheck(&cfg, &loss, 4, seed, None)?;
            println!(
                "{readout:<8} seed {seed}: {} params, max rel error {:.2e} ({})",
                r.n_params,
                r.max_rel_error,
                if r.passed { "pass" } else { "FAIL" }
            );
        }
    }
    let cfg = ModelConfig {
        a: 16,
        d: 16,
        heads: 2,
        layers: 1,
        ..ModelConfig::default()
    };
    let r = gradcheck(&cfg, &loss, 4, 0, Some(Fault::SignFlip))?;
    println!(
        "sign-flip fault: max rel error {:.3} at {} -> {}",
        r.max_rel_error,
        r.worst_param,
        if r.passed { "pass (unexpected)" } else { "detected" }
    );
    Ok(())
}
