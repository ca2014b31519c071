//! Runs every ablation variant on one synthetic split and prints the table.
//!
//! Run with `cargo run --release --example ablation -- [n_train] [epochs]`.

use roi_attention::cli::ablate::{run_ablation, Variant};
use roi_attention::data::{generate_range, generate_synthetic, SynthConfig};
use roi_attention::model::ModelConfig;
use roi_attention::train::TrainConfig;

fn main() -> roi_attention::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(1000);
    let epochs: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(15);
    let synth = SynthConfig {
        n,
        ..SynthConfig::default()
    };
    let train_set = generate_synthetic(&synth)?;
    let test_set = generate_range(&synth, n, 500)?;
    let tcfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let table = run_ablation(&Variant::ALL, &train_set, &test_set, &ModelConfig::default(), &tcfg);
    print!("{}", table.render());
    Ok(())
}
