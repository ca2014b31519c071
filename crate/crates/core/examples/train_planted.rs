//! Trains the full model (anchor readout, RoPE, repulsive loss) on planted
//! synthetic data, evaluates on held-out images and round-trips the
//! checkpoint.
//!
//! Run with `cargo run --release --example train_planted -- [n_train] [epochs]`.

use roi_attention::data::{generate_range, generate_synthetic, SynthConfig};
use roi_attention::model::{load_checkpoint, save_checkpoint, ModelConfig};
use roi_attention::train::{evaluate, predict, train, TrainConfig};

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
    let model = ModelConfig::default();
    let tcfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };

    let start = std::time::Instant::now();
    let (params, report) = train(&train_set, &model, &tcfg)?;
    println!("trained {} params in {:.1?}", params.num_params(), start.elapsed());
    for (e, (l, a)) in report.train_loss.iter().zip(&report.val_auc).enumerate() {
        println!("epoch {e:>2}: loss {l:.4}  val AUC {a:.4}");
    }
    println!("best epoch {:?}, early stop {}", report.best_epoch, report.stopped_early);

    let metrics = evaluate(&test_set, &params, &model)?;
    println!("held-out AUC {:.4}, F1 {:.4}", metrics.auc, metrics.f1);

    let path = std::env::temp_dir().join("roi_planted_checkpoint.json");
    save_checkpoint(&path, &model, &params)?;
    let (model2, params2) = load_checkpoint(&path)?;
    let same = predict(&test_set, &params, &model)? == predict(&test_set, &params2, &model2)?;
    println!("checkpoint {} reloads with identical predictions: {same}", path.display());
    Ok(())
}
