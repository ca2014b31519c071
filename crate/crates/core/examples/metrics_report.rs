//! AUC, F1 and recall at fixed false-positive rates on a small scored set.
//!
//! Run with `cargo run --example metrics_report`.

use roi_attention::metrics::{best_f1, recall_at_fpr, roc_auc, MetricReport, ScoredSet, FPR_TARGETS};

fn main() -> roi_attention::Result<()> {
    let scores = vec![0.95, 0.90, 0.80, 0.72, 0.70, 0.60, 0.55, 0.40, 0.30, 0.10];
    let labels = vec![1, 1, 0, 1, 1, 0, 0, 1, 0, 0];
    let set = ScoredSet::new(scores, labels)?;
    println!("AUC {:.4}", roc_auc(&set)?);
    let (f1, t) = best_f1(&set);
    println!("best F1 {f1:.4} at threshold {t:.3}");
    for target in FPR_TARGETS {
        println!("recall at FPR <= {target}: {:.3}", recall_at_fpr(&set, target)?);
    }
    let report = MetricReport::compute(&set)?;
    println!("\n{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}
