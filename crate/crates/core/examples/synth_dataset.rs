//! Generates a planted-signal dataset, writes it as JSONL and reads it back.
//!
//! Run with `cargo run --release --example synth_dataset -- [out.jsonl]`.

use roi_attention::data::{generate_synthetic, load_dataset, signal_direction, write_dataset, SynthConfig};

fn main() -> roi_attention::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("roi_synth.jsonl"));
    let cfg = SynthConfig {
        n: 200,
        ..SynthConfig::default()
    };
    let records = generate_synthetic(&cfg)?;
    write_dataset(&records, &path)?;
    let loaded = load_dataset(&path)?;
    assert_eq!(loaded, records);
    println!("wrote and reloaded {} records at {}", loaded.len(), path.display());

    let v = signal_direction(cfg.seed, cfg.a);
    let positives = records.iter().filter(|r| r.label == 1).count();
    println!("positives: {positives}/{}", records.len());
    for r in records.iter().take(4) {
        let proj: Vec<String> = r
            .rois
            .iter()
            .map(|roi| format!("{:+.2}", dot(&roi.embedding, &v)))
            .collect();
        println!(
            "image {:>3} label {}  anchor area {:.2}  projections on signal direction [{}]",
            r.id,
            r.label,
            r.rois[0].proposal.bbox.area(),
            proj.join(" ")
        );
    }
    Ok(())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
