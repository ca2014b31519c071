//! Dataset records, JSONL ingestion and the planted-signal generator.
//!
//! On disk each line is one image:
//!
//! ```text
//! {"id": "...", "label": 0|1, "rois": [{"bbox": [x1,y1,x2,y2], "confidence": c,
//!   "embedding": [...], "padded": false}, ...]}
//! ```
//!
//! The anchor (largest box) may sit anywhere on disk; the loader moves it to
//! position 0. Floats are written in shortest round-trip form, so a
//! write/load cycle reproduces every embedding bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{identify_anchor, BBox, RoiProposal};
use crate::rng::{Stream, STREAM_DIRECTION};

#[derive(Debug, Clone, PartialEq)]
pub struct RoiRecord {
    pub proposal: RoiProposal,
    pub embedding: Vec<f64>,
    pub padded: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub label: u8,
    /// Fixed length `k`; index 0 is the anchor.
    pub rois: Vec<RoiRecord>,
}

impl ImageRecord {
    pub fn k(&self) -> usize {
        self.rois.len()
    }

    pub fn dim(&self) -> usize {
        self.rois.first().map_or(0, |r| r.embedding.len())
    }

    pub fn centers(&self) -> Vec<(f64, f64)> {
        self.rois.iter().map(|r| r.proposal.bbox.center()).collect()
    }

    /// Moves the largest box to index 0, keeping the others in order.
    pub fn anchor_first(&mut self) {
        let props: Vec<RoiProposal> = self.rois.iter().map(|r| r.proposal).collect();
        if props.is_empty() {
            return;
        }
        let a = identify_anchor(&props);
        if a != 0 {
            let anchor = self.rois.remove(a);
            self.rois.insert(0, anchor);
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RoiLine {
    bbox: [f64; 4],
    confidence: f64,
    embedding: Vec<f64>,
    #[serde(default)]
    padded: bool,
}

#[derive(Serialize, Deserialize)]
struct ImageLine {
    id: String,
    label: serde_json::Value,
    rois: Vec<RoiLine>,
}

fn parse_line(line: &str, lineno: usize) -> Result<ImageRecord> {
    let malformed = |msg: String| Error::Malformed { line: lineno, msg };
    let raw: ImageLine = serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
    let label = match raw.label.as_u64() {
        Some(v @ (0 | 1)) => v as u8,
        _ => {
            return Err(Error::NonBinaryLabel {
                line: lineno,
                value: raw.label.to_string(),
            })
        }
    };
    if raw.rois.is_empty() {
        return Err(malformed("record has no RoIs".into()));
    }
    let mut rois = Vec::with_capacity(raw.rois.len());
    for (j, r) in raw.rois.into_iter().enumerate() {
        let bbox = BBox::try_from(r.bbox).map_err(|e| malformed(format!("roi {j}: {e}")))?;
        let proposal =
            RoiProposal::new(bbox, r.confidence).map_err(|e| malformed(format!("roi {j}: {e}")))?;
        if r.embedding.iter().any(|v| !v.is_finite()) {
            return Err(malformed(format!("roi {j}: non-finite embedding entry")));
        }
        rois.push(RoiRecord {
            proposal,
            embedding: r.embedding,
            padded: r.padded,
        });
    }
    let mut rec = ImageRecord {
        id: raw.id,
        label,
        rois,
    };
    rec.anchor_first();
    Ok(rec)
}

/// Reads and validates a JSONL dataset. Every record must share the same
/// embedding dimension and RoI count.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<ImageRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut shape: Option<(usize, usize)> = None;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_line(&line, lineno)?;
        let (k0, a0) = *shape.get_or_insert((rec.k(), rec.dim()));
        for roi in &rec.rois {
            if roi.embedding.len() != a0 {
                return Err(Error::DatasetDim {
                    line: lineno,
                    expected: a0,
                    found: roi.embedding.len(),
                });
            }
        }
        if rec.k() != k0 {
            return Err(Error::DatasetK {
                line: lineno,
                expected: k0,
                found: rec.k(),
            });
        }
        records.push(rec);
    }
    Ok(records)
}

pub fn write_dataset(records: &[ImageRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        let line = ImageLine {
            id: rec.id.clone(),
            label: rec.label.into(),
            rois: rec
                .rois
                .iter()
                .map(|r| RoiLine {
                    bbox: r.proposal.bbox.coords(),
                    confidence: r.proposal.confidence,
                    embedding: r.embedding.clone(),
                    padded: r.padded,
                })
                .collect(),
        };
        serde_json::to_writer(&mut w, &line)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Settings for the planted-signal benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n: usize,
    pub k: usize,
    pub a: usize,
    pub signal_strength: f64,
    pub noise_std: f64,
    pub positive_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n: 2500,
            k: 8,
            a: 32,
            signal_strength: 2.0,
            noise_std: 1.0,
            positive_rate: 0.5,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::config("n", "n ≥ 1 required"));
        }
        if self.k < 2 {
            return Err(Error::config("k", "k ≥ 2 required"));
        }
        if self.a < 2 {
            return Err(Error::config("a", "a ≥ 2 required"));
        }
        if !(self.signal_strength >= 0.0 && self.signal_strength.is_finite()) {
            return Err(Error::config("signal_strength", "must be finite and ≥ 0"));
        }
        if !(self.noise_std > 0.0 && self.noise_std.is_finite()) {
            return Err(Error::config("noise_std", "must be finite and > 0"));
        }
        if !(self.positive_rate > 0.0 && self.positive_rate < 1.0) {
            return Err(Error::config("positive_rate", "must lie in (0,1)"));
        }
        Ok(())
    }
}

/// The planted direction `v` shared by every positive image of a seed.
pub fn signal_direction(seed: u64, a: usize) -> Vec<f64> {
    let mut s = Stream::new(seed, STREAM_DIRECTION);
    let mut v: Vec<f64> = (0..a).map(|_| s.normal()).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

const FINE_SIDE: (f64, f64) = (0.02, 0.25);

fn synth_image(cfg: &SynthConfig, v: &[f64], index: u64) -> ImageRecord {
    let mut s = Stream::new(cfg.seed, index);
    let label = u8::from(s.uniform() < cfg.positive_rate);
    let noise = |s: &mut Stream| -> Vec<f64> { (0..cfg.a).map(|_| cfg.noise_std * s.normal()).collect() };

    let mut rois = Vec::with_capacity(cfg.k);
    rois.push(RoiRecord {
        proposal: RoiProposal {
            bbox: BBox::unit(),
            confidence: 1.0,
        },
        embedding: noise(&mut s),
        padded: false,
    });
    for _ in 1..cfg.k {
        let w = s.uniform_range(FINE_SIDE.0, FINE_SIDE.1);
        let h = s.uniform_range(FINE_SIDE.0, FINE_SIDE.1);
        let x1 = s.uniform_range(0.0, 1.0 - w);
        let y1 = s.uniform_range(0.0, 1.0 - h);
        let confidence = s.uniform();
        let bbox = BBox::new(x1, y1, x1 + w, y1 + h).expect("fine box inside unit square");
        rois.push(RoiRecord {
            proposal: RoiProposal { bbox, confidence },
            embedding: noise(&mut s),
            padded: false,
        });
    }
    if label == 1 {
        let j = 1 + s.below(cfg.k - 1);
        for (e, d) in rois[j].embedding.iter_mut().zip(v) {
            *e += cfg.signal_strength * d;
        }
    }
    ImageRecord {
        id: format!("synth-{}-{index:06}", cfg.seed),
        label,
        rois,
    }
}

/// Generates images `start .. start + count` of the stream family defined by
/// `cfg.seed`. Each image index owns its own random stream, so ranges can be
/// produced independently and in parallel.
pub fn generate_range(cfg: &SynthConfig, start: usize, count: usize) -> Result<Vec<ImageRecord>> {
    cfg.validate()?;
    let v = signal_direction(cfg.seed, cfg.a);
    Ok((start..start + count)
        .into_par_iter()
        .map(|i| synth_image(cfg, &v, i as u64))
        .collect())
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<Vec<ImageRecord>> {
    generate_range(cfg, 0, cfg.n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n: 100,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn generation_is_deterministic() {
        assert_eq!(generate_synthetic(&small()).unwrap(), generate_synthetic(&small()).unwrap());
    }

    #[test]
    fn ranges_compose() {
        let all = generate_synthetic(&small()).unwrap();
        let tail = generate_range(&small(), 60, 40).unwrap();
        assert_eq!(&all[60..], &tail[..]);
    }

    #[test]
    fn positive_fraction_concentrates() {
        let cfg = SynthConfig {
            n: 2000,
            seed: 0,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let frac = data.iter().filter(|r| r.label == 1).count() as f64 / 2000.0;
        assert!((0.45..=0.55).contains(&frac), "{frac}");
    }

    #[test]
    fn anchor_is_largest_and_first() {
        for rec in generate_synthetic(&small()).unwrap() {
            assert_eq!(rec.k(), 8);
            let props: Vec<_> = rec.rois.iter().map(|r| r.proposal).collect();
            assert_eq!(identify_anchor(&props), 0);
            assert_eq!(rec.rois[0].proposal.bbox, BBox::unit());
        }
    }

    #[test]
    fn planted_signal_lives_in_one_fine_roi() {
        let cfg = SynthConfig {
            n: 50,
            signal_strength: 50.0,
            ..Default::default()
        };
        let v = signal_direction(cfg.seed, cfg.a);
        for rec in generate_synthetic(&cfg).unwrap() {
            let strong = rec
                .rois
                .iter()
                .filter(|r| r.embedding.iter().zip(&v).map(|(e, d)| e * d).sum::<f64>() > 25.0)
                .count();
            assert_eq!(strong, rec.label as usize, "{}", rec.id);
            let anchor_proj: f64 = rec.rois[0].embedding.iter().zip(&v).map(|(e, d)| e * d).sum();
            assert!(anchor_proj < 25.0);
        }
    }

    #[test]
    fn zero_signal_classes_are_exchangeable() {
        let cfg = SynthConfig {
            n: 2000,
            signal_strength: 0.0,
            ..Default::default()
        };
        let data = generate_synthetic(&cfg).unwrap();
        let mean = |label: u8| {
            let rows: Vec<&ImageRecord> = data.iter().filter(|r| r.label == label).collect();
            let mut m = vec![0.0; cfg.a];
            for r in &rows {
                for roi in &r.rois[1..] {
                    m.iter_mut().zip(&roi.embedding).for_each(|(m, e)| *m += e);
                }
            }
            let count = (rows.len() * (cfg.k - 1)) as f64;
            (m.into_iter().map(|x| x / count).collect::<Vec<_>>(), count)
        };
        let (m0, n0) = mean(0);
        let (m1, n1) = mean(1);
        let tol = 4.0 * cfg.noise_std * (1.0 / n0 + 1.0 / n1).sqrt();
        for (a, b) in m0.iter().zip(&m1) {
            assert!((a - b).abs() < tol, "{a} vs {b} (tol {tol})");
        }
    }

    #[test]
    fn config_errors_name_the_field() {
        let bad = SynthConfig {
            k: 1,
            ..Default::default()
        };
        let err = bad.validate().unwrap_err().to_string();
        assert!(err.contains("k ≥ 2 required"), "{err}");
    }
}
