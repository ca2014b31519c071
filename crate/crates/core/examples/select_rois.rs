//! Top-k RoI selection and anchor placement on a hand-made proposal list.
//!
//! Run with `cargo run --example select_rois`.

use roi_attention::geometry::{box_area, box_center, identify_anchor, select_sequence, select_top_k, BBox, RoiProposal};

fn main() -> roi_attention::Result<()> {
    let proposals = vec![
        RoiProposal::new(BBox::new(0.10, 0.20, 0.25, 0.30)?, 0.91)?,
        RoiProposal::new(BBox::new(0.55, 0.60, 0.70, 0.80)?, 0.64)?,
        RoiProposal::new(BBox::new(0.02, 0.01, 0.98, 0.97)?, 0.30)?,
        RoiProposal::new(BBox::new(0.40, 0.40, 0.45, 0.48)?, 0.77)?,
        RoiProposal::new(BBox::new(0.30, 0.70, 0.50, 0.90)?, 0.12)?,
    ];
    for (i, p) in proposals.iter().enumerate() {
        let (cx, cy) = box_center(&p.bbox);
        println!(
            "proposal {i}: conf {:.2}  area {:.4}  center ({cx:.3}, {cy:.3})",
            p.confidence,
            box_area(&p.bbox)
        );
    }

    let top = select_top_k(&proposals, 3)?;
    let picked: Vec<usize> = top.iter().map(|s| s.source).collect();
    println!("\ntop-3 by confidence: {picked:?}");
    let props: Vec<RoiProposal> = top.iter().map(|s| s.proposal).collect();
    println!("largest box among them: slot {}", identify_anchor(&props));

    let seq = select_sequence(&proposals, 3)?;
    let order: Vec<usize> = seq.iter().map(|s| s.source).collect();
    println!("model sequence (anchor forced in, at slot 0): {order:?}");

    let padded = select_top_k(&proposals[..2], 4)?;
    for s in &padded {
        println!("k=4 from 2 proposals: source {} padded {}", s.source, s.padded);
    }
    Ok(())
}
