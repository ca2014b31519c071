//! Box arithmetic and RoI selection.
//!
//! Coordinates are normalized to `[0,1]` in both axes. Selection keeps the
//! `k` most confident proposals and the anchor is the largest-area box.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let coords = [x1, y1, x2, y2];
        if coords.iter().any(|c| !c.is_finite() || *c < 0.0 || *c > 1.0) {
            return Err(Error::config("bbox", format!("coordinates {coords:?} outside [0,1]")));
        }
        if x1 >= x2 || y1 >= y2 {
            return Err(Error::config("bbox", format!("degenerate box {coords:?}")));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    /// Builds a box from two opposite corners given in any order.
    pub fn from_corners(ax: f64, ay: f64, bx: f64, by: f64) -> Result<Self> {
        BBox::new(ax.min(bx), ay.min(by), ax.max(bx), ay.max(by))
    }

    pub fn unit() -> Self {
        BBox {
            x1: 0.0,
            y1: 0.0,
            x2: 1.0,
            y2: 1.0,
        }
    }

    pub fn coords(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) / 2.0, (self.y1 + self.y2) / 2.0)
    }

    pub fn area(&self) -> f64 {
        (self.x2 - self.x1) * (self.y2 - self.y1)
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = Error;

    fn try_from(c: [f64; 4]) -> Result<Self> {
        BBox::new(c[0], c[1], c[2], c[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> Self {
        b.coords()
    }
}

pub fn box_center(b: &BBox) -> (f64, f64) {
    b.center()
}

pub fn box_area(b: &BBox) -> f64 {
    b.area()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoiProposal {
    pub bbox: BBox,
    pub confidence: f64,
}

impl RoiProposal {
    pub fn new(bbox: BBox, confidence: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::config("confidence", format!("{confidence} outside [0,1]")));
        }
        Ok(RoiProposal { bbox, confidence })
    }
}

/// One slot of a top-k selection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selected {
    pub proposal: RoiProposal,
    /// Index into the original proposal list.
    pub source: usize,
    /// True for slots filled by repeating the largest box.
    pub padded: bool,
}

/// Picks the `k` most confident proposals in descending confidence order.
///
/// Ties go to the larger box, then to the lower original index. When fewer
/// than `k` proposals exist the tail is filled with copies of the
/// largest-area proposal, flagged as padded.
pub fn select_top_k(proposals: &[RoiProposal], k: usize) -> Result<Vec<Selected>> {
    if proposals.is_empty() {
        return Err(Error::NoProposals);
    }
    let mut order: Vec<usize> = (0..proposals.len()).collect();
    order.sort_by(|&i, &j| {
        let (p, q) = (&proposals[i], &proposals[j]);
        q.confidence
            .total_cmp(&p.confidence)
            .then_with(|| q.bbox.area().total_cmp(&p.bbox.area()))
            .then_with(|| i.cmp(&j))
    });
    let mut out: Vec<Selected> = order
        .into_iter()
        .take(k)
        .map(|source| Selected {
            proposal: proposals[source],
            source,
            padded: false,
        })
        .collect();
    if out.len() < k {
        let largest = largest_area_index(proposals.iter().map(|p| p.bbox.area()));
        let pad = Selected {
            proposal: proposals[largest],
            source: largest,
            padded: true,
        };
        out.resize(k, pad);
    }
    Ok(out)
}

fn largest_area_index(areas: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, a) in areas.enumerate() {
        if a.total_cmp(&best.1) == Ordering::Greater {
            best = (i, a);
        }
    }
    best.0
}

/// Index of the largest box; the lower index wins ties.
pub fn identify_anchor(selected: &[RoiProposal]) -> usize {
    largest_area_index(selected.iter().map(|p| p.bbox.area()))
}

/// Builds a model input sequence: the top-`k` selection with the largest
/// proposal force-included and moved to position 0.
///
/// When the largest box did not make the confidence cut it replaces the
/// least confident selected slot, so the length stays `k`.
pub fn select_sequence(proposals: &[RoiProposal], k: usize) -> Result<Vec<Selected>> {
    let mut sel = select_top_k(proposals, k)?;
    if sel.is_empty() {
        return Ok(sel);
    }
    let largest = largest_area_index(proposals.iter().map(|p| p.bbox.area()));
    if !sel.iter().any(|s| s.source == largest) {
        let slot = sel.iter().rposition(|s| !s.padded).unwrap_or(sel.len() - 1);
        sel[slot] = Selected {
            proposal: proposals[largest],
            source: largest,
            padded: false,
        };
    }
    let props: Vec<RoiProposal> = sel.iter().map(|s| s.proposal).collect();
    let anchor = identify_anchor(&props);
    let first = sel.remove(anchor);
    sel.insert(0, first);
    Ok(sel)
}
