//! Per-pixel compactness maps.
//!
//! Every pixel is scored as the anchor of the soft mask of the slot it is
//! assigned to. With unit pixel attributes the numerator depends only on
//! the slot, and the parallel-axis sum expands into slot moments, so each
//! pixel costs `O(1)` once the slot is summarized.

use std::f64::consts::PI;

use crate::compactness::{mass_term_sorted, PIXEL_INERTIA};
use crate::error::{CocaError, Result};
use crate::hierarchy::NetOutput;

struct SlotSummary {
    numerator: f64,
    inertia: f64,
    /// `Σ v²`, `Σ v² q` and `Σ v² |q|²` over pixel positions `q`.
    m0: f64,
    m1: [f64; 2],
    m2: f64,
}

fn summarize(mask: &[f64], width: usize) -> SlotSummary {
    let numerator = mass_term_sorted(mask, mask);
    let (mut inertia, mut m0, mut m1, mut m2) = (0.0, 0.0, [0.0; 2], 0.0);
    for (p, &v) in mask.iter().enumerate() {
        if v == 0.0 {
            continue;
        }
        let q = [(p / width) as f64, (p % width) as f64];
        let m = v * v;
        inertia += PIXEL_INERTIA * v;
        m0 += m;
        m1[0] += m * q[0];
        m1[1] += m * q[1];
        m2 += m * (q[0] * q[0] + q[1] * q[1]);
    }
    SlotSummary { numerator, inertia, m0, m1, m2 }
}

impl SlotSummary {
    fn score_at(&self, p: [f64; 2]) -> f64 {
        let spread = self.m0 * (p[0] * p[0] + p[1] * p[1]) - 2.0 * (p[0] * self.m1[0] + p[1] * self.m1[1]) + self.m2;
        let denom = 2.0 * PI * (self.inertia + spread.max(0.0));
        if denom > 0.0 {
            self.numerator / denom
        } else {
            0.0
        }
    }
}

/// Raw compactness of each pixel's own slot mask anchored at that pixel.
pub fn compactness_heatmap(out: &NetOutput, height: usize, width: usize) -> Result<Vec<f64>> {
    if out.slot_masks.cols() != height * width {
        return Err(CocaError::shape(format!(
            "slot masks cover {} pixels, expected {height}x{width}",
            out.slot_masks.cols()
        )));
    }
    let mut summaries: Vec<Option<SlotSummary>> = (0..out.slots()).map(|_| None).collect();
    let mut heat = vec![0.0; height * width];
    for (p, &s) in out.hard_labels.iter().enumerate() {
        let summary = summaries[s].get_or_insert_with(|| summarize(out.slot_mask(s), width));
        heat[p] = summary.score_at([(p / width) as f64, (p % width) as f64]);
    }
    Ok(heat)
}

/// Min-max scaling to 8 bits; a constant map becomes all 255.
pub fn to_gray(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    values.iter().map(|&v| if span > 0.0 { ((v - lo) / span * 255.0).round() as u8 } else { 255 }).collect()
}
