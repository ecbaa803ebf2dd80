//! Adjusted Rand Index and mean Segmentation Covering over label maps.

use std::collections::BTreeMap;

use crate::error::{CocaError, Result};

/// Per-pixel segment ids with an optional exclusion mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    pub height: usize,
    pub width: usize,
    pub labels: Vec<usize>,
    /// `true` marks pixels excluded from scoring.
    pub ignore: Option<Vec<bool>>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(CocaError::shape(format!("{} labels for a {height}x{width} map", labels.len())));
        }
        Ok(Self { height, width, labels, ignore: None })
    }

    pub fn is_ignored(&self, p: usize) -> bool {
        self.ignore.as_ref().is_some_and(|m| m[p])
    }

    /// Number of scored pixels.
    pub fn scored(&self) -> usize {
        (0..self.labels.len()).filter(|&p| !self.is_ignored(p)).count()
    }
}

/// Extends the ignore mask with every pixel whose label is in `bg_ids`.
pub fn fg_filter(labels: &LabelMap, bg_ids: &[usize]) -> LabelMap {
    let mut out = labels.clone();
    if bg_ids.is_empty() {
        return out;
    }
    let ignore = (0..labels.labels.len()).map(|p| labels.is_ignored(p) || bg_ids.contains(&labels.labels[p])).collect();
    out.ignore = Some(ignore);
    out
}

/// Contingency counts over pixels scored in both maps.
struct Contingency {
    cells: BTreeMap<(usize, usize), u64>,
    rows: BTreeMap<usize, u64>,
    cols: BTreeMap<usize, u64>,
    total: u64,
}

fn contingency(a: &LabelMap, b: &LabelMap) -> Result<Contingency> {
    if (a.height, a.width) != (b.height, b.width) || a.labels.len() != b.labels.len() {
        return Err(CocaError::shape(format!(
            "label maps differ in shape: {}x{} vs {}x{}",
            a.height, a.width, b.height, b.width
        )));
    }
    let mut c = Contingency { cells: BTreeMap::new(), rows: BTreeMap::new(), cols: BTreeMap::new(), total: 0 };
    for p in 0..a.labels.len() {
        if a.is_ignored(p) || b.is_ignored(p) {
            continue;
        }
        let (x, y) = (a.labels[p], b.labels[p]);
        *c.cells.entry((x, y)).or_default() += 1;
        *c.rows.entry(x).or_default() += 1;
        *c.cols.entry(y).or_default() += 1;
        c.total += 1;
    }
    if c.total == 0 {
        return Err(CocaError::EmptyRegion);
    }
    Ok(c)
}

fn pairs(n: u64) -> i128 {
    let n = i128::from(n);
    n * (n - 1) / 2
}

/// Hubert-Arabie adjusted Rand index, evaluated on exact integer pair
/// counts with a single final division. When both partitions are trivial in
/// the same way the index is 1.
pub fn ari(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let c = contingency(pred, gt)?;
    let index: i128 = c.cells.values().map(|&n| pairs(n)).sum();
    let sum_a: i128 = c.rows.values().map(|&n| pairs(n)).sum();
    let sum_b: i128 = c.cols.values().map(|&n| pairs(n)).sum();
    let total = pairs(c.total);
    // (index - E) / (max - E) with E = sum_a sum_b / total, scaled by 2 total.
    let num = 2 * total * index - 2 * sum_a * sum_b;
    let den = total * (sum_a + sum_b) - 2 * sum_a * sum_b;
    if den == 0 {
        return Ok(1.0);
    }
    Ok(num as f64 / den as f64)
}

/// Size-weighted mean over ground-truth segments of the best IoU with any
/// predicted segment, over pixels scored in both maps.
pub fn msc(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    let c = contingency(pred, gt)?;
    let mut best_iou: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(k, g), &n) in &c.cells {
        let union = c.cols[&g] + c.rows[&k] - n;
        let iou = n as f64 / union as f64;
        let e = best_iou.entry(g).or_insert(0.0);
        *e = e.max(iou);
    }
    let score = c.cols.iter().map(|(g, &size)| size as f64 * best_iou.get(g).copied().unwrap_or(0.0)).sum::<f64>();
    Ok(score / c.total as f64)
}
