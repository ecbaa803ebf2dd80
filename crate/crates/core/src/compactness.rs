//! Physical node attributes and the mass-normalized moment-of-inertia
//! compactness of every candidate mask.
//!
//! For an anchor `i` with mask row `l = Λ_i` the broadcast attributes are
//! `a = A ⊙ l`, `d = D ⊙ l`, `i_t = I ⊙ l` and `m = a ⊙ d`. The score is
//!
//! ```text
//!        Σ_j m_j a_j + Σ_{j<v} 2 min(d_j, d_v) a_j a_v
//! c_i = -----------------------------------------------
//!            2π Σ_j ( i_t,j + m_j |p_i - p_j|² )
//! ```

use std::f64::consts::PI;

use crate::affinity::AffinityMasks;
use crate::error::{CocaError, Result};
use crate::tensor::Tensor;

/// Inertia of a unit pixel about its own center.
pub const PIXEL_INERTIA: f64 = 1.0 / 6.0;

/// The five physical attributes of every node in a window or layer.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeAttrs {
    pub area: Vec<f64>,
    pub mass: Vec<f64>,
    pub density: Vec<f64>,
    pub inertia: Vec<f64>,
    /// `(row, col)` in original image pixels.
    pub position: Vec<[f64; 2]>,
}

impl NodeAttrs {
    pub fn len(&self) -> usize {
        self.area.len()
    }

    pub fn is_empty(&self) -> bool {
        self.area.is_empty()
    }

    /// Attributes of the nodes at `indices`, in that order.
    pub fn gather(&self, indices: &[usize]) -> NodeAttrs {
        NodeAttrs {
            area: indices.iter().map(|&i| self.area[i]).collect(),
            mass: indices.iter().map(|&i| self.mass[i]).collect(),
            density: indices.iter().map(|&i| self.density[i]).collect(),
            inertia: indices.iter().map(|&i| self.inertia[i]).collect(),
            position: indices.iter().map(|&i| self.position[i]).collect(),
        }
    }

    pub fn with_capacity(n: usize) -> NodeAttrs {
        NodeAttrs {
            area: Vec::with_capacity(n),
            mass: Vec::with_capacity(n),
            density: Vec::with_capacity(n),
            inertia: Vec::with_capacity(n),
            position: Vec::with_capacity(n),
        }
    }

    pub fn extend(&mut self, other: &NodeAttrs) {
        self.area.extend_from_slice(&other.area);
        self.mass.extend_from_slice(&other.mass);
        self.density.extend_from_slice(&other.density);
        self.inertia.extend_from_slice(&other.inertia);
        self.position.extend_from_slice(&other.position);
    }

    fn check(&self) -> Result<()> {
        let n = self.len();
        if [self.mass.len(), self.density.len(), self.inertia.len(), self.position.len()].iter().any(|&l| l != n) {
            return Err(CocaError::shape("node attribute vectors differ in length"));
        }
        Ok(())
    }
}

/// Unit area, mass and density, inertia 1/6, position `(row, col)`.
pub fn init_pixel_attrs(h: usize, w: usize) -> NodeAttrs {
    let n = h * w;
    NodeAttrs {
        area: vec![1.0; n],
        mass: vec![1.0; n],
        density: vec![1.0; n],
        inertia: vec![PIXEL_INERTIA; n],
        position: (0..h).flat_map(|r| (0..w).map(move |c| [r as f64, c as f64])).collect(),
    }
}

/// Attributes broadcast against every mask row and scaled by its affinities.
#[derive(Debug, Clone, PartialEq)]
pub struct IntermediateAttrs {
    pub a_t: Tensor,
    pub d_t: Tensor,
    pub i_t: Tensor,
    pub m_t: Tensor,
}

pub fn broadcast_scale(attrs: &NodeAttrs, masks: &AffinityMasks) -> Result<IntermediateAttrs> {
    attrs.check()?;
    let n = masks.n();
    if attrs.len() != n {
        return Err(CocaError::shape(format!("{} attributes for {n} mask columns", attrs.len())));
    }
    let scaled = |v: &[f64]| {
        let mut t = masks.lambda.clone();
        for row in t.data_mut().chunks_exact_mut(n) {
            row.iter_mut().zip(v).for_each(|(l, x)| *l *= x);
        }
        t
    };
    let a_t = scaled(&attrs.area);
    let d_t = scaled(&attrs.density);
    let i_t = scaled(&attrs.inertia);
    let mut m_t = a_t.clone();
    m_t.data_mut().iter_mut().zip(d_t.data()).for_each(|(m, d)| *m *= d);
    Ok(IntermediateAttrs { a_t, d_t, i_t, m_t })
}

pub fn position_sq_distances(p: &[[f64; 2]]) -> Tensor {
    let n = p.len();
    let mut out = Tensor::zeros(&[n, n]);
    for i in 0..n {
        for j in 0..n {
            out.data_mut()[i * n + j] = sq_dist(p[i], p[j]);
        }
    }
    out
}

#[inline]
fn sq_dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dr, dc) = (a[0] - b[0], a[1] - b[1]);
    dr * dr + dc * dc
}

/// Raw scores per anchor. Rows whose mask is entirely zero score 0 and are
/// listed in `flagged`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompactnessScores {
    pub raw: Vec<f64>,
    pub flagged: Vec<usize>,
}

impl CompactnessScores {
    /// Scores clamped to at most 1.
    pub fn clamped(&self) -> Vec<f64> {
        self.raw.iter().map(|&c| c.min(1.0)).collect()
    }
}

/// Numerator of the score for broadcast area `a` and density `d`, summed in
/// index order with the exact pair loop.
pub(crate) fn mass_term(a: &[f64], d: &[f64]) -> f64 {
    let mut total = 0.0;
    for j in 0..a.len() {
        let (aj, dj) = (a[j], d[j]);
        if aj == 0.0 {
            continue;
        }
        let mut pairs = 0.0;
        for v in j + 1..a.len() {
            pairs += dj.min(d[v]) * a[v];
        }
        total += aj * dj * aj + 2.0 * aj * pairs;
    }
    total
}

/// [`mass_term`] in `O(n log n)`: visiting nodes by decreasing density,
/// each one is the pair minimum against every node already visited.
pub(crate) fn mass_term_sorted(a: &[f64], d: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..a.len()).filter(|&j| a[j] != 0.0).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]).then(x.cmp(&y)));
    let (mut visited, mut total) = (0.0, 0.0);
    for &j in &order {
        total += a[j] * d[j] * a[j] + 2.0 * d[j] * a[j] * visited;
        visited += a[j];
    }
    total
}

/// Score of one mask row anchored at `anchor`; `None` when the row is empty.
pub fn row_score(attrs: &NodeAttrs, lambda_row: &[f64], anchor: [f64; 2]) -> Option<f64> {
    let support: Vec<usize> = (0..lambda_row.len()).filter(|&j| lambda_row[j] != 0.0).collect();
    let a: Vec<f64> = support.iter().map(|&j| attrs.area[j] * lambda_row[j]).collect();
    let d: Vec<f64> = support.iter().map(|&j| attrs.density[j] * lambda_row[j]).collect();
    let mut denom = 0.0;
    for (k, &j) in support.iter().enumerate() {
        let m = a[k] * d[k];
        denom += attrs.inertia[j] * lambda_row[j] + m * sq_dist(anchor, attrs.position[j]);
    }
    let denom = 2.0 * PI * denom;
    (denom > 0.0).then(|| mass_term(&a, &d) / denom)
}

pub fn compactness_scores(attrs: &NodeAttrs, masks: &AffinityMasks) -> Result<CompactnessScores> {
    attrs.check()?;
    let n = masks.n();
    if attrs.len() != n {
        return Err(CocaError::shape(format!("{} attributes for {n} mask rows", attrs.len())));
    }
    let mut raw = Vec::with_capacity(n);
    let mut flagged = Vec::new();
    for i in 0..n {
        match row_score(attrs, masks.row(i), attrs.position[i]) {
            Some(c) => raw.push(c),
            None => {
                raw.push(0.0);
                flagged.push(i);
            }
        }
    }
    Ok(CompactnessScores { raw, flagged })
}
