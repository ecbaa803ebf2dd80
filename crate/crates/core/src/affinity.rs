//! Per-window affinity masks.
//!
//! Features are normalized per node, projected, normalized again, turned
//! into temperature-scaled squared distances, and every distance row is
//! mapped through a softmin followed by min-max scaling. Row `i` of the
//! result is the candidate mask anchored at node `i`.

use crate::error::{CocaError, Result};
use crate::tensor::Tensor;
use crate::util::orthonormal_columns;

pub const VARIANCE_EPS: f64 = 1e-6;
pub const MIN_MAX_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Projection {
    #[default]
    Identity,
    /// A fixed random orthogonal `d x d` matrix drawn from the given seed.
    SeededOrthogonal(u64),
}

/// What to emit for a row whose distances are all equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegenerateRowPolicy {
    #[default]
    AllOnes,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AffinityConfig {
    pub tau: f64,
    pub groups: usize,
    pub projection: Projection,
    pub degenerate_row_policy: DegenerateRowPolicy,
}

impl Default for AffinityConfig {
    fn default() -> Self {
        Self {
            tau: 1.0,
            groups: 1,
            projection: Projection::Identity,
            degenerate_row_policy: DegenerateRowPolicy::AllOnes,
        }
    }
}

/// `n x n` soft masks in `[0, 1]`; row `i` is anchored at node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMasks {
    pub lambda: Tensor,
    /// Rows that hit the degenerate-row policy.
    pub degenerate_rows: Vec<usize>,
}

impl AffinityMasks {
    pub fn from_tensor(lambda: Tensor) -> Result<Self> {
        match *lambda.shape() {
            [a, b] if a == b => Ok(Self { lambda, degenerate_rows: Vec::new() }),
            ref s => Err(CocaError::shape(format!("affinity masks must be square, got {s:?}"))),
        }
    }

    pub fn n(&self) -> usize {
        self.lambda.shape()[0]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.lambda.row(i)
    }
}

/// Parameter-free group normalization of each row: within every group of
/// `d / groups` consecutive features the output has zero mean and unit
/// (population) variance.
pub fn group_normalize(x: &Tensor, groups: usize) -> Result<Tensor> {
    let d = x.cols();
    if groups == 0 || !d.is_multiple_of(groups) {
        return Err(CocaError::config(format!("{groups} groups do not divide feature dimension {d}")));
    }
    let g = d / groups;
    let mut out = x.clone();
    for chunk in out.data_mut().chunks_exact_mut(g) {
        let mean = chunk.iter().sum::<f64>() / g as f64;
        let var = chunk.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / g as f64;
        let inv = 1.0 / (var + VARIANCE_EPS).sqrt();
        chunk.iter_mut().for_each(|v| *v = (*v - mean) * inv);
    }
    Ok(out)
}

fn project(x: &Tensor, projection: Projection) -> Result<Tensor> {
    match projection {
        Projection::Identity => Ok(x.clone()),
        Projection::SeededOrthogonal(seed) => {
            let d = x.cols();
            let q = Tensor::new(orthonormal_columns(d, d, seed, false), vec![d, d])?;
            x.matmul(&q)
        }
    }
}

/// `E[i][j] = tau / sqrt(n d) * |y_i - y_j|^2`, symmetric with a zero
/// diagonal.
pub fn pairwise_distances(y: &Tensor, tau: f64) -> Tensor {
    let (n, d) = (y.rows(), y.cols());
    let scale = tau / ((n * d) as f64).sqrt();
    let mut e = Tensor::zeros(&[n, n]);
    for i in 0..n {
        let yi = y.row(i);
        for j in i + 1..n {
            let sq: f64 = yi.iter().zip(y.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
            let v = scale * sq;
            e.data_mut()[i * n + j] = v;
            e.data_mut()[j * n + i] = v;
        }
    }
    e
}

/// Softmin over each row followed by min-max scaling to `[0, 1]`.
///
/// The softmin normalizer cancels under min-max scaling, so rows are scaled
/// from `exp(-(e - min e))` directly; this keeps the map exactly
/// permutation-equivariant.
pub fn affinities_from_distances(e: &Tensor, policy: DegenerateRowPolicy) -> Result<AffinityMasks> {
    let mut masks = AffinityMasks::from_tensor(e.clone())?;
    let n = masks.n();
    for i in 0..n {
        let row = masks.lambda.row_mut(i);
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(CocaError::Numeric(format!("distance row {i} is not finite and non-negative")));
        }
        let lo = row.iter().copied().fold(f64::INFINITY, f64::min);
        row.iter_mut().for_each(|v| *v = (-(*v - lo)).exp());
        let (smin, smax) = row.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        let span = smax - smin;
        if span <= MIN_MAX_EPS * smax {
            match policy {
                DegenerateRowPolicy::AllOnes => row.fill(1.0),
            }
            masks.degenerate_rows.push(i);
        } else {
            row.iter_mut().for_each(|v| *v = (*v - smin) / span);
        }
    }
    Ok(masks)
}

/// Full per-window pipeline: normalize, project, normalize, distances,
/// affinities.
pub fn build_affinities(x: &Tensor, cfg: &AffinityConfig) -> Result<AffinityMasks> {
    if cfg.tau.is_nan() || cfg.tau <= 0.0 {
        return Err(CocaError::config(format!("tau must be positive, got {}", cfg.tau)));
    }
    let normalized = group_normalize(x, cfg.groups)?;
    let projected = project(&normalized, cfg.projection)?;
    let y = group_normalize(&projected, cfg.groups)?;
    let e = pairwise_distances(&y, cfg.tau);
    affinities_from_distances(&e, cfg.degenerate_row_policy)
}
