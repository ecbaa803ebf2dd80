//! Stick-breaking sequential clustering of one window.
//!
//! Each iteration erodes the running scores by the scope, picks an anchor,
//! emits its affinity row concealed by the scope and removes the emitted
//! mass from the scope. The leftover scope is always appended last.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::affinity::AffinityMasks;
use crate::compactness::CompactnessScores;
use crate::error::{CocaError, Result};
use crate::tensor::Tensor;
use crate::util::keyed_rng;

pub const DEFAULT_STOP_THRESHOLD: f64 = 0.025;

/// Per-node unassigned stick; starts at one and never increases.
#[derive(Debug, Clone, PartialEq)]
pub struct Scope {
    pub z: Vec<f64>,
}

impl Scope {
    pub fn full(n: usize) -> Self {
        Self { z: vec![1.0; n] }
    }

    pub fn total(&self) -> f64 {
        self.z.iter().sum()
    }

    pub fn is_exhausted(&self) -> bool {
        self.z.iter().all(|&v| v <= 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopPolicy {
    /// `k - 1` anchored masks followed by the residual.
    Fixed(usize),
    /// Emit anchored masks until the scope sum drops below
    /// `threshold * n`.
    Dynamic { threshold: f64 },
}

impl StopPolicy {
    pub fn dynamic() -> Self {
        StopPolicy::Dynamic { threshold: DEFAULT_STOP_THRESHOLD }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            StopPolicy::Fixed(0) => Err(CocaError::config("fixed cluster count must be at least 1")),
            StopPolicy::Dynamic { threshold } if !(threshold > 0.0 && threshold < 1.0) => {
                Err(CocaError::config(format!("stop threshold must lie in (0, 1), got {threshold}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AnchorMode {
    #[default]
    Compact,
    /// Anchors drawn in proportion to the scope, keyed by this seed.
    Random { seed: u64 },
}

/// Anchor selection state for one window.
#[derive(Debug, Clone)]
pub enum AnchorSampler {
    Compact,
    Random(Box<ChaCha8Rng>),
}

impl AnchorSampler {
    /// Sampler for window `window` of layer `layer`; random streams are
    /// keyed so results do not depend on scheduling.
    pub fn for_window(mode: AnchorMode, layer: usize, window: usize) -> Self {
        match mode {
            AnchorMode::Compact => AnchorSampler::Compact,
            AnchorMode::Random { seed } => {
                AnchorSampler::Random(Box::new(keyed_rng(seed, layer as u64, window as u64)))
            }
        }
    }
}

/// `k x n` masks; `anchors[m]` is `None` for the residual and for masks
/// emitted after the scope ran out.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMasks {
    pub pi: Tensor,
    pub anchors: Vec<Option<usize>>,
}

impl ClusterMasks {
    pub fn k(&self) -> usize {
        self.pi.rows()
    }

    pub fn n(&self) -> usize {
        self.pi.cols()
    }

    pub fn mask(&self, m: usize) -> &[f64] {
        self.pi.row(m)
    }

    /// Number of masks with an anchor.
    pub fn anchored(&self) -> usize {
        self.anchors.iter().filter(|a| a.is_some()).count()
    }
}

/// `argmax_i c[i] * z[i]` over nodes with `z[i] > 0`, lowest index on ties.
pub fn select_anchor_compact(c: &[f64], z: &Scope) -> Result<usize> {
    argmax_in_scope(c.iter().zip(&z.z).map(|(c, z)| c * z), &z.z)
}

fn argmax_in_scope(values: impl Iterator<Item = f64>, z: &[f64]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        if z[i] > 0.0 && best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or(CocaError::EmptyRegion)
}

/// Index drawn with probability `z[i] / Σz`.
pub fn select_anchor_random<R: Rng + ?Sized>(z: &Scope, rng: &mut R) -> Result<usize> {
    let dist = WeightedIndex::new(&z.z).map_err(|_| CocaError::EmptyRegion)?;
    Ok(dist.sample(rng))
}

pub fn sbc_cluster(
    masks: &AffinityMasks,
    scores: &CompactnessScores,
    policy: StopPolicy,
    sampler: &mut AnchorSampler,
) -> Result<ClusterMasks> {
    sbc_cluster_from(masks, scores, policy, sampler, Scope::full(masks.n()))
}

/// As [`sbc_cluster`] but starting from an explicit initial scope. Nodes
/// that start at zero are never anchored or assigned.
pub fn sbc_cluster_from(
    masks: &AffinityMasks,
    scores: &CompactnessScores,
    policy: StopPolicy,
    sampler: &mut AnchorSampler,
    mut scope: Scope,
) -> Result<ClusterMasks> {
    policy.validate()?;
    let n = masks.n();
    if scores.raw.len() != n || scope.z.len() != n {
        return Err(CocaError::shape(format!(
            "{} scores and {} scope entries for {n} masks",
            scores.raw.len(),
            scope.z.len()
        )));
    }
    let anchored_target = match policy {
        StopPolicy::Fixed(k) if k > n + 1 => {
            return Err(CocaError::config(format!("fixed cluster count {k} exceeds window size {n} + 1")));
        }
        StopPolicy::Fixed(k) => k - 1,
        StopPolicy::Dynamic { .. } => n,
    };
    let stop_below = match policy {
        StopPolicy::Dynamic { threshold } => threshold * scope.total(),
        StopPolicy::Fixed(_) => 0.0,
    };
    let mut eroded = scores.raw.clone();
    let mut rows: Vec<f64> = Vec::with_capacity((anchored_target + 1).min(n + 1) * n);
    let mut anchors = Vec::new();
    while anchors.len() < anchored_target {
        let dynamic_done = matches!(policy, StopPolicy::Dynamic { .. }) && scope.total() < stop_below;
        if dynamic_done || scope.is_exhausted() {
            if let StopPolicy::Fixed(_) = policy {
                // Scope is spent; pad with empty masks to keep k fixed.
                rows.resize(rows.len() + n, 0.0);
                anchors.push(None);
                continue;
            }
            break;
        }
        eroded.iter_mut().zip(&scope.z).for_each(|(c, z)| *c *= z);
        let anchor = match sampler {
            AnchorSampler::Compact => argmax_in_scope(eroded.iter().copied(), &scope.z)?,
            AnchorSampler::Random(rng) => select_anchor_random(&scope, rng)?,
        };
        let lambda = masks.row(anchor);
        let start = rows.len();
        rows.extend(lambda.iter().zip(&scope.z).map(|(l, z)| l * z));
        for (z, p) in scope.z.iter_mut().zip(&rows[start..]) {
            *z *= 1.0 - p;
        }
        anchors.push(Some(anchor));
    }
    rows.extend_from_slice(&scope.z);
    anchors.push(None);
    let k = anchors.len();
    Ok(ClusterMasks { pi: Tensor::new(rows, vec![k, n])?, anchors })
}
