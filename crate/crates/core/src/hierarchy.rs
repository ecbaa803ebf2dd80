//! Layered windowed clustering and dendrogram merging.
//!
//! A layer partitions its `rows x cols x depth` node grid into `t x t`
//! windows, clusters every window independently and pools each output
//! cluster into one node, so the next layer sees a `t x t x k` grid.
//!
//! Nodes whose pooled area is at most [`EMPTY_AREA`] carry no pixels. They
//! are left out of the affinity and compactness computations and start with
//! zero scope, so they are never anchored or assigned.

use rayon::prelude::*;

use crate::affinity::{build_affinities, AffinityConfig, AffinityMasks, Projection};
use crate::compactness::{compactness_scores, init_pixel_attrs, NodeAttrs};
use crate::encoder::{encode_pixels, smooth_features, EncoderConfig};
use crate::error::{CocaError, Result};
use crate::image::Image;
use crate::sbc::{sbc_cluster_from, AnchorMode, AnchorSampler, ClusterMasks, Scope, StopPolicy};
use crate::tensor::{FeatureMap, Tensor, WindowLayout};

/// Guard for mask-mass normalization.
pub const POOL_EPS: f64 = 1e-9;
/// Nodes with area at or below this hold no pixels.
pub const EMPTY_AREA: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerConfig {
    pub t: usize,
    pub stop: StopPolicy,
    pub tau: f64,
    pub groups: usize,
    pub projection: Projection,
    pub smoothing_radius: usize,
    pub smoothing_strength: f64,
}

impl LayerConfig {
    pub fn new(t: usize, stop: StopPolicy, tau: f64) -> Self {
        Self { t, stop, tau, groups: 1, projection: Projection::Identity, smoothing_radius: 0, smoothing_strength: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.t == 0 {
            return Err(CocaError::config("layer t must be at least 1"));
        }
        if self.tau.is_nan() || self.tau <= 0.0 {
            return Err(CocaError::config(format!("layer tau must be positive, got {}", self.tau)));
        }
        if self.groups == 0 {
            return Err(CocaError::config("layer groups must be at least 1"));
        }
        self.stop.validate()
    }

    fn affinity(&self) -> AffinityConfig {
        AffinityConfig { tau: self.tau, groups: self.groups, projection: self.projection, ..Default::default() }
    }
}

/// Input to (and output of) one layer.
#[derive(Debug, Clone)]
pub struct LayerState {
    pub features: FeatureMap,
    pub attrs: NodeAttrs,
    /// Number of layers applied so far.
    pub layer: usize,
    /// Masks of the last applied layer, one entry per window.
    pub masks: Vec<ClusterMasks>,
    pub layout: Option<WindowLayout>,
}

impl LayerState {
    pub fn from_pixels(features: FeatureMap) -> Result<Self> {
        if features.depth != 1 {
            return Err(CocaError::shape("pixel features must have depth 1"));
        }
        let attrs = init_pixel_attrs(features.rows, features.cols);
        Ok(Self { features, attrs, layer: 0, masks: Vec::new(), layout: None })
    }
}

/// `I' = Π I`, `A' = Π A`, `M' = Π M`, `D' = M' / A'`,
/// `P' = Π P / Σ_j Π_j`.
pub fn pool_attrs(pi: &ClusterMasks, attrs: &NodeAttrs) -> Result<NodeAttrs> {
    let n = pi.n();
    if attrs.len() != n {
        return Err(CocaError::shape(format!("{} attributes for masks over {n} nodes", attrs.len())));
    }
    let dot = |row: &[f64], v: &[f64]| row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
    let mut out = NodeAttrs::with_capacity(pi.k());
    for m in 0..pi.k() {
        let row = pi.mask(m);
        let area = dot(row, &attrs.area);
        let mass = dot(row, &attrs.mass);
        let weight: f64 = row.iter().sum();
        let mut p = [0.0; 2];
        for (w, q) in row.iter().zip(&attrs.position) {
            p[0] += w * q[0];
            p[1] += w * q[1];
        }
        let wn = weight.max(POOL_EPS);
        out.area.push(area);
        out.mass.push(mass);
        out.density.push(mass / area.max(POOL_EPS));
        out.inertia.push(dot(row, &attrs.inertia));
        out.position.push([p[0] / wn, p[1] / wn]);
    }
    Ok(out)
}

/// Row `m` is the `Π_m`-weighted mean of the node features.
pub fn pool_features(pi: &ClusterMasks, x: &Tensor) -> Result<Tensor> {
    let (n, d) = (x.rows(), x.cols());
    if pi.n() != n {
        return Err(CocaError::shape(format!("masks over {} nodes for {n} feature rows", pi.n())));
    }
    let mut out = Tensor::zeros(&[pi.k(), d]);
    for m in 0..pi.k() {
        let row = pi.mask(m);
        let dst = out.row_mut(m);
        for (j, &w) in row.iter().enumerate() {
            if w != 0.0 {
                dst.iter_mut().zip(x.row(j)).for_each(|(o, v)| *o += w * v);
            }
        }
        let norm = row.iter().sum::<f64>().max(POOL_EPS);
        dst.iter_mut().for_each(|o| *o /= norm);
    }
    Ok(out)
}

struct WindowResult {
    masks: ClusterMasks,
    features: Tensor,
    attrs: NodeAttrs,
}

fn cluster_window(
    x: &Tensor,
    attrs: &NodeAttrs,
    cfg: &LayerConfig,
    sampler: &mut AnchorSampler,
) -> Result<WindowResult> {
    let n = attrs.len();
    let live: Vec<usize> = (0..n).filter(|&j| attrs.area[j] > EMPTY_AREA).collect();
    let mut lambda = Tensor::zeros(&[n, n]);
    let mut raw = vec![0.0; n];
    if !live.is_empty() {
        let rows: Vec<Vec<f64>> = live.iter().map(|&j| x.row(j).to_vec()).collect();
        let sub = build_affinities(&Tensor::from_rows(&rows)?, &cfg.affinity())?;
        let sub_attrs = attrs.gather(&live);
        let sub_scores = compactness_scores(&sub_attrs, &sub)?;
        for (a, &i) in live.iter().enumerate() {
            raw[i] = sub_scores.raw[a];
            let dst = lambda.row_mut(i);
            for (b, &j) in live.iter().enumerate() {
                dst[j] = sub.lambda.get(&[a, b]);
            }
        }
    }
    let mut scope = Scope { z: vec![0.0; n] };
    live.iter().for_each(|&j| scope.z[j] = 1.0);
    let masks = AffinityMasks::from_tensor(lambda)?;
    let scores = crate::compactness::CompactnessScores { raw, flagged: Vec::new() };
    let masks = sbc_cluster_from(&masks, &scores, cfg.stop, sampler, scope)?;
    let features = pool_features(&masks, x)?;
    let pooled = pool_attrs(&masks, attrs)?;
    Ok(WindowResult { masks, features, attrs: pooled })
}

/// Inserts empty masks before the residual so every window has `k` masks.
fn pad_masks(masks: &ClusterMasks, k: usize) -> Result<ClusterMasks> {
    let (have, n) = (masks.k(), masks.n());
    if have == k {
        return Ok(masks.clone());
    }
    let mut data = masks.pi.data()[..(have - 1) * n].to_vec();
    data.resize((k - 1) * n, 0.0);
    data.extend_from_slice(masks.mask(have - 1));
    let mut anchors = masks.anchors[..have - 1].to_vec();
    anchors.resize(k - 1, None);
    anchors.push(None);
    Ok(ClusterMasks { pi: Tensor::new(data, vec![k, n])?, anchors })
}

/// Applies one layer; `layer_index` is 1-based and keys random anchors.
pub fn coca_layer(state: &LayerState, cfg: &LayerConfig, anchor: AnchorMode) -> Result<LayerState> {
    cfg.validate()?;
    let f = &state.features;
    let layout = WindowLayout::square(f.rows, f.cols, f.depth, cfg.t)?;
    let features = if cfg.smoothing_radius > 0 && cfg.smoothing_strength > 0.0 {
        smooth_features(f, cfg.smoothing_radius, cfg.smoothing_strength)
    } else {
        f.clone()
    };
    let layer_index = state.layer + 1;
    let n = layout.nodes_per_window();
    let d = f.dim();
    let results: Vec<WindowResult> = (0..layout.windows())
        .into_par_iter()
        .map(|w| {
            let idx: Vec<usize> = (0..n).map(|j| layout.global_node(w, j)).collect();
            let mut x = Vec::with_capacity(n * d);
            for &g in &idx {
                x.extend_from_slice(features.values.row(g));
            }
            let x = Tensor::new(x, vec![n, d])?;
            let mut sampler = AnchorSampler::for_window(anchor, layer_index, w);
            cluster_window(&x, &state.attrs.gather(&idx), cfg, &mut sampler)
        })
        .collect::<Result<_>>()?;

    let k = results.iter().map(|r| r.masks.k()).max().unwrap_or(1);
    let mut values = Vec::with_capacity(layout.windows() * k * d);
    let mut attrs = NodeAttrs::with_capacity(layout.windows() * k);
    let mut masks = Vec::with_capacity(results.len());
    for r in results {
        let have = r.masks.k();
        // Padding rows sit between the anchored masks and the residual.
        for m in 0..k {
            let src = if m + 1 < have {
                Some(m)
            } else if m + 1 == k {
                Some(have - 1)
            } else {
                None
            };
            match src {
                Some(s) => {
                    values.extend_from_slice(r.features.row(s));
                    attrs.extend(&r.attrs.gather(&[s]));
                }
                None => {
                    values.resize(values.len() + d, 0.0);
                    attrs.extend(&NodeAttrs {
                        area: vec![0.0],
                        mass: vec![0.0],
                        density: vec![0.0],
                        inertia: vec![0.0],
                        position: vec![[0.0, 0.0]],
                    });
                }
            }
        }
        masks.push(pad_masks(&r.masks, k)?);
    }
    let features = FeatureMap::new(Tensor::new(values, vec![layout.windows() * k, d])?, cfg.t, cfg.t, k)?;
    Ok(LayerState { features, attrs, layer: layer_index, masks, layout: Some(layout) })
}

/// Layer-`l` clusters expressed over original pixels.
///
/// `data[w][m]` is the mask of cluster `m` of window `w` over the
/// `block_h x block_w` pixel block covered by that window, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DendrogramLevel {
    pub t: usize,
    pub k: usize,
    pub block_h: usize,
    pub block_w: usize,
    pub data: Tensor,
}

impl DendrogramLevel {
    pub fn mask(&self, window: usize, cluster: usize) -> &[f64] {
        let p = self.block_h * self.block_w;
        let start = (window * self.k + cluster) * p;
        &self.data.data()[start..start + p]
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dendrogram {
    pub levels: Vec<DendrogramLevel>,
}

/// Composes the layer masks `pi` (one per window of `layout`) with the
/// previous level. Without a previous level the layer must act on pixels.
pub fn merge_dendrogram(
    prev: Option<&DendrogramLevel>,
    pi: &[ClusterMasks],
    layout: &WindowLayout,
) -> Result<DendrogramLevel> {
    if pi.len() != layout.windows() || layout.t_rows != layout.t_cols {
        return Err(CocaError::shape(format!("{} mask sets for layout {layout:?}", pi.len())));
    }
    let k = pi.first().map(ClusterMasks::k).unwrap_or(0);
    let n = layout.nodes_per_window();
    if pi.iter().any(|m| m.k() != k || m.n() != n) {
        return Err(CocaError::shape("window masks disagree in shape"));
    }
    let (cbh, cbw) = match prev {
        None if layout.k_in == 1 => (1, 1),
        None => return Err(CocaError::shape("first dendrogram level needs pixel nodes")),
        Some(p) => {
            if p.t != layout.rows() || p.k != layout.k_in {
                return Err(CocaError::shape(format!(
                    "previous level t={} k={} does not feed layout {layout:?}",
                    p.t, p.k
                )));
            }
            (p.block_h, p.block_w)
        }
    };
    let (bh, bw) = (layout.h * cbh, layout.w * cbw);
    let block = bh * bw;
    let mut data = vec![0.0; layout.windows() * k * block];
    data.par_chunks_mut(k * block).enumerate().for_each(|(w, out)| {
        let (a, b) = (w / layout.t_cols, w % layout.t_cols);
        for m in 0..k {
            let row = pi[w].mask(m);
            let dst = &mut out[m * block..(m + 1) * block];
            for (j, &weight) in row.iter().enumerate() {
                if weight == 0.0 {
                    continue;
                }
                let kk = j % layout.k_in;
                let (r, c) = ((j / layout.k_in) / layout.w, (j / layout.k_in) % layout.w);
                match prev {
                    None => dst[r * bw + c] += weight,
                    Some(p) => {
                        let child_window = (a * layout.h + r) * p.t + (b * layout.w + c);
                        let child = p.mask(child_window, kk);
                        for y in 0..cbh {
                            let o = (r * cbh + y) * bw + c * cbw;
                            for (d, s) in dst[o..o + cbw].iter_mut().zip(&child[y * cbw..(y + 1) * cbw]) {
                                *d += weight * s;
                            }
                        }
                    }
                }
            }
        }
    });
    Ok(DendrogramLevel {
        t: layout.t_rows,
        k,
        block_h: bh,
        block_w: bw,
        data: Tensor::new(data, vec![layout.windows(), k, block])?,
    })
}

/// Result of a full hierarchy run.
#[derive(Debug, Clone)]
pub struct NetOutput {
    /// `[K, H * W]` pixel masks of the final-layer clusters; slot
    /// `w * k + m` is cluster `m` of final window `w`.
    pub slot_masks: Tensor,
    pub dendrogram: Dendrogram,
    /// Per-pixel argmax over slots, lowest index on ties.
    pub hard_labels: Vec<usize>,
    /// Anchor of every slot within its final window; `None` for residual
    /// and padding slots.
    pub slot_anchors: Vec<Option<usize>>,
    pub final_state: LayerState,
}

impl NetOutput {
    pub fn slots(&self) -> usize {
        self.slot_masks.shape()[0]
    }

    /// Anchored slots, i.e. everything except residual and padding.
    pub fn anchored_slots(&self) -> usize {
        self.slot_anchors.iter().filter(|a| a.is_some()).count()
    }

    pub fn slot_mask(&self, s: usize) -> &[f64] {
        self.slot_masks.row(s)
    }
}

/// Checks that the layer chain tiles an `h x w` image.
pub fn check_chain(h: usize, w: usize, layers: &[LayerConfig]) -> Result<()> {
    if layers.is_empty() {
        return Err(CocaError::config("at least one layer is required"));
    }
    let (mut rows, mut cols) = (h, w);
    for (i, l) in layers.iter().enumerate() {
        l.validate()?;
        if rows % l.t != 0 || cols % l.t != 0 {
            return Err(CocaError::config(format!(
                "layer {}: node grid {rows}x{cols} is not divisible by t={}",
                i + 1,
                l.t
            )));
        }
        rows = l.t;
        cols = l.t;
    }
    Ok(())
}

pub fn coca_net(img: &Image, layers: &[LayerConfig], enc: &EncoderConfig, anchor: AnchorMode) -> Result<NetOutput> {
    check_chain(img.height, img.width, layers)?;
    let mut state = LayerState::from_pixels(encode_pixels(img, enc)?)?;
    let mut dendrogram = Dendrogram::default();
    for cfg in layers {
        let next = coca_layer(&state, cfg, anchor)?;
        let layout = next.layout.expect("layer sets its layout");
        let level = merge_dendrogram(dendrogram.levels.last(), &next.masks, &layout)?;
        dendrogram.levels.push(level);
        state = next;
    }
    let top = dendrogram.levels.last().expect("non-empty chain");
    let (h, w) = (img.height, img.width);
    let slots = top.t * top.t * top.k;
    let mut slot_masks = Tensor::zeros(&[slots, h * w]);
    for win in 0..top.t * top.t {
        let (a, b) = (win / top.t, win % top.t);
        for m in 0..top.k {
            let src = top.mask(win, m);
            let dst = slot_masks.row_mut(win * top.k + m);
            for y in 0..top.block_h {
                let o = (a * top.block_h + y) * w + b * top.block_w;
                dst[o..o + top.block_w].copy_from_slice(&src[y * top.block_w..(y + 1) * top.block_w]);
            }
        }
    }
    let hard_labels = argmax_labels(&slot_masks);
    let slot_anchors = state.masks.iter().flat_map(|m| m.anchors.iter().copied()).collect();
    Ok(NetOutput { slot_masks, dendrogram, hard_labels, slot_anchors, final_state: state })
}

/// Per-column argmax of a `[K, P]` mask matrix, lowest index on ties.
pub fn argmax_labels(masks: &Tensor) -> Vec<usize> {
    let (k, p) = (masks.rows(), masks.cols());
    let mut best = vec![0usize; p];
    let mut val = masks.row(0).to_vec();
    for s in 1..k {
        for (j, &v) in masks.row(s).iter().enumerate() {
            if v > val[j] {
                val[j] = v;
                best[j] = s;
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ari, LabelMap};
    use proptest::prelude::*;

    fn cm(rows: Vec<Vec<f64>>) -> ClusterMasks {
        let anchors = vec![None; rows.len()];
        ClusterMasks { pi: Tensor::from_rows(&rows).unwrap(), anchors }
    }

    fn two_blocks(h: usize, w: usize) -> Image {
        let mut img = Image::filled(h, w, [0.9, 0.1, 0.1]);
        for r in 0..h {
            for c in w / 2..w {
                img.set_pixel(r, c, [0.1, 0.1, 0.9]);
            }
        }
        img
    }

    #[test]
    fn pooled_attribute_examples() {
        let attrs = init_pixel_attrs(1, 3);
        let pi = cm(vec![vec![1.0, 0.5, 0.0], vec![0.0, 0.5, 1.0]]);
        let p = pool_attrs(&pi, &attrs).unwrap();
        assert_eq!(p.area, vec![1.5, 1.5]);
        assert_eq!(p.mass, vec![1.5, 1.5]);
        assert_eq!(p.density, vec![1.0, 1.0]);
        assert!((p.inertia[0] - 1.5 / 6.0).abs() < 1e-15);
        assert!((p.position[0][1] - 0.5 / 1.5).abs() < 1e-15);
        assert!((p.position[1][1] - 2.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn empty_mask_pools_to_zero() {
        let attrs = init_pixel_attrs(1, 2);
        let pi = cm(vec![vec![0.0, 0.0]]);
        let p = pool_attrs(&pi, &attrs).unwrap();
        assert_eq!((p.area[0], p.density[0], p.position[0]), (0.0, 0.0, [0.0, 0.0]));
        let x = Tensor::from_rows(&[vec![1.0], vec![3.0]]).unwrap();
        assert_eq!(pool_features(&pi, &x).unwrap().data(), &[0.0]);
    }

    #[test]
    fn pooled_features_are_weighted_means() {
        let x = Tensor::from_rows(&[vec![1.0, 0.0], vec![3.0, 2.0]]).unwrap();
        let pi = cm(vec![vec![1.0, 1.0], vec![0.25, 0.75]]);
        let y = pool_features(&pi, &x).unwrap();
        assert_eq!(y.row(0), &[2.0, 1.0]);
        assert_eq!(y.row(1), &[2.5, 1.5]);
    }

    #[test]
    fn uniform_image_single_cluster() {
        let img = Image::filled(4, 4, [0.5; 3]);
        let layers = [LayerConfig::new(2, StopPolicy::Fixed(1), 1.0)];
        let out = coca_net(&img, &layers, &EncoderConfig::default(), AnchorMode::Compact).unwrap();
        assert_eq!(out.slots(), 4);
        assert_eq!(out.anchored_slots(), 0);
        for s in 0..4 {
            // Each residual covers exactly its own 2x2 quadrant.
            let (a, b) = (s / 2, s % 2);
            for p in 0..16 {
                let inside = (p / 4) / 2 == a && (p % 4) / 2 == b;
                assert_eq!(out.slot_mask(s)[p], if inside { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn two_blocks_are_separated() {
        let img = two_blocks(8, 8);
        let layers = [LayerConfig::new(1, StopPolicy::Fixed(3), 4.0)];
        let out = coca_net(&img, &layers, &EncoderConfig::default(), AnchorMode::Compact).unwrap();
        let gt: Vec<usize> = (0..64).map(|p| usize::from(p % 8 >= 4)).collect();
        let pred = LabelMap::new(8, 8, out.hard_labels.clone()).unwrap();
        let truth = LabelMap::new(8, 8, gt).unwrap();
        assert!((ari(&pred, &truth).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn layer_shapes_follow_the_chain() {
        let img = two_blocks(16, 16);
        let layers = [
            LayerConfig::new(4, StopPolicy::Fixed(3), 1.0),
            LayerConfig::new(2, StopPolicy::Fixed(2), 1.0),
            LayerConfig::new(1, StopPolicy::Fixed(5), 1.0),
        ];
        let out = coca_net(&img, &layers, &EncoderConfig::default(), AnchorMode::Compact).unwrap();
        let shapes: Vec<_> = out.dendrogram.levels.iter().map(|l| (l.t, l.k, l.block_h, l.block_w)).collect();
        assert_eq!(shapes, vec![(4, 3, 4, 4), (2, 2, 8, 8), (1, 5, 16, 16)]);
        assert_eq!(out.slot_masks.shape(), &[5, 256]);
        assert_eq!(out.final_state.features.values.rows(), 5);
    }

    #[test]
    fn single_pixel_image() {
        let img = Image::filled(1, 1, [0.3, 0.6, 0.9]);
        let layers = [LayerConfig::new(1, StopPolicy::Fixed(2), 1.0)];
        let out = coca_net(&img, &layers, &EncoderConfig::default(), AnchorMode::Compact).unwrap();
        assert_eq!(out.slots(), 2);
        assert_eq!(out.slot_anchors, vec![Some(0), None]);
        assert_eq!(out.hard_labels, vec![0]);
    }

    #[test]
    fn chain_errors() {
        let img = Image::filled(6, 6, [0.0; 3]);
        let bad = [LayerConfig::new(4, StopPolicy::Fixed(2), 1.0)];
        let err = coca_net(&img, &bad, &EncoderConfig::default(), AnchorMode::Compact).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert_eq!(check_chain(6, 6, &[]).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn merge_composes_child_blocks() {
        // 2x2 pixels, first level t=2 (one pixel per window, k=1), second
        // level one window over four nodes.
        let l1 = WindowLayout::square(2, 2, 1, 2).unwrap();
        let first: Vec<ClusterMasks> = (0..4).map(|_| cm(vec![vec![1.0]])).collect();
        let lvl1 = merge_dendrogram(None, &first, &l1).unwrap();
        assert_eq!((lvl1.block_h, lvl1.block_w), (1, 1));
        let l2 = WindowLayout::square(2, 2, 1, 1).unwrap();
        let second = [cm(vec![vec![1.0, 0.0, 0.5, 0.0], vec![0.0, 1.0, 0.5, 1.0]])];
        let lvl2 = merge_dendrogram(Some(&lvl1), &second, &l2).unwrap();
        assert_eq!(lvl2.mask(0, 0), &[1.0, 0.0, 0.5, 0.0]);
        assert_eq!(lvl2.mask(0, 1), &[0.0, 1.0, 0.5, 1.0]);
        assert!(merge_dendrogram(None, &second, &l1).is_err());
    }

    #[test]
    fn argmax_ties_take_lowest_slot() {
        let m = Tensor::from_rows(&[vec![0.5, 0.2, 0.0], vec![0.5, 0.8, 0.0]]).unwrap();
        assert_eq!(argmax_labels(&m), vec![0, 1, 0]);
    }

    /// Hard labels of a hierarchy whose masks are all binary: each pixel
    /// follows its chain of parents.
    fn oracle_labels(levels: &[(WindowLayout, Vec<Vec<usize>>)], h: usize, w: usize) -> Vec<usize> {
        let mut out = Vec::with_capacity(h * w);
        for r in 0..h {
            for c in 0..w {
                let (mut gr, mut gc, mut kk) = (r, c, 0);
                let mut slot = 0;
                for (layout, assign) in levels {
                    let win = (gr / layout.h) * layout.t_cols + gc / layout.w;
                    let node = ((gr % layout.h) * layout.w + gc % layout.w) * layout.k_in + kk;
                    let m = assign[win][node];
                    slot = win * assign[win].iter().max().map_or(1, |x| x + 1).max(1);
                    slot += m;
                    gr = win / layout.t_cols;
                    gc = win % layout.t_cols;
                    kk = m;
                }
                out.push(slot);
            }
        }
        out
    }

    proptest! {
        #[test]
        fn binary_dendrogram_matches_parent_chain(
            a1 in prop::collection::vec(prop::collection::vec(0usize..2, 4), 4),
            a2 in prop::collection::vec(0usize..3, 8),
        ) {
            // 4x4 pixels: layer 1 has 2x2 windows of 2x2 pixels, k=2; layer 2
            // is one window over 2x2x2 nodes, k=3.
            let to_masks = |assign: &[usize], k: usize| {
                let mut rows = vec![vec![0.0; assign.len()]; k];
                for (j, &m) in assign.iter().enumerate() {
                    rows[m][j] = 1.0;
                }
                cm(rows)
            };
            let l1 = WindowLayout::square(4, 4, 1, 2).unwrap();
            let l2 = WindowLayout::square(2, 2, 2, 1).unwrap();
            let first: Vec<ClusterMasks> = a1.iter().map(|a| to_masks(a, 2)).collect();
            let lvl1 = merge_dendrogram(None, &first, &l1).unwrap();
            let lvl2 = merge_dendrogram(Some(&lvl1), &[to_masks(&a2, 3)], &l2).unwrap();
            let labels = argmax_labels(&Tensor::new(lvl2.data.data().to_vec(), vec![3, 16]).unwrap());
            let expected = oracle_labels(&[(l1, a1.clone()), (l2, vec![a2.clone()])], 4, 4);
            // Pixels whose final cluster is empty elsewhere still map to it.
            prop_assert_eq!(labels, expected);
        }

        #[test]
        fn pooled_totals_cover_every_pixel(seed in 0u64..1000, k1 in 1usize..4, dynamic in any::<bool>()) {
            let mut img = Image::filled(8, 8, [0.0; 3]);
            let mut s = seed;
            for r in 0..8 {
                for c in 0..8 {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let v = (s >> 40) as f64 / (1u64 << 24) as f64;
                    img.set_pixel(r, c, [v, 1.0 - v, (v * 3.0).fract()]);
                }
            }
            let stop = if dynamic { StopPolicy::dynamic() } else { StopPolicy::Fixed(k1) };
            let layers = [LayerConfig::new(2, stop, 1.0), LayerConfig::new(1, StopPolicy::Fixed(3), 1.0)];
            let out = coca_net(&img, &layers, &EncoderConfig::default(), AnchorMode::Compact).unwrap();
            let total_area: f64 = out.final_state.attrs.area.iter().sum();
            let total_mass: f64 = out.final_state.attrs.mass.iter().sum();
            // Soft scopes are reduced by `1 - Π`, so masks may overlap but
            // never leave a node under-covered.
            prop_assert!(total_area >= 64.0 - 1e-9);
            prop_assert!((total_mass - total_area).abs() < 1e-9);
            for p in 0..64 {
                let col: f64 = (0..out.slots()).map(|s| out.slot_mask(s)[p]).sum();
                prop_assert!(col >= 1.0 - 1e-9);
            }
        }
    }
}
