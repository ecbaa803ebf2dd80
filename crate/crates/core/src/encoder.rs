//! Fixed (non-learned) pixel features built from color and position.
//!
//! Every pixel gets the raw vector
//! `(cw*R, cw*G, cw*B, pw*top, pw*bottom, pw*left, pw*right)` where the four
//! position channels are the normalized distances to the image borders. The
//! raw vector is then mapped to `d0` dimensions:
//!
//! * `d0 == 6`: the `right` channel is dropped (it equals `pw - left`);
//! * `d0 == 7`: the raw vector is used as is;
//! * `d0 >= 8`: a seeded embedding with orthonormal, zero-mean columns.
//!
//! The embedding is an isometry, so pairwise distances are exactly those of
//! the raw vectors, and zero-mean columns leave per-node centering untouched.

use crate::error::{CocaError, Result};
use crate::image::Image;
use crate::tensor::{FeatureMap, Tensor};
use crate::util::orthonormal_columns;

const RAW_DIM: usize = 7;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderConfig {
    /// Output feature dimension, at least 6.
    pub d0: usize,
    pub color_weight: f64,
    pub position_weight: f64,
    /// Neighborhood radius of the optional smoothing pass; 0 disables it.
    pub smoothing_radius: usize,
    pub smoothing_strength: f64,
    pub projection_seed: u64,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            d0: 16,
            color_weight: 1.0,
            position_weight: 0.25,
            smoothing_radius: 0,
            smoothing_strength: 0.0,
            projection_seed: 0,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d0 < 6 {
            return Err(CocaError::config(format!("encoder.d0 must be at least 6, got {}", self.d0)));
        }
        if !(self.color_weight >= 0.0 && self.position_weight >= 0.0) {
            return Err(CocaError::config("encoder weights must be non-negative"));
        }
        if self.smoothing_strength.is_nan() || self.smoothing_strength < 0.0 {
            return Err(CocaError::config("encoder.smoothing_strength must be non-negative"));
        }
        Ok(())
    }
}

/// `[h, w, 4]` normalized distances to the (top, bottom, left, right)
/// borders. Opposite channels sum to 1; a single-pixel extent sits at 0.5.
pub fn encode_position(h: usize, w: usize) -> Tensor {
    let norm = |i: usize, extent: usize| if extent > 1 { i as f64 / (extent - 1) as f64 } else { 0.5 };
    let mut data = Vec::with_capacity(h * w * 4);
    for r in 0..h {
        let top = norm(r, h);
        for c in 0..w {
            let left = norm(c, w);
            data.extend_from_slice(&[top, 1.0 - top, left, 1.0 - left]);
        }
    }
    Tensor::new(data, vec![h, w, 4]).expect("positive extents")
}

/// Initial per-pixel features of `img`, one row per pixel in row-major order.
pub fn encode_pixels(img: &Image, cfg: &EncoderConfig) -> Result<FeatureMap> {
    cfg.validate()?;
    let (h, w) = (img.height, img.width);
    let pos = encode_position(h, w);
    let embed = (cfg.d0 > RAW_DIM).then(|| orthonormal_columns(cfg.d0, RAW_DIM, cfg.projection_seed, true));
    let mut data = Vec::with_capacity(h * w * cfg.d0);
    let mut raw = [0.0; RAW_DIM];
    for p in 0..h * w {
        let rgb = &img.data[p * 3..p * 3 + 3];
        for (dst, &v) in raw[..3].iter_mut().zip(rgb) {
            *dst = cfg.color_weight * v;
        }
        for (dst, &v) in raw[3..].iter_mut().zip(&pos.data()[p * 4..p * 4 + 4]) {
            *dst = cfg.position_weight * v;
        }
        match &embed {
            None => data.extend_from_slice(&raw[..cfg.d0]),
            Some(q) => {
                for r in 0..cfg.d0 {
                    let row = &q[r * RAW_DIM..(r + 1) * RAW_DIM];
                    data.push(row.iter().zip(&raw).map(|(a, b)| a * b).sum());
                }
            }
        }
    }
    let values = Tensor::new(data, vec![h * w, cfg.d0])?;
    let features = FeatureMap::new(values, h, w, 1)?;
    if cfg.smoothing_radius > 0 && cfg.smoothing_strength > 0.0 {
        Ok(smooth_features(&features, cfg.smoothing_radius, cfg.smoothing_strength))
    } else {
        Ok(features)
    }
}

/// One step of similarity-weighted diffusion over the `(2r+1)^2` spatial
/// neighborhood (all depth slots of each neighboring cell are included).
///
/// `x_i + strength / S * sum_j w_ij (x_j - x_i)` with
/// `w_ij = exp(-|x_i - x_j|^2 / d)` and `S` the full neighborhood size. For
/// an interior node with uniform weights and `strength = 1` this is exactly
/// the neighborhood mean. The weights are symmetric, so the global feature
/// mean is preserved for any input.
pub fn smooth_features(x: &FeatureMap, radius: usize, strength: f64) -> FeatureMap {
    if radius == 0 || strength == 0.0 {
        return x.clone();
    }
    let (rows, cols, depth, d) = (x.rows, x.cols, x.depth, x.dim());
    let span = (2 * radius + 1) * (2 * radius + 1) * depth;
    let scale = strength / span as f64;
    let src = x.values.data();
    let mut out = src.to_vec();
    for r in 0..rows {
        for c in 0..cols {
            for k in 0..depth {
                let i = (r * cols + c) * depth + k;
                let xi = &src[i * d..(i + 1) * d];
                let mut delta = vec![0.0; d];
                for rr in r.saturating_sub(radius)..(r + radius + 1).min(rows) {
                    for cc in c.saturating_sub(radius)..(c + radius + 1).min(cols) {
                        for kk in 0..depth {
                            let j = (rr * cols + cc) * depth + kk;
                            if j == i {
                                continue;
                            }
                            let xj = &src[j * d..(j + 1) * d];
                            let dist: f64 = xi.iter().zip(xj).map(|(a, b)| (a - b) * (a - b)).sum();
                            let wgt = (-dist / d as f64).exp();
                            for ((acc, a), b) in delta.iter_mut().zip(xi).zip(xj) {
                                *acc += wgt * (b - a);
                            }
                        }
                    }
                }
                for (o, dv) in out[i * d..(i + 1) * d].iter_mut().zip(&delta) {
                    *o += scale * dv;
                }
            }
        }
    }
    let values = Tensor::new(out, x.values.shape().to_vec()).expect("same shape");
    FeatureMap { values, ..x.clone() }
}
