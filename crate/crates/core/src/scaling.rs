//! Runtime scaling of the hierarchy with image size.
//!
//! Every layer uses `u x u` spatial windows until fewer than `u` nodes
//! remain per axis, where a single window closes the hierarchy. The number
//! of layers grows like `log N` while the per-layer work shrinks
//! geometrically, so total time grows close to `N^2`.

use std::time::Instant;

use crate::encoder::EncoderConfig;
use crate::error::{CocaError, Result};
use crate::hierarchy::{coca_net, LayerConfig};
use crate::image::Image;
use crate::sbc::{AnchorMode, StopPolicy};

pub const DEFAULT_WINDOW: usize = 4;
pub const BENCH_CLUSTERS: usize = 4;

/// Layer chain for an `n x n` image with `u x u` windows.
pub fn bench_layers(n: usize, u: usize, k: usize) -> Result<Vec<LayerConfig>> {
    if u < 2 || n == 0 {
        return Err(CocaError::config(format!("invalid scaling setup n={n}, u={u}")));
    }
    let mut layers = Vec::new();
    let mut size = n;
    loop {
        let t = if size >= u {
            if !size.is_multiple_of(u) {
                return Err(CocaError::config(format!("size {n} does not reduce by windows of {u}")));
            }
            size / u
        } else {
            1
        };
        layers.push(LayerConfig::new(t, StopPolicy::Fixed(k), 1.0));
        if t == 1 {
            return Ok(layers);
        }
        size = t;
    }
}

/// Deterministic test pattern: colored quadrant blocks with a diagonal band.
pub fn bench_image(n: usize) -> Image {
    let mut img = Image::filled(n, n, [0.0; 3]);
    for r in 0..n {
        for c in 0..n {
            let block = (4 * r / n) * 4 + 4 * c / n;
            let band = (r + c) % (n / 2).max(1) < n / 8;
            let rgb = if band { [1.0, 1.0, 1.0] } else { [(block % 4) as f64 / 3.0, (block / 4) as f64 / 3.0, 0.5] };
            img.set_pixel(r, c, rgb);
        }
    }
    img
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPoint {
    pub n: usize,
    pub samples: Vec<f64>,
    pub median_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub window: usize,
    pub points: Vec<ScalingPoint>,
    /// Least-squares slope of `ln(time)` against `ln(N)`; needs two sizes.
    pub slope: Option<f64>,
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope through `(x, y)`; `None` for fewer than two
/// distinct `x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Times `reps` full runs per size (after one warm-up run).
pub fn run_scaling(sizes: &[usize], reps: usize, window: usize) -> Result<ScalingReport> {
    if reps == 0 {
        return Err(CocaError::config("reps must be at least 1"));
    }
    let enc = EncoderConfig::default();
    let mut points = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let layers = bench_layers(n, window, BENCH_CLUSTERS)?;
        let img = bench_image(n);
        coca_net(&img, &layers, &enc, AnchorMode::Compact)?;
        let mut samples = Vec::with_capacity(reps);
        for _ in 0..reps {
            let start = Instant::now();
            let out = coca_net(&img, &layers, &enc, AnchorMode::Compact)?;
            samples.push(start.elapsed().as_secs_f64());
            std::hint::black_box(out);
        }
        points.push(ScalingPoint { n, median_secs: median(&samples), samples });
    }
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.n as f64, p.median_secs)).collect();
    Ok(ScalingReport { window, slope: log_log_slope(&pairs), points })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_chains() {
        let ts = |n| bench_layers(n, 4, 4).unwrap().iter().map(|l| l.t).collect::<Vec<_>>();
        assert_eq!(ts(32), vec![8, 2, 1]);
        assert_eq!(ts(64), vec![16, 4, 1]);
        assert_eq!(ts(256), vec![64, 16, 4, 1]);
        assert_eq!(ts(3), vec![1]);
        assert!(bench_layers(40, 4, 4).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = [32.0, 64.0, 128.0].iter().map(|&n: &f64| (n, 3.0 * n.powi(2))).collect();
        assert!((log_log_slope(&pts).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(log_log_slope(&[(32.0, 1.0)]), None);
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0]), 2.5);
    }

    #[test]
    fn single_rep_single_size() {
        let r = run_scaling(&[16], 1, 4).unwrap();
        assert_eq!(r.points.len(), 1);
        assert_eq!(r.points[0].samples.len(), 1);
        assert_eq!(r.slope, None);
    }
}
