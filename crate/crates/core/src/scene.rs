//! Seeded synthetic scenes of uniformly colored shapes with ground truth.
//!
//! Object `i` gets label `i`; background pixels get label `n` (and `n + 1`
//! for the right half of a two-tone background).

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{CocaError, Result};
use crate::image::Image;
use crate::metrics::LabelMap;
use crate::util::keyed_rng;

/// Minimum Chebyshev distance between any two palette or background colors.
pub const MIN_COLOR_DISTANCE: f64 = 0.2;
pub const PLACEMENT_RETRIES: usize = 1000;
pub const DEFAULT_BACKGROUND: [f64; 3] = [0.5, 0.5, 0.5];
/// Right-half color of the default two-tone background.
pub const DEFAULT_SECOND_BACKGROUND: [f64; 3] = [0.15, 0.40, 0.25];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rect,
    Disk,
    /// Four square cells in an L, in one of four orientations.
    LTetromino,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Background {
    Solid([f64; 3]),
    /// Left and right halves in different colors.
    TwoTone([f64; 3], [f64; 3]),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub height: usize,
    pub width: usize,
    /// Inclusive object count range.
    pub n_objects: (usize, usize),
    /// Inclusive bounding-box extent range of one object in pixels.
    pub object_size: (usize, usize),
    pub shapes: Vec<Shape>,
    pub palette: Vec<[f64; 3]>,
    pub allow_overlap: bool,
    pub background: Background,
    pub seed: u64,
}

/// Eleven object colors; together with the default background colors no two
/// are positive multiples of each other.
pub fn default_palette() -> Vec<[f64; 3]> {
    vec![
        [0.90, 0.10, 0.10],
        [0.10, 0.75, 0.15],
        [0.15, 0.25, 0.95],
        [0.95, 0.90, 0.10],
        [0.90, 0.15, 0.90],
        [0.10, 0.90, 0.90],
        [1.00, 0.55, 0.00],
        [0.30, 0.05, 0.70],
        [0.40, 0.65, 0.00],
        [0.95, 0.35, 0.55],
        [0.00, 0.45, 0.70],
    ]
}

impl SceneSpec {
    pub fn new(height: usize, width: usize, n_objects: (usize, usize), seed: u64) -> Self {
        let extent = height.min(width);
        Self {
            height,
            width,
            n_objects,
            object_size: ((extent / 6).max(2), (extent * 5 / 16).max(3)),
            shapes: vec![Shape::Rect, Shape::Disk, Shape::LTetromino],
            palette: default_palette(),
            allow_overlap: false,
            background: Background::Solid(DEFAULT_BACKGROUND),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.n_objects;
        if lo > hi {
            return Err(CocaError::config("object count range is empty"));
        }
        if hi > self.palette.len() {
            return Err(CocaError::config(format!("palette has {} colors for up to {hi} objects", self.palette.len())));
        }
        let (smin, smax) = self.object_size;
        if smin < 2 || smin > smax || smax + 2 > self.height.min(self.width) {
            return Err(CocaError::config(format!("object size range {smin}..={smax} does not fit the image")));
        }
        if hi > 0 && self.shapes.is_empty() {
            return Err(CocaError::config("no shapes to draw"));
        }
        let mut colors = self.palette.clone();
        match self.background {
            Background::Solid(c) => colors.push(c),
            Background::TwoTone(a, b) => colors.extend([a, b]),
        }
        for (i, a) in colors.iter().enumerate() {
            for b in &colors[i + 1..] {
                let d = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
                if d < MIN_COLOR_DISTANCE {
                    return Err(CocaError::config(format!(
                        "colors {a:?} and {b:?} are closer than {MIN_COLOR_DISTANCE}"
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub image: Image,
    pub gt: LabelMap,
    pub bg_ids: Vec<usize>,
    pub n_objects: usize,
    pub shapes: Vec<Shape>,
}

/// Rasterized shape as a `bh x bw` occupancy grid.
fn rasterize<R: Rng>(shape: Shape, size: usize, rng: &mut R) -> (usize, usize, Vec<bool>) {
    match shape {
        Shape::Rect => {
            let h = size;
            let w = rng.random_range((size * 2 / 3).max(2)..=size);
            let (h, w) = if rng.random_bool(0.5) { (h, w) } else { (w, h) };
            (h, w, vec![true; h * w])
        }
        Shape::Disk => {
            let r = size as f64 / 2.0;
            let c = (size as f64 - 1.0) / 2.0;
            let cells = (0..size * size)
                .map(|p| {
                    let (y, x) = ((p / size) as f64 - c, (p % size) as f64 - c);
                    y * y + x * x <= r * r
                })
                .collect();
            (size, size, cells)
        }
        Shape::LTetromino => {
            let s = (size / 3).max(1);
            // Base L: a 3x1 column of cells with a foot at the bottom right.
            let base = [(0, 0), (1, 0), (2, 0), (2, 1)];
            let turns = rng.random_range(0..4);
            let cells: Vec<(usize, usize)> = base
                .iter()
                .map(|&(r, c)| match turns {
                    0 => (r, c),
                    1 => (c, 2 - r),
                    2 => (2 - r, 1 - c),
                    _ => (1 - c, r),
                })
                .collect();
            let (ch, cw) = if turns % 2 == 0 { (3, 2) } else { (2, 3) };
            let (h, w) = (ch * s, cw * s);
            let mut grid = vec![false; h * w];
            for (r, c) in cells {
                for y in r * s..(r + 1) * s {
                    grid[y * w + c * s..y * w + (c + 1) * s].fill(true);
                }
            }
            (h, w, grid)
        }
    }
}

/// Scene `index` of the family described by `spec`; equal inputs give
/// bit-identical scenes.
pub fn generate_scene(spec: &SceneSpec, index: u64) -> Result<Scene> {
    spec.validate()?;
    let (h, w) = (spec.height, spec.width);
    let mut rng = keyed_rng(spec.seed, index, 0x7363_656e);
    let n = rng.random_range(spec.n_objects.0..=spec.n_objects.1);
    let colors = sample(&mut rng, spec.palette.len(), n).into_vec();
    let mut labels = vec![n; h * w];
    let mut bg_ids = vec![n];
    if let Background::TwoTone(..) = spec.background {
        bg_ids.push(n + 1);
        for (p, l) in labels.iter_mut().enumerate() {
            if p % w >= w / 2 {
                *l = n + 1;
            }
        }
    }
    let mut shapes = Vec::with_capacity(n);
    for obj in 0..n {
        let shape = spec.shapes[rng.random_range(0..spec.shapes.len())];
        let mut placed = false;
        for _ in 0..PLACEMENT_RETRIES {
            let size = rng.random_range(spec.object_size.0..=spec.object_size.1);
            let (bh, bw, cells) = rasterize(shape, size, &mut rng);
            if bh + 2 > h || bw + 2 > w {
                continue;
            }
            let top = rng.random_range(1..=h - 1 - bh);
            let left = rng.random_range(1..=w - 1 - bw);
            let covered = |y: usize, x: usize| (top + y) * w + left + x;
            let free = spec.allow_overlap
                || (0..bh * bw).all(|q| !cells[q] || bg_ids.contains(&labels[covered(q / bw, q % bw)]));
            if free {
                for q in (0..bh * bw).filter(|&q| cells[q]) {
                    labels[covered(q / bw, q % bw)] = obj;
                }
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(CocaError::config(format!("could not place object {obj} after {PLACEMENT_RETRIES} attempts")));
        }
        shapes.push(shape);
    }
    let mut image = Image::filled(h, w, [0.0; 3]);
    for (p, &l) in labels.iter().enumerate() {
        let rgb = if l < n {
            spec.palette[colors[l]]
        } else {
            match spec.background {
                Background::Solid(c) => c,
                Background::TwoTone(a, b) => {
                    if l == n {
                        a
                    } else {
                        b
                    }
                }
            }
        };
        image.set_pixel(p / w, p % w, rgb);
    }
    let gt = LabelMap::new(h, w, labels)?;
    Ok(Scene { image, gt, bg_ids, n_objects: n, shapes })
}
