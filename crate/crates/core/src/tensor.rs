//! Dense row-major tensors and the non-overlapping window partitioning used
//! by every layer of the hierarchy.
//!
//! Shapes are listed outer-to-inner. A `[H, W, K, D]` tensor stores node
//! `(r, c, k)` at rows `((r * W + c) * K + k) * D ..`. Windows produced by
//! [`unfold_windows`] are ordered row-major over the window grid and the nodes
//! inside a window keep the same `(r, c, k)` order.

use crate::error::{CocaError, Result};

/// A dense `f64` tensor with row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    data: Vec<f64>,
    shape: Vec<usize>,
}

impl Tensor {
    pub fn new(data: Vec<f64>, shape: Vec<usize>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(CocaError::shape(format!("zero extent in shape {shape:?}")));
        }
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(CocaError::shape(format!("shape {shape:?} needs {expected} values, got {}", data.len())));
        }
        Ok(Self { data, shape })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::filled(shape, 0.0)
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        assert!(shape.iter().all(|&e| e > 0), "zero extent in shape {shape:?}");
        Self { data: vec![value; shape.iter().product()], shape: shape.to_vec() }
    }

    /// Builds an `rows x cols` matrix from row slices of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(CocaError::shape("ragged rows"));
        }
        Self::new(rows.concat(), vec![rows.len(), cols])
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(self, shape: Vec<usize>) -> Result<Self> {
        Self::new(self.data, shape)
    }

    fn offset(&self, index: &[usize]) -> usize {
        assert_eq!(index.len(), self.shape.len(), "index rank mismatch");
        index.iter().zip(&self.shape).fold(0, |acc, (&i, &e)| {
            assert!(i < e, "index {index:?} out of bounds for {:?}", self.shape);
            acc * e + i
        })
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        self.data[self.offset(index)]
    }

    pub fn set(&mut self, index: &[usize], value: f64) {
        let o = self.offset(index);
        self.data[o] = value;
    }

    /// Number of rows when the tensor is viewed as a matrix whose row length
    /// is the innermost extent.
    pub fn rows(&self) -> usize {
        self.data.len() / self.cols()
    }

    /// Innermost extent.
    pub fn cols(&self) -> usize {
        *self.shape.last().expect("tensor has at least one axis")
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let c = self.cols();
        &mut self.data[i * c..(i + 1) * c]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.cols())
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Sum of every row, in row order.
    pub fn row_sums(&self) -> Vec<f64> {
        self.iter_rows().map(|r| r.iter().sum()).collect()
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, rhs: &Tensor) -> Result<Tensor> {
        if self.shape.len() != 2 || rhs.shape.len() != 2 || self.shape[1] != rhs.shape[0] {
            return Err(CocaError::shape(format!("cannot multiply {:?} by {:?}", self.shape, rhs.shape)));
        }
        let (m, k, n) = (self.shape[0], self.shape[1], rhs.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(&rhs.data[p * n..(p + 1) * n]) {
                    *o += a * b;
                }
            }
        }
        Tensor::new(out, vec![m, n])
    }
}

/// Geometry of one layer's window partition.
///
/// `t_rows x t_cols` windows, each holding `h x w x k_in` nodes. The
/// hierarchy always uses square grids; rectangular grids are accepted here so
/// that unfolding itself never has to reject a valid block decomposition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowLayout {
    pub t_rows: usize,
    pub t_cols: usize,
    pub h: usize,
    pub w: usize,
    pub k_in: usize,
}

impl WindowLayout {
    /// Square `t x t` partition of an `rows x cols x k_in` node grid.
    pub fn square(rows: usize, cols: usize, k_in: usize, t: usize) -> Result<Self> {
        Self::rect(rows, cols, k_in, t, t)
    }

    pub fn rect(rows: usize, cols: usize, k_in: usize, t_rows: usize, t_cols: usize) -> Result<Self> {
        if t_rows == 0 || t_cols == 0 {
            return Err(CocaError::config("window count per axis must be at least 1"));
        }
        if rows == 0 || cols == 0 || k_in == 0 {
            return Err(CocaError::shape(format!("empty node grid {rows}x{cols}x{k_in}")));
        }
        if !rows.is_multiple_of(t_rows) {
            return Err(CocaError::config(format!("row axis: extent {rows} is not divisible by {t_rows} windows")));
        }
        if !cols.is_multiple_of(t_cols) {
            return Err(CocaError::config(format!("column axis: extent {cols} is not divisible by {t_cols} windows")));
        }
        Ok(Self { t_rows, t_cols, h: rows / t_rows, w: cols / t_cols, k_in })
    }

    pub fn windows(&self) -> usize {
        self.t_rows * self.t_cols
    }

    /// Nodes per window, `h * w * k_in`.
    pub fn nodes_per_window(&self) -> usize {
        self.h * self.w * self.k_in
    }

    pub fn rows(&self) -> usize {
        self.t_rows * self.h
    }

    pub fn cols(&self) -> usize {
        self.t_cols * self.w
    }

    /// Maps `(window, node-in-window)` to the flat node index of the folded
    /// `[rows, cols, k_in]` grid.
    #[inline]
    pub fn global_node(&self, window: usize, node: usize) -> usize {
        let (a, b) = (window / self.t_cols, window % self.t_cols);
        let kk = node % self.k_in;
        let rc = node / self.k_in;
        let (r, c) = (rc / self.w, rc % self.w);
        let row = a * self.h + r;
        let col = b * self.w + c;
        (row * self.cols() + col) * self.k_in + kk
    }
}

fn check_rank4(x: &Tensor) -> Result<[usize; 4]> {
    match *x.shape() {
        [h, w, k, d] => Ok([h, w, k, d]),
        ref s => Err(CocaError::shape(format!("expected a [H, W, K, D] tensor, got {s:?}"))),
    }
}

/// Splits a `[H, W, K, D]` tensor into `t * t` windows, returning
/// `[t*t, n, D]` with `n = (H/t) * (W/t) * K`.
pub fn unfold_windows(x: &Tensor, t: usize) -> Result<Tensor> {
    let [h, w, k, _] = check_rank4(x)?;
    let layout = WindowLayout::square(h, w, k, t)?;
    unfold_with_layout(x, &layout)
}

/// Like [`unfold_windows`] with independent window counts per axis.
pub fn unfold_windows_rect(x: &Tensor, t_rows: usize, t_cols: usize) -> Result<Tensor> {
    let [h, w, k, _] = check_rank4(x)?;
    let layout = WindowLayout::rect(h, w, k, t_rows, t_cols)?;
    unfold_with_layout(x, &layout)
}

pub(crate) fn unfold_with_layout(x: &Tensor, layout: &WindowLayout) -> Result<Tensor> {
    let [h, w, k, d] = check_rank4(x)?;
    if h != layout.rows() || w != layout.cols() || k != layout.k_in {
        return Err(CocaError::shape(format!("tensor {:?} does not match layout {layout:?}", x.shape())));
    }
    let n = layout.nodes_per_window();
    let mut out = Vec::with_capacity(x.len());
    for win in 0..layout.windows() {
        for node in 0..n {
            let g = layout.global_node(win, node);
            out.extend_from_slice(&x.data()[g * d..(g + 1) * d]);
        }
    }
    Tensor::new(out, vec![layout.windows(), n, d])
}

/// Inverse of [`unfold_windows`].
pub fn fold_windows(x: &Tensor, layout: &WindowLayout) -> Result<Tensor> {
    let [windows, n, d] = match *x.shape() {
        [a, b, c] => [a, b, c],
        ref s => return Err(CocaError::shape(format!("expected [t*t, n, D], got {s:?}"))),
    };
    if windows != layout.windows() || n != layout.nodes_per_window() {
        return Err(CocaError::shape(format!("tensor {:?} does not match layout {layout:?}", x.shape())));
    }
    let mut out = vec![0.0; x.len()];
    for win in 0..windows {
        for node in 0..n {
            let g = layout.global_node(win, node);
            let src = (win * n + node) * d;
            out[g * d..(g + 1) * d].copy_from_slice(&x.data()[src..src + d]);
        }
    }
    Tensor::new(out, vec![layout.rows(), layout.cols(), layout.k_in, d])
}

/// Node features: an `n x d` matrix whose rows are the nodes of a
/// `rows x cols x depth` grid in row-major `(r, c, k)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub values: Tensor,
    pub rows: usize,
    pub cols: usize,
    pub depth: usize,
}

impl FeatureMap {
    pub fn new(values: Tensor, rows: usize, cols: usize, depth: usize) -> Result<Self> {
        if values.shape().len() != 2 || values.shape()[0] != rows * cols * depth {
            return Err(CocaError::shape(format!(
                "feature matrix {:?} does not hold {rows}x{cols}x{depth} nodes",
                values.shape()
            )));
        }
        Ok(Self { values, rows, cols, depth })
    }

    pub fn nodes(&self) -> usize {
        self.values.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.values.shape()[1]
    }

    /// The same data viewed as `[rows, cols, depth, d]`.
    pub fn as_grid(&self) -> Tensor {
        self.values
            .clone()
            .reshape(vec![self.rows, self.cols, self.depth, self.dim()])
            .expect("feature map shape is consistent")
    }
}
