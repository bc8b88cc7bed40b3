//! Orthonormal 2D wavelet bases.
//!
//! The workhorse is the multi-level 2D Haar (D2) transform: separable
//! row/column passes with the orthonormal filter pair
//! `s = (a + b)/sqrt(2)`, `d = (a - b)/sqrt(2)`, recursing on the
//! low-pass quadrant. Coefficients use the standard quadrant layout
//! (coarsest approximation block in the top-left, detail bands around it)
//! flattened row-major, so a `CoefficientVector` has the same length N as
//! the frame it came from.
//!
//! A 4-tap Daubechies (D4) forward transform with periodic boundary
//! handling is provided for sparsity comparisons only; there is no D4
//! reconstruction path.

use crate::error::{Error, Result};
use crate::grid::{Frame, GridShape};

/// Default absolute tolerance for [`nnz`]: simulated pre-contact frames
/// are exactly zero, so the tolerance only guards float round-off.
pub const DEFAULT_NNZ_TOL: f64 = 1e-9;

/// Which Daubechies filter the basis uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WaveletKind {
    /// 2-tap Haar. Orthonormal analysis and synthesis.
    D2,
    /// 4-tap Daubechies with periodic wrap-around. Analysis only.
    D4,
}

/// Wavelet coefficients of one frame, standard 2D multilevel layout,
/// length N.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(values: Vec<f64>) -> Self {
        CoefficientVector { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// An orthonormal 2D wavelet basis on a fixed grid shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WaveletBasis {
    kind: WaveletKind,
    shape: GridShape,
    levels: u32,
}

impl WaveletBasis {
    /// `levels` must be at least 1 and no more than [`Self::max_levels`]
    /// for the shape.
    pub fn new(kind: WaveletKind, shape: GridShape, levels: u32) -> Result<Self> {
        let max = Self::max_levels(shape);
        if max == 0 {
            return Err(Error::InvalidParameter(format!(
                "a {}x{} grid cannot be transformed: both dimensions must be even",
                shape.rows(),
                shape.cols()
            )));
        }
        if levels == 0 {
            return Err(Error::InvalidParameter(
                "decomposition needs at least 1 level".into(),
            ));
        }
        if levels > max {
            return Err(Error::InvalidParameter(format!(
                "{}x{} grid supports at most {max} levels, requested {levels}",
                shape.rows(),
                shape.cols()
            )));
        }
        Ok(WaveletBasis {
            kind,
            shape,
            levels,
        })
    }

    /// Maximal decomposition: one level per factor of 2 shared by both
    /// dimensions (40x40 -> 3 levels, 64x64 -> 6 levels).
    pub fn with_max_levels(kind: WaveletKind, shape: GridShape) -> Result<Self> {
        Self::new(kind, shape, Self::max_levels(shape))
    }

    /// Number of times both dimensions divide by 2.
    pub fn max_levels(shape: GridShape) -> u32 {
        (shape.rows().trailing_zeros()).min(shape.cols().trailing_zeros())
    }

    pub fn kind(&self) -> WaveletKind {
        self.kind
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Analysis transform: frame -> coefficients. Norm-preserving.
    pub fn forward(&self, frame: &Frame) -> Result<CoefficientVector> {
        if frame.shape() != self.shape {
            return Err(Error::DimensionMismatch(format!(
                "frame is {}x{}, basis expects {}x{}",
                frame.shape().rows(),
                frame.shape().cols(),
                self.shape.rows(),
                self.shape.cols()
            )));
        }
        let mut data = frame.values().to_vec();
        self.forward_slice(&mut data);
        Ok(CoefficientVector::new(data))
    }

    /// Synthesis transform: coefficients -> frame. D2 only.
    pub fn inverse(&self, coeffs: &CoefficientVector) -> Result<Frame> {
        if coeffs.len() != self.shape.n() {
            return Err(Error::DimensionMismatch(format!(
                "coefficient vector has {} entries, basis expects {}",
                coeffs.len(),
                self.shape.n()
            )));
        }
        if self.kind == WaveletKind::D4 {
            return Err(Error::InvalidParameter(
                "the D4 basis is analysis-only; no reconstruction path".into(),
            ));
        }
        let mut data = coeffs.values.clone();
        self.inverse_slice(&mut data);
        Frame::new(self.shape, data)
    }

    /// In-place analysis on a row-major buffer of length N.
    pub(crate) fn forward_slice(&self, data: &mut [f64]) {
        debug_assert_eq!(data.len(), self.shape.n());
        let stride = self.shape.cols();
        let mut rows = self.shape.rows();
        let mut cols = self.shape.cols();
        let maxdim = rows.max(cols);
        let mut line = vec![0.0; maxdim];
        let mut tmp = vec![0.0; maxdim];
        for _ in 0..self.levels {
            for r in 0..rows {
                let row = &mut data[r * stride..r * stride + cols];
                self.analyze_line(row, &mut tmp[..cols]);
            }
            for c in 0..cols {
                gather_column(data, stride, c, rows, &mut line[..rows]);
                self.analyze_line(&mut line[..rows], &mut tmp[..rows]);
                scatter_column(data, stride, c, &line[..rows]);
            }
            rows /= 2;
            cols /= 2;
        }
    }

    /// In-place synthesis on a row-major buffer of length N (D2 only).
    pub(crate) fn inverse_slice(&self, data: &mut [f64]) {
        debug_assert_eq!(data.len(), self.shape.n());
        debug_assert_eq!(self.kind, WaveletKind::D2);
        let stride = self.shape.cols();
        let maxdim = self.shape.rows().max(self.shape.cols());
        let mut line = vec![0.0; maxdim];
        let mut tmp = vec![0.0; maxdim];
        for level in (0..self.levels).rev() {
            let rows = self.shape.rows() >> level;
            let cols = self.shape.cols() >> level;
            for c in 0..cols {
                gather_column(data, stride, c, rows, &mut line[..rows]);
                haar_synthesize(&mut line[..rows], &mut tmp[..rows]);
                scatter_column(data, stride, c, &line[..rows]);
            }
            for r in 0..rows {
                let row = &mut data[r * stride..r * stride + cols];
                haar_synthesize(row, &mut tmp[..cols]);
            }
        }
    }

    fn analyze_line(&self, line: &mut [f64], tmp: &mut [f64]) {
        match self.kind {
            WaveletKind::D2 => haar_analyze(line, tmp),
            WaveletKind::D4 => d4_analyze(line, tmp),
        }
    }
}

// One orthonormal Haar analysis pass over a line of even length.
fn haar_analyze(line: &mut [f64], tmp: &mut [f64]) {
    let half = line.len() / 2;
    let c = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..half {
        let a = line[2 * k];
        let b = line[2 * k + 1];
        tmp[k] = (a + b) * c;
        tmp[half + k] = (a - b) * c;
    }
    line.copy_from_slice(&tmp[..line.len()]);
}

fn haar_synthesize(line: &mut [f64], tmp: &mut [f64]) {
    let half = line.len() / 2;
    let c = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..half {
        let s = line[k];
        let d = line[half + k];
        tmp[2 * k] = (s + d) * c;
        tmp[2 * k + 1] = (s - d) * c;
    }
    line.copy_from_slice(&tmp[..line.len()]);
}

// Daubechies-4 analysis filters (orthonormal).
fn d4_filters() -> ([f64; 4], [f64; 4]) {
    let s3 = 3.0f64.sqrt();
    let norm = 4.0 * std::f64::consts::SQRT_2;
    let h = [
        (1.0 + s3) / norm,
        (3.0 + s3) / norm,
        (3.0 - s3) / norm,
        (1.0 - s3) / norm,
    ];
    let g = [h[3], -h[2], h[1], -h[0]];
    (h, g)
}

// One D4 analysis pass with periodic wrap-around.
fn d4_analyze(line: &mut [f64], tmp: &mut [f64]) {
    let len = line.len();
    let half = len / 2;
    let (h, g) = d4_filters();
    for k in 0..half {
        let mut s = 0.0;
        let mut d = 0.0;
        for j in 0..4 {
            let x = line[(2 * k + j) % len];
            s += h[j] * x;
            d += g[j] * x;
        }
        tmp[k] = s;
        tmp[half + k] = d;
    }
    line.copy_from_slice(&tmp[..len]);
}

fn gather_column(data: &[f64], stride: usize, col: usize, len: usize, out: &mut [f64]) {
    for (k, slot) in out.iter_mut().enumerate().take(len) {
        *slot = data[k * stride + col];
    }
}

fn scatter_column(data: &mut [f64], stride: usize, col: usize, src: &[f64]) {
    for (k, &v) in src.iter().enumerate() {
        data[k * stride + col] = v;
    }
}

/// Count of coefficients with magnitude above `abs_tol`.
pub fn nnz(coeffs: &CoefficientVector, abs_tol: f64) -> usize {
    debug_assert!(abs_tol >= 0.0);
    coeffs.values.iter().filter(|v| v.abs() > abs_tol).count()
}
