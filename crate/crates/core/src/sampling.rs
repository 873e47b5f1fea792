//! Row-selection observation operator between aligned high- and
//! low-resolution range grids, and its adjoint.
//!
//! The operator is the 0/1 matrix with one unit entry per selected row, so
//! `D D^T = I` and `D^T D` is diagonal.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rangeview::RangeImage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SamplingError {
    #[error("invalid row selection: {0}")]
    Config(String),
    #[error("dimension mismatch: expected {expected} rows, got {got}")]
    Rows { expected: usize, got: usize },
    #[error("width mismatch: {0} vs {1}")]
    Width(usize, usize),
}

/// Selected high-resolution row indices, strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowSelection {
    h_hi: usize,
    rows: Vec<usize>,
}

impl RowSelection {
    pub fn new(h_hi: usize, rows: Vec<usize>) -> Result<Self, SamplingError> {
        if rows.is_empty() || rows.len() > h_hi {
            return Err(SamplingError::Config(format!(
                "need between 1 and {h_hi} rows, got {}",
                rows.len()
            )));
        }
        if rows.windows(2).any(|w| w[0] >= w[1]) {
            return Err(SamplingError::Config("rows must be strictly increasing".into()));
        }
        if let Some(&last) = rows.last() {
            if last >= h_hi {
                return Err(SamplingError::Config(format!("row {last} out of range for {h_hi} rows")));
            }
        }
        Ok(Self { h_hi, rows })
    }

    /// Every `h_hi / h_lo`-th row starting at `offset`.
    pub fn uniform(h_hi: usize, h_lo: usize, offset: usize) -> Result<Self, SamplingError> {
        if h_lo == 0 || h_hi == 0 || !h_hi.is_multiple_of(h_lo) {
            return Err(SamplingError::Config(format!(
                "{h_hi} high-res rows are not divisible into {h_lo} low-res rows"
            )));
        }
        let stride = h_hi / h_lo;
        if offset >= stride {
            return Err(SamplingError::Config(format!(
                "offset {offset} must be below the stride {stride}"
            )));
        }
        Self::new(h_hi, (0..h_lo).map(|k| offset + k * stride).collect())
    }

    pub fn h_hi(&self) -> usize {
        self.h_hi
    }

    pub fn h_lo(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    /// For each high-res row, the low-res row observing it.
    pub fn inverse_map(&self) -> Vec<Option<usize>> {
        let mut map = vec![None; self.h_hi];
        for (k, &r) in self.rows.iter().enumerate() {
            map[r] = Some(k);
        }
        map
    }

    /// Diagonal of `D^T D`: 1 on selected rows, 0 elsewhere.
    pub fn gram_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.h_hi];
        for &r in &self.rows {
            d[r] = 1.0;
        }
        d
    }

    /// For each high-res row, the nearest selected row (as a low-res index),
    /// ties going to the smaller index.
    pub fn nearest_observed(&self) -> Vec<usize> {
        (0..self.h_hi)
            .map(|i| {
                let mut best = 0;
                let mut best_d = usize::MAX;
                for (k, &r) in self.rows.iter().enumerate() {
                    let d = r.abs_diff(i);
                    if d < best_d {
                        best_d = d;
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

pub fn uniform_selection(h_hi: usize, h_lo: usize, offset: usize) -> Result<RowSelection, SamplingError> {
    RowSelection::uniform(h_hi, h_lo, offset)
}

/// `S = D T`: copies the selected rows (ranges, masks and intensities).
pub fn apply(t: &RangeImage, sel: &RowSelection) -> Result<RangeImage, SamplingError> {
    if t.height() != sel.h_hi() {
        return Err(SamplingError::Rows {
            expected: sel.h_hi(),
            got: t.height(),
        });
    }
    let w = t.width();
    let cfg = t.config().with_height(sel.h_lo());
    let mut range = Vec::with_capacity(cfg.len());
    let mut valid = Vec::with_capacity(cfg.len());
    let mut intensity = t.intensity().map(|_| Vec::with_capacity(cfg.len()));
    for &r in sel.rows() {
        range.extend_from_slice(t.row(r));
        valid.extend_from_slice(t.row_mask(r));
        if let (Some(out), Some(src)) = (intensity.as_mut(), t.intensity()) {
            out.extend_from_slice(&src[r * w..(r + 1) * w]);
        }
    }
    Ok(RangeImage::from_raw(cfg, range, valid, intensity))
}

/// `D^T S`: scatters low-res rows into their high-res positions; all other
/// rows are invalid (zero under [`RangeImage::value`]).
pub fn adjoint(s: &RangeImage, sel: &RowSelection) -> Result<RangeImage, SamplingError> {
    if s.height() != sel.h_lo() {
        return Err(SamplingError::Rows {
            expected: sel.h_lo(),
            got: s.height(),
        });
    }
    let w = s.width();
    let cfg = s.config().with_height(sel.h_hi());
    let mut range = vec![0.0; cfg.len()];
    let mut valid = vec![false; cfg.len()];
    let mut intensity = s.intensity().map(|_| vec![0.0; cfg.len()]);
    for (k, &r) in sel.rows().iter().enumerate() {
        range[r * w..(r + 1) * w].copy_from_slice(s.row(k));
        valid[r * w..(r + 1) * w].copy_from_slice(s.row_mask(k));
        if let (Some(out), Some(src)) = (intensity.as_mut(), s.intensity()) {
            out[r * w..(r + 1) * w].copy_from_slice(&src[k * w..(k + 1) * w]);
        }
    }
    Ok(RangeImage::from_raw(cfg, range, valid, intensity))
}

pub fn gram_diagonal(sel: &RowSelection) -> Vec<f64> {
    sel.gram_diagonal()
}

/// Inner product over masked values (invalid pixels count as zero).
pub fn inner(a: &RangeImage, b: &RangeImage) -> Result<f64, SamplingError> {
    if a.height() != b.height() {
        return Err(SamplingError::Rows {
            expected: a.height(),
            got: b.height(),
        });
    }
    if a.width() != b.width() {
        return Err(SamplingError::Width(a.width(), b.width()));
    }
    Ok((0..a.ranges().len()).map(|i| a.value(i) * b.value(i)).sum())
}
