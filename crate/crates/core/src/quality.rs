//! Pixel-wise grasp quality maps and the balanced reconstruction error.

use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::io::pfm;

/// Where a quality map came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QualitySource {
    /// Loaded from an externally produced prediction file.
    External,
    /// Generated by the analytic labeler.
    Analytic,
}

/// Per-pixel grasp quality in [0, 1].
#[derive(Debug, Clone)]
pub struct QualityMap {
    pub values: Grid<f64>,
    pub source: QualitySource,
}

impl QualityMap {
    /// Wraps a grid as a quality map, verifying the value range.
    pub fn new(values: Grid<f64>, source: QualitySource) -> Result<Self> {
        for (u, v, &q) in values.iter_pixels() {
            if !(0.0..=1.0).contains(&q) {
                return Err(Error::InvalidValue(format!(
                    "quality at ({u}, {v}) is {q}, outside [0, 1]"
                )));
            }
        }
        Ok(Self { values, source })
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }
}

/// Loads a quality map from a single-channel PFM file.
///
/// Dimensions are checked against `expected_dims` (width, height). Non-finite
/// values are always rejected. Out-of-range values are rejected in strict
/// mode and clamped otherwise.
pub fn load_quality(
    path: &Path,
    expected_dims: (usize, usize),
    strict: bool,
) -> Result<QualityMap> {
    let mut values = pfm::read_pfm(path)?;
    if values.dims() != expected_dims {
        return Err(Error::DimensionMismatch {
            expected_w: expected_dims.0,
            expected_h: expected_dims.1,
            got_w: values.width(),
            got_h: values.height(),
        });
    }
    for (u, v, &q) in values.iter_pixels() {
        if !q.is_finite() {
            return Err(Error::parse(
                path,
                format!("non-finite quality value at ({u}, {v})"),
            ));
        }
        if strict && !(0.0..=1.0).contains(&q) {
            return Err(Error::parse(
                path,
                format!("quality value {q} at ({u}, {v}) outside [0, 1] (strict mode)"),
            ));
        }
    }
    for q in values.data_mut() {
        *q = q.clamp(0.0, 1.0);
    }
    QualityMap::new(values, QualitySource::External)
}

/// Writes a quality map as single-channel PFM.
pub fn save_quality(path: &Path, quality: &QualityMap) -> Result<()> {
    pfm::write_pfm(path, &quality.values)
}

/// Per-image foreground/background balancing weights.
///
/// `w_fg = N / (2 N_fg)` and `w_bg = N / (2 N_bg)`, so that a uniform error
/// field yields the plain mean-squared error. When one side is empty its
/// term is dropped and the other weight is 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorWeights {
    pub w_bg: f64,
    pub w_fg: f64,
}

impl ErrorWeights {
    /// Computes balanced weights from a mask where `true` marks background.
    pub fn balanced(bg_mask: &Grid<bool>) -> Self {
        let n = bg_mask.len() as f64;
        let n_bg = bg_mask.data().iter().filter(|&&b| b).count() as f64;
        let n_fg = n - n_bg;
        ErrorWeights {
            w_bg: if n_bg > 0.0 && n_fg > 0.0 {
                n / (2.0 * n_bg)
            } else if n_bg > 0.0 {
                1.0
            } else {
                0.0
            },
            w_fg: if n_bg > 0.0 && n_fg > 0.0 {
                n / (2.0 * n_fg)
            } else if n_fg > 0.0 {
                1.0
            } else {
                0.0
            },
        }
    }
}

/// Foreground/background-balanced mean-squared error between a prediction
/// and reference labels. `bg_mask` marks background pixels with `true`.
///
/// Returns `w_bg * MSE(bg ∘ E) + w_fg * MSE(fg ∘ E)` with `E = labels −
/// prediction`, where each masked MSE divides by the total pixel count.
pub fn weighted_mse(
    prediction: &QualityMap,
    labels: &QualityMap,
    bg_mask: &Grid<bool>,
) -> Result<f64> {
    prediction.values.require_same_dims(&labels.values)?;
    prediction.values.require_same_dims(bg_mask)?;
    let n = bg_mask.len() as f64;
    if n == 0.0 {
        return Ok(0.0);
    }
    let weights = ErrorWeights::balanced(bg_mask);
    let mut sum_bg = 0.0;
    let mut sum_fg = 0.0;
    for ((p, l), &bg) in prediction
        .values
        .data()
        .iter()
        .zip(labels.values.data())
        .zip(bg_mask.data())
    {
        let e = (l - p) * (l - p);
        if bg {
            sum_bg += e;
        } else {
            sum_fg += e;
        }
    }
    Ok(weights.w_bg * sum_bg / n + weights.w_fg * sum_fg / n)
}
