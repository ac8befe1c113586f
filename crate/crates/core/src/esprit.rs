//! Rank-2 ESPRIT estimate of the dominant frequency of a short sequence.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Matrix2};

use crate::error::{Error, Result};
use crate::ssa::{lag_covariance, sorted_eigen, RANK_CUTOFF};

/// A frequency in cycles per sample, within `[0, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FrequencyEstimate(f64);

impl FrequencyEstimate {
    pub fn new(freq: f64) -> Self {
        Self(freq.clamp(0.0, 0.5))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Inner window used to embed a sequence of length `len`.
fn inner_window(len: usize) -> usize {
    len.div_ceil(2).max(3)
}

/// Estimates the main frequency of `v` by least-squares ESPRIT on its two
/// leading left singular vectors.
///
/// A sequence whose inner trajectory matrix has rank below 2 is treated as a
/// zero-frequency component. When the shift matrix has two real eigenvalues,
/// the dominant one decides: positive maps to 0, negative to 0.5.
pub fn esprit_main_frequency(v: &[f64]) -> Result<FrequencyEstimate> {
    let len = v.len();
    if len < 4 {
        return Err(Error::Parameter(format!(
            "ESPRIT needs at least 4 samples, got {len}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Data(
            "ESPRIT input contains non-finite values".into(),
        ));
    }
    let window = inner_window(len);
    let (values, vectors) = sorted_eigen(lag_covariance(v, window))?;
    if values[0].is_nan() || values[0] <= 0.0 || values[1] <= RANK_CUTOFF * values[0] {
        return Ok(FrequencyEstimate::new(0.0));
    }

    let signal = vectors.columns(0, 2);
    let under: DMatrix<f64> = signal.rows(0, window - 1).into_owned();
    let over: DMatrix<f64> = signal.rows(1, window - 1).into_owned();
    let shift = under
        .svd(true, true)
        .solve(&over, 1e-14)
        .map_err(|e| Error::Computation(format!("ESPRIT least squares failed: {e}")))?;
    let shift = Matrix2::new(shift[(0, 0)], shift[(0, 1)], shift[(1, 0)], shift[(1, 1)]);

    Ok(FrequencyEstimate::new(dominant_frequency(&shift)))
}

/// Frequency carried by the eigenvalues of a real 2 x 2 shift matrix.
fn dominant_frequency(m: &Matrix2<f64>) -> f64 {
    let half_trace = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    let disc = half_trace * half_trace - det;
    if disc < 0.0 {
        (-disc).sqrt().atan2(half_trace).abs() / (2.0 * PI)
    } else {
        let root = disc.sqrt();
        let (a, b) = (half_trace + root, half_trace - root);
        let dominant = if a.abs() >= b.abs() { a } else { b };
        if dominant >= 0.0 {
            0.0
        } else {
            0.5
        }
    }
}
