//! Projection vectors with attached frequencies.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::esprit::esprit_main_frequency;
use crate::series::TimeSeries;
use crate::ssa::{embed, sorted_eigen};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    /// Eigenvectors of the observed series' lag-covariance matrix.
    #[serde(rename = "ev")]
    Eigen,
    /// Equidistant sine waves.
    #[serde(rename = "sin")]
    Sine,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Eigen => "ev",
            BasisKind::Sine => "sin",
        })
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ev" | "eigen" => Ok(BasisKind::Eigen),
            "sin" | "sine" => Ok(BasisKind::Sine),
            other => Err(Error::Parameter(format!("unknown basis kind '{other}'"))),
        }
    }
}

/// Closed frequency interval `[low, high]` inside `[0, 0.5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyRange {
    low: f64,
    high: f64,
}

impl FrequencyRange {
    pub const FULL: FrequencyRange = FrequencyRange {
        low: 0.0,
        high: 0.5,
    };

    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low.is_finite() && high.is_finite() && 0.0 <= low && low < high && high <= 0.5) {
            return Err(Error::Parameter(format!(
                "frequency range must satisfy 0 <= low < high <= 0.5, got [{low}, {high}]"
            )));
        }
        Ok(Self { low, high })
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn high(&self) -> f64 {
        self.high
    }

    pub fn contains(&self, freq: f64) -> bool {
        self.low <= freq && freq <= self.high
    }
}

impl Default for FrequencyRange {
    fn default() -> Self {
        Self::FULL
    }
}

impl fmt::Display for FrequencyRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.low, self.high)
    }
}

impl FromStr for FrequencyRange {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(',')
            .ok_or_else(|| Error::Parameter(format!("expected 'low,high', got '{s}'")))?;
        let parse = |t: &str| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parameter(format!("invalid frequency '{t}'")))
        };
        Self::new(parse(lo)?, parse(hi)?)
    }
}

/// Unit projection vectors `W_1..W_H` (columns) and their frequencies.
#[derive(Debug, Clone)]
pub struct ProjectionBasis {
    vectors: DMatrix<f64>,
    frequencies: Vec<f64>,
    kind: BasisKind,
}

impl ProjectionBasis {
    pub fn vectors(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn window(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    /// Columns listed in `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> DMatrix<f64> {
        self.vectors.select_columns(indices)
    }
}

/// Sine vectors at frequencies `k / (2L + 1)`, `k = 1..=L`, each scaled to
/// unit length.
pub fn sine_basis(window: usize) -> Result<ProjectionBasis> {
    if window < 2 {
        return Err(Error::Parameter(format!(
            "window length must be at least 2, got {window}"
        )));
    }
    let denom = (2 * window + 1) as f64;
    let frequencies: Vec<f64> = (1..=window).map(|k| k as f64 / denom).collect();
    let mut vectors = DMatrix::from_fn(window, window, |i, k| {
        (2.0 * PI * frequencies[k] * (i + 1) as f64).sin()
    });
    for mut col in vectors.column_iter_mut() {
        col.normalize_mut();
    }
    Ok(ProjectionBasis {
        vectors,
        frequencies,
        kind: BasisKind::Sine,
    })
}

/// The leading `min(L, K)` eigenvectors of the series' lag-covariance matrix,
/// each labelled with its ESPRIT frequency.
pub fn eigen_basis(ts: &TimeSeries, window: usize) -> Result<ProjectionBasis> {
    let x = embed(ts, window)?;
    let h = window.min(x.k());
    let (_, all) = sorted_eigen(x.lag_covariance())?;
    let mut vectors = all.columns(0, h).into_owned();
    for mut col in vectors.column_iter_mut() {
        col.normalize_mut();
    }
    let frequencies = vectors
        .column_iter()
        .map(|col| {
            let v: Vec<f64> = col.iter().copied().collect();
            esprit_main_frequency(&v).map(|f| f.value())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ProjectionBasis {
        vectors,
        frequencies,
        kind: BasisKind::Eigen,
    })
}

pub fn build_basis(kind: BasisKind, ts: &TimeSeries, window: usize) -> Result<ProjectionBasis> {
    match kind {
        BasisKind::Eigen => eigen_basis(ts, window),
        BasisKind::Sine => {
            if window >= ts.len() {
                return Err(Error::Parameter(format!(
                    "window length must satisfy 1 < L < N = {}, got {window}",
                    ts.len()
                )));
            }
            sine_basis(window)
        }
    }
}

/// Indices of basis vectors whose frequency lies in `range` (both ends inclusive).
pub fn select_in_range(basis: &ProjectionBasis, range: &FrequencyRange) -> Result<Vec<usize>> {
    let idx: Vec<usize> = basis
        .frequencies
        .iter()
        .enumerate()
        .filter(|(_, &f)| range.contains(f))
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return Err(Error::EmptyRange {
            low: range.low,
            high: range.high,
        });
    }
    Ok(idx)
}
