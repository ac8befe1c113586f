//! Monte Carlo SSA detection: surrogate projection distributions, single
//! prediction intervals, and the max-statistic multiple test that controls
//! the family-wise error rate across all tested frequencies.
//!
//! For each surrogate red-noise path `i` and projection vector `k` the squared
//! projection norm `p[k][i]` is recorded. Rows are standardized with their
//! mean and sample standard deviation, and the per-surrogate maximum
//! `eta_i = max_k (p[k][i] - mu_k) / sigma_k` yields a single threshold `q`.
//! The observed series is significant when its own maximum standardized
//! projection exceeds `q`; the corrected per-vector intervals are then
//! `[0, mu_k + q sigma_k]`, so the decision and the intervals always agree.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, select_in_range, BasisKind, FrequencyRange};
use crate::error::{Error, Result};
use crate::quantile::{quantile, quantile_sorted};
use crate::rng::SeedStream;
use crate::series::{estimate_ar1, fill_ar1, Ar1Model, TimeSeries};
use crate::ssa::{embed, lag_covariance, quadratic_forms, squared_projection_norms};

/// Where the red-noise parameters of the null hypothesis come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NullModel {
    Given(Ar1Model),
    Estimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestConfig {
    pub window: usize,
    pub surrogates: usize,
    /// Confidence level; the significance level is `1 - confidence`.
    pub confidence: f64,
    pub two_tailed: bool,
    pub range: FrequencyRange,
    pub basis: BasisKind,
    pub null_model: NullModel,
}

impl TestConfig {
    /// One-tailed eigenvector test over the full range with an estimated null.
    pub fn new(window: usize, surrogates: usize, confidence: f64) -> Self {
        Self {
            window,
            surrogates,
            confidence,
            two_tailed: false,
            range: FrequencyRange::FULL,
            basis: BasisKind::Eigen,
            null_model: NullModel::Estimate,
        }
    }

    pub fn with_basis(mut self, basis: BasisKind) -> Self {
        self.basis = basis;
        self
    }

    pub fn with_range(mut self, range: FrequencyRange) -> Self {
        self.range = range;
        self
    }

    pub fn with_null_model(mut self, null_model: NullModel) -> Self {
        self.null_model = null_model;
        self
    }

    pub fn with_two_tailed(mut self, two_tailed: bool) -> Self {
        self.two_tailed = two_tailed;
        self
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.confidence = confidence;
        self
    }

    pub fn alpha(&self) -> f64 {
        1.0 - self.confidence
    }

    pub fn validate(&self) -> Result<()> {
        if self.surrogates < 2 {
            return Err(Error::Parameter(format!(
                "surrogate count must be at least 2, got {}",
                self.surrogates
            )));
        }
        check_confidence(self.confidence)?;
        if self.window < 2 {
            return Err(Error::Parameter(format!(
                "window length must be at least 2, got {}",
                self.window
            )));
        }
        if let NullModel::Given(m) = &self.null_model {
            m.validate()?;
        }
        Ok(())
    }
}

fn check_confidence(confidence: f64) -> Result<()> {
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::Parameter(format!(
            "confidence level must lie in (0, 1), got {confidence}"
        )));
    }
    Ok(())
}

/// Squared projection norms of `G` surrogate paths onto `H` vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSample {
    /// H x G; entry `(k, i)` belongs to vector `k` and surrogate `i`.
    pub p: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl SurrogateSample {
    pub fn from_projections(p: DMatrix<f64>) -> Result<Self> {
        let g = p.ncols();
        if g < 2 {
            return Err(Error::Parameter(format!(
                "surrogate count must be at least 2, got {g}"
            )));
        }
        let mu: Vec<f64> = p.row_iter().map(|r| r.sum() / g as f64).collect();
        let sigma = p
            .row_iter()
            .zip(&mu)
            .map(|(r, m)| (r.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (g - 1) as f64).sqrt())
            .collect();
        Ok(Self { p, mu, sigma })
    }

    pub fn vectors(&self) -> usize {
        self.p.nrows()
    }

    pub fn surrogates(&self) -> usize {
        self.p.ncols()
    }

    pub fn row(&self, k: usize) -> Vec<f64> {
        self.p.row(k).iter().copied().collect()
    }
}

/// Projects `surrogates` independent red-noise paths onto the columns of
/// `vectors`. Surrogate `i` draws from `seed.child(i)`, so the result does not
/// depend on the number of worker threads.
pub fn surrogate_projections(
    model: &Ar1Model,
    vectors: &DMatrix<f64>,
    surrogates: usize,
    seed: SeedStream,
) -> Result<SurrogateSample> {
    model.validate()?;
    let window = vectors.nrows();
    if window <= 1 || window >= model.n {
        return Err(Error::Parameter(format!(
            "window length must satisfy 1 < L < N = {}, got {window}",
            model.n
        )));
    }
    if surrogates < 2 {
        return Err(Error::Parameter(format!(
            "surrogate count must be at least 2, got {surrogates}"
        )));
    }
    let columns: Vec<Vec<f64>> = (0..surrogates)
        .into_par_iter()
        .map_init(
            || vec![0.0; model.n],
            |path, i| {
                fill_ar1(model, &mut seed.child(i as u64).rng(), path);
                quadratic_forms(&lag_covariance(path, window), vectors)
            },
        )
        .collect();
    let h = vectors.ncols();
    let p = DMatrix::from_fn(h, surrogates, |k, i| columns[i][k]);
    SurrogateSample::from_projections(p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}

/// Prediction interval for a single projection from its surrogate row:
/// `[0, q_conf]` one-tailed, `[q_{(1-conf)/2}, q_{(1+conf)/2}]` two-tailed.
pub fn single_interval(row: &[f64], confidence: f64, two_tailed: bool) -> Result<Interval> {
    if row.len() < 2 {
        return Err(Error::Parameter(format!(
            "surrogate count must be at least 2, got {}",
            row.len()
        )));
    }
    check_confidence(confidence)?;
    let mut sorted = row.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(if two_tailed {
        Interval {
            lower: quantile_sorted(&sorted, (1.0 - confidence) / 2.0),
            upper: quantile_sorted(&sorted, (1.0 + confidence) / 2.0),
        }
    } else {
        Interval {
            lower: 0.0,
            upper: quantile_sorted(&sorted, confidence),
        }
    })
}

/// Outcome of a multiple test over the tested vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Decision {
    pub reject: bool,
    /// Position (within the tested vectors) of the largest standardized projection.
    pub most_significant: usize,
    /// Threshold for the maximum standardized statistic; `None` for Bonferroni.
    pub q_upper: Option<f64>,
    /// Threshold for the minimum standardized statistic (two-tailed only).
    pub q_lower: Option<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// `(p_hat_k - mu_k) / sigma_k`.
    pub standardized: Vec<f64>,
    pub significant: Vec<bool>,
}

impl Decision {
    pub fn max_statistic(&self) -> f64 {
        self.standardized[self.most_significant]
    }
}

fn standardize(observed: &[f64], sample: &SurrogateSample) -> Result<Vec<f64>> {
    if observed.len() != sample.vectors() {
        return Err(Error::Parameter(format!(
            "{} observed projections but {} surrogate rows",
            observed.len(),
            sample.vectors()
        )));
    }
    if observed.is_empty() {
        return Err(Error::Parameter("no projection vectors to test".into()));
    }
    if let Some(index) = sample.sigma.iter().position(|&s| s.is_nan() || s <= 0.0) {
        return Err(Error::DegenerateSurrogate { index });
    }
    Ok(observed
        .iter()
        .zip(sample.mu.iter().zip(&sample.sigma))
        .map(|(p, (m, s))| (p - m) / s)
        .collect())
}

fn argmax(xs: &[f64]) -> usize {
    // first maximum wins on ties
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Max-statistic multiple test ("prediction half-cube interval").
pub fn multiple_test(
    observed: &[f64],
    sample: &SurrogateSample,
    confidence: f64,
    two_tailed: bool,
) -> Result<Decision> {
    check_confidence(confidence)?;
    let z = standardize(observed, sample)?;
    let h = z.len();
    let g = sample.surrogates();

    let mut eta_max = Vec::with_capacity(g);
    let mut eta_min = Vec::with_capacity(g);
    for col in sample.p.column_iter() {
        let (mut hi, mut lo) = (f64::NEG_INFINITY, f64::INFINITY);
        for k in 0..h {
            let v = (col[k] - sample.mu[k]) / sample.sigma[k];
            hi = hi.max(v);
            lo = lo.min(v);
        }
        eta_max.push(hi);
        eta_min.push(lo);
    }

    let (q_upper, q_lower) = if two_tailed {
        (
            quantile(&eta_max, (1.0 + confidence) / 2.0),
            Some(quantile(&eta_min, (1.0 - confidence) / 2.0)),
        )
    } else {
        (quantile(&eta_max, confidence), None)
    };

    let significant: Vec<bool> = z
        .iter()
        .map(|&v| v > q_upper || q_lower.is_some_and(|ql| v < ql))
        .collect();
    let reject = significant.iter().any(|&s| s);
    let upper = (0..h)
        .map(|k| sample.mu[k] + q_upper * sample.sigma[k])
        .collect();
    let lower = match q_lower {
        Some(ql) => (0..h)
            .map(|k| sample.mu[k] + ql * sample.sigma[k])
            .collect(),
        None => vec![0.0; h],
    };

    Ok(Decision {
        reject,
        most_significant: argmax(&z),
        q_upper: Some(q_upper),
        q_lower,
        lower,
        upper,
        standardized: z,
        significant,
    })
}

/// Single tests per vector at significance `(1 - confidence) / H`.
pub fn bonferroni_test(
    observed: &[f64],
    sample: &SurrogateSample,
    confidence: f64,
    two_tailed: bool,
) -> Result<Decision> {
    check_confidence(confidence)?;
    let z = standardize(observed, sample)?;
    let h = z.len();
    let g = sample.surrogates();
    let alpha = 1.0 - confidence;
    let need = (h as f64 / alpha - 1e-9).ceil() as usize;
    if g < need {
        return Err(Error::SampleSize { have: g, need });
    }
    let per_test = 1.0 - alpha / h as f64;

    let mut lower = Vec::with_capacity(h);
    let mut upper = Vec::with_capacity(h);
    let mut significant = Vec::with_capacity(h);
    for (k, &p_hat) in observed.iter().enumerate() {
        let iv = single_interval(&sample.row(k), per_test, two_tailed)?;
        significant.push(p_hat > iv.upper || (two_tailed && p_hat < iv.lower));
        lower.push(iv.lower);
        upper.push(iv.upper);
    }
    Ok(Decision {
        reject: significant.iter().any(|&s| s),
        most_significant: argmax(&z),
        q_upper: None,
        q_lower: None,
        lower,
        upper,
        standardized: z,
        significant,
    })
}

/// Full result of [`run_mcssa`].
#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub reject: bool,
    /// Frequency of the most significant vector, present iff `reject`.
    pub freq_max: Option<f64>,
    pub q_upper: Option<f64>,
    pub q_lower: Option<f64>,
    /// Frequencies of every basis vector.
    pub frequencies: Vec<f64>,
    /// Observed squared projection norms for every basis vector.
    pub observed: Vec<f64>,
    /// Basis indices inside the frequency range; the vectors below are aligned with it.
    pub included: Vec<usize>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub standardized: Vec<f64>,
    pub significant: Vec<bool>,
    /// Null model the surrogates were drawn from.
    pub null_model: Ar1Model,
    pub basis: BasisKind,
}

impl TestResult {
    pub fn max_statistic(&self) -> f64 {
        self.standardized
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Everything a test decision needs except the confidence level: the basis,
/// observed projections and one shared surrogate sample.
#[derive(Debug, Clone)]
pub struct PreparedTest {
    frequencies: Vec<f64>,
    observed: Vec<f64>,
    included: Vec<usize>,
    tested: Vec<f64>,
    sample: SurrogateSample,
    null_model: Ar1Model,
    basis: BasisKind,
}

impl PreparedTest {
    pub fn sample(&self) -> &SurrogateSample {
        &self.sample
    }

    pub fn null_model(&self) -> &Ar1Model {
        &self.null_model
    }

    /// Applies the multiple test at `confidence` to the prepared sample.
    pub fn decide(&self, confidence: f64, two_tailed: bool) -> Result<TestResult> {
        let decision = multiple_test(&self.tested, &self.sample, confidence, two_tailed)?;
        let freq_max = decision
            .reject
            .then(|| self.frequencies[self.included[decision.most_significant]]);
        Ok(TestResult {
            reject: decision.reject,
            freq_max,
            q_upper: decision.q_upper,
            q_lower: decision.q_lower,
            frequencies: self.frequencies.clone(),
            observed: self.observed.clone(),
            included: self.included.clone(),
            lower: decision.lower,
            upper: decision.upper,
            standardized: decision.standardized,
            significant: decision.significant,
            null_model: self.null_model,
            basis: self.basis,
        })
    }
}

/// Resolves the null model, builds the basis, selects the frequency range and
/// draws the surrogate sample. Surrogate `i` uses `seed.child(i)`.
pub fn prepare_mcssa(
    series: &TimeSeries,
    config: &TestConfig,
    seed: SeedStream,
) -> Result<PreparedTest> {
    config.validate()?;
    let null_model = match config.null_model {
        NullModel::Given(m) => m.with_len(series.len()),
        NullModel::Estimate => estimate_ar1(series)?,
    };
    let basis = build_basis(config.basis, series, config.window)?;
    let included = select_in_range(&basis, &config.range)?;
    let observed = squared_projection_norms(&embed(series, config.window)?, basis.vectors())?;
    let sample = surrogate_projections(
        &null_model,
        &basis.subset(&included),
        config.surrogates,
        seed,
    )?;
    let tested = included.iter().map(|&k| observed[k]).collect();
    Ok(PreparedTest {
        frequencies: basis.frequencies().to_vec(),
        observed,
        included,
        tested,
        sample,
        null_model,
        basis: config.basis,
    })
}

/// Runs the complete multiple Monte Carlo SSA test on `series`.
pub fn run_mcssa(series: &TimeSeries, config: &TestConfig, seed: SeedStream) -> Result<TestResult> {
    prepare_mcssa(series, config, seed)?.decide(config.confidence, config.two_tailed)
}
