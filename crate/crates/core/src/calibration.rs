//! Outer Monte Carlo estimation of type-I error and power, exact binomial
//! confidence intervals, nominal-level adjustment and ROC sweeps.
//!
//! Replicate `r` of a run seeded with `master` generates its series from
//! `master.child(r).child(DATA_STREAM)` and its surrogates from
//! `master.child(r).child(TEST_STREAM)`. Series therefore do not depend on the
//! test configuration: two scenarios run with the same master seed see the
//! same data, and a sweep over nominal levels sees the same surrogates too.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;

use crate::detection::{prepare_mcssa, PreparedTest, TestConfig};
use crate::error::{Error, Result};
use crate::rng::SeedStream;
use crate::series::{synthesize, Ar1Model, SignalSpec, TimeSeries};

const DATA_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;

/// Generating model plus test configuration, replicated `replicates` times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub model: Ar1Model,
    pub signal: SignalSpec,
    pub config: TestConfig,
    pub replicates: usize,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.signal.validate()?;
        self.config.validate()?;
        if self.replicates == 0 {
            return Err(Error::Parameter(
                "replicate count must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn with_confidence(mut self, confidence: f64) -> Self {
        self.config.confidence = confidence;
        self
    }

    pub fn with_replicates(mut self, replicates: usize) -> Self {
        self.replicates = replicates;
        self
    }

    /// Series of replicate `r`.
    pub fn series(&self, master: SeedStream, r: usize) -> Result<TimeSeries> {
        let mut rng = master.child(r as u64).child(DATA_STREAM).rng();
        synthesize(&self.signal, self.model.n, &self.model, &mut rng)
    }

    fn prepare(&self, master: SeedStream, r: usize) -> Result<PreparedTest> {
        let series = self.series(master, r)?;
        prepare_mcssa(
            &series,
            &self.config,
            master.child(r as u64).child(TEST_STREAM),
        )
    }
}

/// Rejection count with its exact 95% binomial interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub rejections: usize,
    pub replicates: usize,
    pub proportion: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl ErrorEstimate {
    pub fn from_counts(rejections: usize, replicates: usize) -> Self {
        let (ci_low, ci_high) = clopper_pearson(rejections, replicates, 0.95);
        Self {
            rejections,
            replicates,
            proportion: rejections as f64 / replicates as f64,
            ci_low,
            ci_high,
        }
    }

    pub fn ci_contains(&self, x: f64) -> bool {
        self.ci_low <= x && x <= self.ci_high
    }

    pub fn ci_overlaps(&self, low: f64, high: f64) -> bool {
        self.ci_low <= high && low <= self.ci_high
    }
}

/// Quantile of the Beta(a, b) distribution by bisection on the regularized
/// incomplete beta function.
fn beta_quantile(p: f64, a: f64, b: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if beta_reg(a, b, mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Exact (Clopper-Pearson) confidence interval for `k` successes in `m` trials.
pub fn clopper_pearson(k: usize, m: usize, level: f64) -> (f64, f64) {
    assert!(m > 0 && k <= m, "need 0 <= k <= m and m > 0");
    assert!(level > 0.0 && level < 1.0, "level must lie in (0, 1)");
    let tail = (1.0 - level) / 2.0;
    let (k, mf) = (k as f64, m as f64);
    let low = if k == 0.0 {
        0.0
    } else {
        beta_quantile(tail, k, mf - k + 1.0)
    };
    let high = if k == mf {
        1.0
    } else {
        beta_quantile(1.0 - tail, k + 1.0, mf - k)
    };
    (low, high)
}

/// Outcome of one end-to-end replicate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicateOutcome {
    pub reject: bool,
    pub freq_max: Option<f64>,
}

/// Runs every replicate of `scenario`. The first replicate error aborts the run.
pub fn replicate_outcomes(
    scenario: &Scenario,
    master: SeedStream,
) -> Result<Vec<ReplicateOutcome>> {
    scenario.validate()?;
    (0..scenario.replicates)
        .into_par_iter()
        .map(|r| {
            let res = scenario
                .prepare(master, r)?
                .decide(scenario.config.confidence, scenario.config.two_tailed)?;
            Ok(ReplicateOutcome {
                reject: res.reject,
                freq_max: res.freq_max,
            })
        })
        .collect()
}

/// Proportion of replicates in which the null hypothesis is rejected: the
/// type-I error for a null signal, the power otherwise.
pub fn estimate_rejection_rate(scenario: &Scenario, master: SeedStream) -> Result<ErrorEstimate> {
    let outcomes = replicate_outcomes(scenario, master)?;
    let rejections = outcomes.iter().filter(|o| o.reject).count();
    Ok(ErrorEstimate::from_counts(rejections, scenario.replicates))
}

/// Rejection-rate estimates at several nominal significance levels, all from
/// the same replicates and surrogate samples.
pub fn rejection_rates_at(
    scenario: &Scenario,
    alphas: &[f64],
    master: SeedStream,
) -> Result<Vec<ErrorEstimate>> {
    scenario.validate()?;
    for &a in alphas {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::Parameter(format!(
                "nominal level {a} outside (0, 1)"
            )));
        }
    }
    let per_replicate: Vec<Vec<bool>> = (0..scenario.replicates)
        .into_par_iter()
        .map(|r| {
            let prepared = scenario.prepare(master, r)?;
            alphas
                .iter()
                .map(|&a| Ok(prepared.decide(1.0 - a, scenario.config.two_tailed)?.reject))
                .collect::<Result<Vec<bool>>>()
        })
        .collect::<Result<_>>()?;
    Ok((0..alphas.len())
        .map(|j| {
            let count = per_replicate.iter().filter(|row| row[j]).count();
            ErrorEstimate::from_counts(count, scenario.replicates)
        })
        .collect())
}

/// Bracket and iteration budget for [`adjust_alpha`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaSearch {
    pub lo: f64,
    pub hi: f64,
    pub max_iter: usize,
}

impl Default for AlphaSearch {
    fn default() -> Self {
        Self {
            lo: 0.01,
            hi: 0.6,
            max_iter: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaStep {
    pub nominal: f64,
    pub estimate: ErrorEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaAdjustment {
    pub target: f64,
    pub adjusted: f64,
    /// Whether the final candidate's 95% interval contains the target.
    pub converged: bool,
    pub trace: Vec<AlphaStep>,
}

/// Finds a nominal level whose estimated type-I error matches `target`.
///
/// The target level itself is tried first. Otherwise the bracket endpoints
/// must straddle the target (by point estimate) and the bracket is bisected
/// until a candidate's 95% interval contains the target. Every candidate is
/// evaluated with the same master seed, so the estimated type-I error is
/// monotone in the nominal level.
pub fn adjust_alpha(
    scenario: &Scenario,
    target: f64,
    search: AlphaSearch,
    master: SeedStream,
) -> Result<AlphaAdjustment> {
    if !scenario.signal.is_null() {
        return Err(Error::Parameter(
            "alpha adjustment requires a null scenario (zero amplitude)".into(),
        ));
    }
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::Parameter(format!(
            "target level {target} outside (0, 1)"
        )));
    }
    if !(0.0 < search.lo && search.lo < search.hi && search.hi < 1.0) {
        return Err(Error::Parameter(format!(
            "search bracket must satisfy 0 < lo < hi < 1, got [{}, {}]",
            search.lo, search.hi
        )));
    }

    let mut trace = Vec::new();
    let eval = |nominal: f64, trace: &mut Vec<AlphaStep>| -> Result<ErrorEstimate> {
        let estimate = estimate_rejection_rate(&scenario.with_confidence(1.0 - nominal), master)?;
        trace.push(AlphaStep { nominal, estimate });
        Ok(estimate)
    };
    let done = |nominal: f64, trace: Vec<AlphaStep>, converged: bool| AlphaAdjustment {
        target,
        adjusted: nominal,
        converged,
        trace,
    };
    let failure = |reason: String, trace: &[AlphaStep]| Error::SearchFailure {
        reason,
        trace: trace
            .iter()
            .map(|s| (s.nominal, s.estimate.proportion))
            .collect(),
    };

    if (search.lo..=search.hi).contains(&target) && eval(target, &mut trace)?.ci_contains(target) {
        return Ok(done(target, trace, true));
    }

    let (mut lo, mut hi) = (search.lo, search.hi);
    let at_lo = eval(lo, &mut trace)?;
    if at_lo.proportion > target {
        return Err(failure(
            format!(
                "type-I error {} at nominal {lo} already exceeds target {target}",
                at_lo.proportion
            ),
            &trace,
        ));
    }
    let at_hi = eval(hi, &mut trace)?;
    if at_hi.proportion < target {
        return Err(failure(
            format!(
                "type-I error {} at nominal {hi} stays below target {target}",
                at_hi.proportion
            ),
            &trace,
        ));
    }

    for _ in 0..search.max_iter {
        let mid = 0.5 * (lo + hi);
        let est = eval(mid, &mut trace)?;
        if est.ci_contains(target) {
            return Ok(done(mid, trace, true));
        }
        if est.proportion < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = trace
        .iter()
        .min_by(|a, b| {
            (a.estimate.proportion - target)
                .abs()
                .total_cmp(&(b.estimate.proportion - target).abs())
        })
        .map(|s| s.nominal)
        .unwrap_or(target);
    Ok(done(best, trace, false))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub nominal: f64,
    pub fpr: ErrorEstimate,
    pub tpr: ErrorEstimate,
}

/// False- and true-positive rates at each nominal level.
pub fn roc_sweep(
    null: &Scenario,
    alternative: &Scenario,
    levels: &[f64],
    master: SeedStream,
) -> Result<Vec<RocPoint>> {
    let fpr = rejection_rates_at(null, levels, master)?;
    let tpr = rejection_rates_at(alternative, levels, master)?;
    Ok(levels
        .iter()
        .zip(fpr.into_iter().zip(tpr))
        .map(|(&nominal, (fpr, tpr))| RocPoint { nominal, fpr, tpr })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::BasisKind;
    use crate::detection::NullModel;

    #[test]
    fn clopper_pearson_reference_values() {
        let (lo, hi) = clopper_pearson(23, 100, 0.95);
        assert!((lo - 0.1517316).abs() < 5e-7, "{lo}");
        assert!((hi - 0.3248587).abs() < 5e-7, "{hi}");
    }

    #[test]
    fn clopper_pearson_boundaries() {
        let (lo, hi) = clopper_pearson(0, 10, 0.95);
        assert_eq!(lo, 0.0);
        let oracle = 1.0 - 0.025f64.powf(0.1);
        assert!((hi - oracle).abs() < 1e-12, "{hi} {oracle}");
        let (lo, hi) = clopper_pearson(10, 10, 0.95);
        assert_eq!(hi, 1.0);
        assert!((lo - 0.025f64.powf(0.1)).abs() < 1e-12);
    }

    #[test]
    fn error_estimate_brackets_proportion() {
        for m in [1, 7, 100, 1000] {
            for k in [0, m / 3, m / 2, m] {
                let e = ErrorEstimate::from_counts(k, m);
                assert!(0.0 <= e.ci_low && e.ci_low <= e.proportion);
                assert!(e.proportion <= e.ci_high && e.ci_high <= 1.0);
            }
        }
        let w100 = ErrorEstimate::from_counts(20, 100);
        let w400 = ErrorEstimate::from_counts(80, 400);
        let ratio = (w100.ci_high - w100.ci_low) / (w400.ci_high - w400.ci_low);
        assert!((ratio - 2.0).abs() < 0.2, "{ratio}");
    }

    fn small_scenario(amplitude: f64, replicates: usize) -> Scenario {
        let model = Ar1Model::new(0.7, 1.0, 200).unwrap();
        Scenario {
            model,
            signal: SignalSpec::new(amplitude, 5.5).unwrap(),
            config: TestConfig::new(10, 60, 0.8)
                .with_basis(BasisKind::Sine)
                .with_null_model(NullModel::Given(model)),
            replicates,
        }
    }

    #[test]
    fn single_replicate_run() {
        let e = estimate_rejection_rate(&small_scenario(0.0, 1), SeedStream::new(1)).unwrap();
        assert_eq!(e.replicates, 1);
        assert!(e.ci_low == 0.0 || e.ci_high == 1.0);
    }

    #[test]
    fn rates_are_monotone_and_match_individual_runs() {
        let sc = small_scenario(0.0, 40);
        let levels = [0.05, 0.1, 0.2, 0.3, 0.5];
        let master = SeedStream::new(3);
        let rates = rejection_rates_at(&sc, &levels, master).unwrap();
        assert!(rates.windows(2).all(|w| w[0].rejections <= w[1].rejections));
        let direct = estimate_rejection_rate(&sc.with_confidence(0.8), master).unwrap();
        assert_eq!(direct, rates[2]);
    }

    #[test]
    fn roc_at_extreme_level_is_near_one() {
        let null = small_scenario(0.0, 30);
        let alt = small_scenario(1.0, 30);
        let pts = roc_sweep(&null, &alt, &[0.2, 1.0 - 1.0 / 60.0], SeedStream::new(9)).unwrap();
        assert!(pts[1].fpr.proportion >= 0.9);
        assert!(pts[0].fpr.rejections <= pts[1].fpr.rejections);
        assert!(pts[0].tpr.rejections <= pts[1].tpr.rejections);
    }

    #[test]
    fn adjust_alpha_validates_inputs() {
        let alt = small_scenario(1.0, 5);
        assert!(adjust_alpha(&alt, 0.2, AlphaSearch::default(), SeedStream::new(1)).is_err());
        let null = small_scenario(0.0, 5);
        let bad = AlphaSearch {
            lo: 0.5,
            hi: 0.2,
            max_iter: 3,
        };
        assert!(adjust_alpha(&null, 0.2, bad, SeedStream::new(1)).is_err());
    }

    #[test]
    fn adjust_alpha_reports_unreachable_targets() {
        let null = small_scenario(0.0, 40);
        let search = AlphaSearch {
            lo: 0.01,
            hi: 0.02,
            max_iter: 4,
        };
        match adjust_alpha(&null, 0.6, search, SeedStream::new(2)) {
            Err(Error::SearchFailure { trace, .. }) => assert_eq!(trace.len(), 2),
            other => panic!("expected search failure, got {other:?}"),
        }
    }

    #[test]
    fn adjust_alpha_is_deterministic() {
        let null = small_scenario(0.0, 40);
        let search = AlphaSearch {
            lo: 0.02,
            hi: 0.7,
            max_iter: 6,
        };
        let a = adjust_alpha(&null, 0.35, search, SeedStream::new(4)).unwrap();
        let b = adjust_alpha(&null, 0.35, search, SeedStream::new(4)).unwrap();
        assert_eq!(a, b);
        assert!(a.adjusted > 0.0 && a.adjusted < 1.0);
        assert!(!a.trace.is_empty());
    }

    #[test]
    fn replicate_errors_abort() {
        let mut sc = small_scenario(0.0, 5);
        sc.config.range = crate::basis::FrequencyRange::new(0.49, 0.499).unwrap();
        assert!(matches!(
            estimate_rejection_rate(&sc, SeedStream::new(1)),
            Err(Error::EmptyRange { .. })
        ));
    }
}
