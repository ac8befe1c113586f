//! Red-noise generation, signal synthesis and AR(1) fitting.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest coefficient returned by [`estimate_ar1`].
pub const MAX_VARPHI: f64 = 1.0 - 1e-6;

/// Shortest series [`estimate_ar1`] accepts.
pub const MIN_ESTIMATION_LEN: usize = 10;

/// Zero-mean AR(1) red noise: `xi[n] = varphi * xi[n-1] + delta * eps[n]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ar1Model {
    pub varphi: f64,
    pub delta: f64,
    pub n: usize,
}

impl Ar1Model {
    pub fn new(varphi: f64, delta: f64, n: usize) -> Result<Self> {
        let model = Self { varphi, delta, n };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.varphi.is_finite() && (0.0..1.0).contains(&self.varphi)) {
            return Err(Error::Parameter(format!(
                "AR coefficient must lie in [0, 1), got {}",
                self.varphi
            )));
        }
        if !(self.delta.is_finite() && self.delta > 0.0) {
            return Err(Error::Parameter(format!(
                "innovation standard deviation must be positive, got {}",
                self.delta
            )));
        }
        if self.n < 2 {
            return Err(Error::Parameter(format!(
                "series length must be at least 2, got {}",
                self.n
            )));
        }
        Ok(())
    }

    /// Variance of the stationary distribution, `delta^2 / (1 - varphi^2)`.
    pub fn stationary_variance(&self) -> f64 {
        self.delta * self.delta / (1.0 - self.varphi * self.varphi)
    }

    /// Spectral density `delta^2 / (1 - 2 varphi cos(2 pi f) + varphi^2)` at frequency `f`.
    pub fn spectral_density(&self, freq: f64) -> f64 {
        let phi = self.varphi;
        self.delta * self.delta / (1.0 - 2.0 * phi * (2.0 * PI * freq).cos() + phi * phi)
    }

    pub fn with_len(self, n: usize) -> Self {
        Self { n, ..self }
    }
}

/// Sinusoid `amplitude * sin(2 pi k / period + phase)`, sampled at k = 1..N.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub amplitude: f64,
    pub period: f64,
    #[serde(default)]
    pub phase: f64,
}

impl SignalSpec {
    pub fn new(amplitude: f64, period: f64) -> Result<Self> {
        let spec = Self {
            amplitude,
            period,
            phase: 0.0,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_phase(self, phase: f64) -> Self {
        Self { phase, ..self }
    }

    pub fn is_null(&self) -> bool {
        self.amplitude == 0.0
    }

    pub fn frequency(&self) -> f64 {
        1.0 / self.period
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude.is_finite() && self.amplitude >= 0.0) {
            return Err(Error::Parameter(format!(
                "amplitude must be finite and non-negative, got {}",
                self.amplitude
            )));
        }
        if !(self.period.is_finite() && self.period > 2.0) {
            return Err(Error::Parameter(format!(
                "period must exceed 2 samples, got {}",
                self.period
            )));
        }
        if !self.phase.is_finite() {
            return Err(Error::Parameter("phase must be finite".into()));
        }
        Ok(())
    }

    /// Signal value at 1-based time index `k`.
    pub fn value_at(&self, k: usize) -> f64 {
        self.amplitude * (2.0 * PI * k as f64 / self.period + self.phase).sin()
    }
}

/// A finite real-valued series of length at least 2.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::Data(format!(
                "series must have at least 2 values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite value at index {i}")));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Multiplies every value by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.values.iter().map(|v| v * c).collect())
    }
}

impl AsRef<[f64]> for TimeSeries {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

/// Fills `out` with a stationary AR(1) path. The first value is drawn from the
/// stationary distribution, so no burn-in is needed.
pub(crate) fn fill_ar1<R: Rng + ?Sized>(model: &Ar1Model, rng: &mut R, out: &mut [f64]) {
    let sd0 = model.stationary_variance().sqrt();
    let mut prev = sd0 * rng.sample::<f64, _>(StandardNormal);
    let mut iter = out.iter_mut();
    if let Some(first) = iter.next() {
        *first = prev;
    }
    for slot in iter {
        let eps: f64 = rng.sample(StandardNormal);
        prev = model.varphi * prev + model.delta * eps;
        *slot = prev;
    }
}

/// Draws a red-noise path of length `model.n`.
pub fn generate_ar1<R: Rng + ?Sized>(model: &Ar1Model, rng: &mut R) -> Result<TimeSeries> {
    model.validate()?;
    let mut values = vec![0.0; model.n];
    fill_ar1(model, rng, &mut values);
    Ok(TimeSeries { values })
}

/// Sinusoid plus red noise.
pub fn synthesize<R: Rng + ?Sized>(
    signal: &SignalSpec,
    n: usize,
    model: &Ar1Model,
    rng: &mut R,
) -> Result<TimeSeries> {
    signal.validate()?;
    if n != model.n {
        return Err(Error::Parameter(format!(
            "requested length {n} does not match model length {}",
            model.n
        )));
    }
    let mut series = generate_ar1(model, rng)?;
    if !signal.is_null() {
        for (k, v) in series.values.iter_mut().enumerate() {
            *v += signal.value_at(k + 1);
        }
    }
    Ok(series)
}

/// Sufficient statistics of the zero-mean AR(1) Gaussian likelihood.
struct Ar1Sums {
    n: f64,
    first_sq: f64,
    /// sum of x_t^2 for t = 2..N
    tail_sq: f64,
    /// sum of x_t^2 for t = 2..N-1
    inner_sq: f64,
    /// sum of x_t x_{t-1}
    cross: f64,
}

impl Ar1Sums {
    fn new(x: &[f64]) -> Self {
        let n = x.len();
        let tail_sq: f64 = x[1..].iter().map(|v| v * v).sum();
        let last = x[n - 1];
        let cross = x.windows(2).map(|w| w[0] * w[1]).sum();
        Self {
            n: n as f64,
            first_sq: x[0] * x[0],
            tail_sq,
            inner_sq: tail_sq - last * last,
            cross,
        }
    }

    /// Weighted residual sum of squares of the exact likelihood.
    fn ssq(&self, phi: f64) -> f64 {
        self.first_sq + self.tail_sq - 2.0 * phi * self.cross + phi * phi * self.inner_sq
    }

    /// Log-likelihood with the innovation variance profiled out (constants dropped).
    fn profile_loglik(&self, phi: f64) -> f64 {
        let s = self.ssq(phi).max(f64::MIN_POSITIVE);
        -0.5 * self.n * (s / self.n).ln() + 0.5 * (1.0 - phi * phi).ln()
    }
}

/// Golden-section maximization of a unimodal function on `[a, b]`.
fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Fits a zero-mean AR(1) model by exact Gaussian maximum likelihood.
///
/// The coefficient is set to zero when its approximate standard error
/// `sqrt((1 - varphi^2) / N)` exceeds its magnitude, and is then clamped into
/// `[0, MAX_VARPHI]`. The innovation deviation is the ML estimate at the
/// unconstrained optimum.
pub fn estimate_ar1(ts: &TimeSeries) -> Result<Ar1Model> {
    let x = ts.values();
    if x.len() < MIN_ESTIMATION_LEN {
        return Err(Error::Data(format!(
            "AR(1) estimation needs at least {MIN_ESTIMATION_LEN} values, got {}",
            x.len()
        )));
    }
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return Err(Error::Estimation("series is constant".into()));
    }

    let sums = Ar1Sums::new(x);
    let ll = |phi: f64| sums.profile_loglik(phi);

    const GRID: usize = 400;
    const EDGE: f64 = 1.0 - 1e-9;
    let step = 2.0 * EDGE / GRID as f64;
    let best = (0..=GRID)
        .map(|j| -EDGE + step * j as f64)
        .map(|phi| (phi, ll(phi)))
        .fold((0.0, f64::NEG_INFINITY), |acc, cur| {
            if cur.1 > acc.1 {
                cur
            } else {
                acc
            }
        });
    let phi_ml = golden_max(
        ll,
        (best.0 - step).max(-EDGE),
        (best.0 + step).min(EDGE),
        1e-12,
    );

    let sigma2 = sums.ssq(phi_ml) / sums.n;
    if !(sigma2.is_finite() && sigma2 > 0.0) {
        return Err(Error::Estimation(format!(
            "innovation variance estimate is not positive ({sigma2})"
        )));
    }

    let se = ((1.0 - phi_ml * phi_ml) / sums.n).sqrt();
    let mut varphi = if se > phi_ml.abs() { 0.0 } else { phi_ml };
    varphi = varphi.clamp(0.0, MAX_VARPHI);

    Ar1Model::new(varphi, sigma2.sqrt(), x.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;

    fn lag1_autocorr(x: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
        let cov: f64 = x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        cov / var
    }

    #[test]
    fn rejects_invalid_models() {
        assert!(Ar1Model::new(1.0, 1.0, 10).is_err());
        assert!(Ar1Model::new(-0.1, 1.0, 10).is_err());
        assert!(Ar1Model::new(0.5, 0.0, 10).is_err());
        assert!(Ar1Model::new(0.5, 1.0, 1).is_err());
        let bad = Ar1Model {
            varphi: 0.5,
            delta: -1.0,
            n: 10,
        };
        let mut rng = SeedStream::new(1).rng();
        assert!(matches!(
            generate_ar1(&bad, &mut rng),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn timeseries_validates() {
        assert!(TimeSeries::new(vec![1.0]).is_err());
        assert!(TimeSeries::new(vec![1.0, f64::NAN]).is_err());
        assert!(TimeSeries::new(vec![1.0, 2.0]).is_ok());
    }

    #[test]
    fn generation_is_reproducible() {
        let model = Ar1Model::new(0.7, 1.0, 500).unwrap();
        let a = generate_ar1(&model, &mut SeedStream::new(9).rng()).unwrap();
        let b = generate_ar1(&model, &mut SeedStream::new(9).rng()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn stationary_variance_of_long_path() {
        let model = Ar1Model::new(0.7, 1.0, 1000).unwrap();
        let root = SeedStream::new(3);
        // Average the sample variance over independent paths.
        let reps = 200;
        let mean_var: f64 = (0..reps)
            .map(|r| {
                let x = generate_ar1(&model, &mut root.child(r).rng()).unwrap();
                x.values().iter().map(|v| v * v).sum::<f64>() / 1000.0
            })
            .sum::<f64>()
            / reps as f64;
        let target = 1.0 / 0.51;
        // Var of a sample variance of an AR(1) path ~ 2 sigma^4 (1+phi^2)/(1-phi^2) / N.
        let se = (2.0 * target * target * (1.49 / 0.51) / 1000.0 / reps as f64).sqrt();
        assert!(
            (mean_var - target).abs() < 3.0 * se,
            "{mean_var} vs {target}"
        );
    }

    #[test]
    fn first_value_has_stationary_variance() {
        let model = Ar1Model::new(0.7, 1.0, 2).unwrap();
        let root = SeedStream::new(11);
        let m = 10_000;
        let firsts: Vec<f64> = (0..m)
            .map(|r| {
                generate_ar1(&model, &mut root.child(r).rng())
                    .unwrap()
                    .values()[0]
            })
            .collect();
        let var = firsts.iter().map(|v| v * v).sum::<f64>() / m as f64;
        let target = model.stationary_variance();
        let se = target * (2.0 / m as f64).sqrt();
        assert!((var - target).abs() < 3.0 * se, "{var} vs {target}");
    }

    #[test]
    fn white_noise_has_no_lag1_correlation() {
        let model = Ar1Model::new(0.0, 1.0, 1000).unwrap();
        let x = generate_ar1(&model, &mut SeedStream::new(4).rng()).unwrap();
        assert!(lag1_autocorr(x.values()).abs() < 3.0 / (1000f64).sqrt());
    }

    #[test]
    fn long_path_lag1_correlation() {
        let model = Ar1Model::new(0.7, 1.0, 100_000).unwrap();
        let x = generate_ar1(&model, &mut SeedStream::new(5).rng()).unwrap();
        assert!((lag1_autocorr(x.values()) - 0.7).abs() < 0.01);
    }

    #[test]
    fn synthesize_checks_length_and_adds_signal() {
        let model = Ar1Model::new(0.7, 1.0, 100).unwrap();
        let sig = SignalSpec::new(0.5, 5.5).unwrap();
        assert!(matches!(
            synthesize(&sig, 99, &model, &mut SeedStream::new(1).rng()),
            Err(Error::Parameter(_))
        ));
        let noise = generate_ar1(&model, &mut SeedStream::new(1).rng()).unwrap();
        let with = synthesize(&sig, 100, &model, &mut SeedStream::new(1).rng()).unwrap();
        for (k, (a, b)) in with.values().iter().zip(noise.values()).enumerate() {
            let expected = 0.5 * (2.0 * PI * (k + 1) as f64 / 5.5).sin();
            assert!((a - b - expected).abs() < 1e-12);
        }
        let null = SignalSpec::new(0.0, 5.5).unwrap();
        let same = synthesize(&null, 100, &model, &mut SeedStream::new(1).rng()).unwrap();
        assert_eq!(same, noise);
    }

    #[test]
    fn strong_sinusoid_dominates_periodogram() {
        let model = Ar1Model::new(0.7, 1.0, 1000).unwrap();
        let sig = SignalSpec::new(1000.0, 5.5).unwrap();
        let x = synthesize(&sig, 1000, &model, &mut SeedStream::new(2).rng()).unwrap();
        // Periodogram oracle over the Fourier frequencies j/N.
        let n = x.len();
        let best = (1..n / 2)
            .map(|j| {
                let f = j as f64 / n as f64;
                let (mut re, mut im) = (0.0, 0.0);
                for (t, v) in x.values().iter().enumerate() {
                    re += v * (2.0 * PI * f * t as f64).cos();
                    im += v * (2.0 * PI * f * t as f64).sin();
                }
                (f, re * re + im * im)
            })
            .fold((0.0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        assert!(
            (best.0 - 1.0 / 5.5).abs() <= 0.5 / n as f64 + 1e-12,
            "{}",
            best.0
        );
    }

    #[test]
    fn estimation_is_consistent_on_long_path() {
        let model = Ar1Model::new(0.7, 1.0, 100_000).unwrap();
        let x = generate_ar1(&model, &mut SeedStream::new(6).rng()).unwrap();
        let fit = estimate_ar1(&x).unwrap();
        let se = ((1.0 - 0.49) / 1e5f64).sqrt();
        assert!((fit.varphi - 0.7).abs() < 3.0 * se, "{}", fit.varphi);
        assert!((fit.delta - 1.0).abs() < 0.01);
    }

    #[test]
    fn estimation_clamps_white_noise() {
        let model = Ar1Model::new(0.0, 1.0, 1000).unwrap();
        let root = SeedStream::new(8);
        let zeros = (0..100)
            .filter(|&r| {
                let x = generate_ar1(&model, &mut root.child(r).rng()).unwrap();
                estimate_ar1(&x).unwrap().varphi == 0.0
            })
            .count();
        assert!(zeros > 50, "{zeros}");
    }

    #[test]
    fn estimation_errors() {
        let constant = TimeSeries::new(vec![5.0; 50]).unwrap();
        assert!(matches!(estimate_ar1(&constant), Err(Error::Estimation(_))));
        let short = TimeSeries::new(vec![1.0, 2.0, 3.0]).unwrap();
        assert!(matches!(estimate_ar1(&short), Err(Error::Data(_))));
    }

    #[test]
    fn negative_correlation_clamps_to_zero() {
        let x: Vec<f64> = (0..200)
            .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let fit = estimate_ar1(&TimeSeries::new(x).unwrap()).unwrap();
        assert_eq!(fit.varphi, 0.0);
    }

    #[test]
    fn estimation_error_shrinks_with_length() {
        let model = Ar1Model::new(0.7, 1.0, 1000).unwrap();
        let root = SeedStream::new(21);
        let median_err = |n: usize| {
            let m = model.with_len(n);
            let mut errs: Vec<f64> = (0..50)
                .map(|r| {
                    let x = generate_ar1(&m, &mut root.child(n as u64 * 1000 + r).rng()).unwrap();
                    (estimate_ar1(&x).unwrap().varphi - 0.7).abs()
                })
                .collect();
            errs.sort_by(f64::total_cmp);
            (errs[24] + errs[25]) / 2.0
        };
        let e3 = median_err(1_000);
        let e4 = median_err(10_000);
        let e5 = median_err(100_000);
        assert!(e3 > e4 && e4 > e5, "{e3} {e4} {e5}");
    }

    #[test]
    fn profile_likelihood_matches_direct_gaussian_likelihood() {
        // Oracle: full Gaussian log-likelihood maximized over delta at fixed phi.
        let x = generate_ar1(
            &Ar1Model::new(0.4, 2.0, 60).unwrap(),
            &mut SeedStream::new(2).rng(),
        )
        .unwrap();
        let v = x.values();
        let sums = Ar1Sums::new(v);
        let direct = |phi: f64| {
            let mut s = (1.0 - phi * phi) * v[0] * v[0];
            for w in v.windows(2) {
                s += (w[1] - phi * w[0]).powi(2);
            }
            s
        };
        for phi in [-0.5, 0.0, 0.3, 0.9] {
            assert!((sums.ssq(phi) - direct(phi)).abs() < 1e-9 * direct(phi));
        }
    }

    proptest::proptest! {
        #[test]
        fn estimate_stays_in_null_domain(seed in 0u64..1000, phi in 0.0f64..0.99) {
            let model = Ar1Model::new(phi, 1.0, 64).unwrap();
            let x = generate_ar1(&model, &mut SeedStream::new(seed).rng()).unwrap();
            let fit = estimate_ar1(&x).unwrap();
            proptest::prop_assert!(fit.varphi >= 0.0 && fit.varphi < 1.0);
            proptest::prop_assert!(fit.delta > 0.0);
        }
    }
}
