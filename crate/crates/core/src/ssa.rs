//! Hankel embedding and the eigensystem of the lag-covariance matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Tolerance on basis column norms accepted by [`squared_projection_norms`].
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Eigenvalues below this fraction of the largest one count as zero.
pub const RANK_CUTOFF: f64 = 1e-12;

/// The L x K Hankel matrix whose columns are the lagged vectors
/// `(x_j, ..., x_{j+L-1})`. Entries are not materialized; they are read from
/// the underlying series.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    series: Vec<f64>,
    window: usize,
}

impl TrajectoryMatrix {
    pub fn window(&self) -> usize {
        self.window
    }

    pub fn k(&self) -> usize {
        self.series.len() - self.window + 1
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.window, self.k())
    }

    /// Zero-based entry `(i, j)`, equal to `x[i + j]`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.window && j < self.k(), "index out of bounds");
        self.series[i + j]
    }

    /// Lagged vector number `j` (zero-based column).
    pub fn column(&self, j: usize) -> &[f64] {
        &self.series[j..j + self.window]
    }

    pub fn entries(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.window, self.k(), |i, j| self.series[i + j])
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        (0..self.k())
            .map(|j| self.column(j).iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// `X X^T`, the unnormalized lag-covariance matrix.
    pub fn lag_covariance(&self) -> DMatrix<f64> {
        lag_covariance(&self.series, self.window)
    }

    pub fn series(&self) -> &[f64] {
        &self.series
    }
}

/// Computes `X X^T` for the trajectory matrix of `x` with window `window`
/// by walking each diagonal: entry `(i+1, j+1)` is entry `(i, j)` minus the
/// product leaving the window plus the product entering it.
pub(crate) fn lag_covariance(x: &[f64], window: usize) -> DMatrix<f64> {
    let k = x.len() - window + 1;
    let mut s = DMatrix::zeros(window, window);
    for d in 0..window {
        let mut acc: f64 = x[..k].iter().zip(&x[d..d + k]).map(|(a, b)| a * b).sum();
        s[(0, d)] = acc;
        s[(d, 0)] = acc;
        for i in 0..window - d - 1 {
            acc += x[i + k] * x[i + d + k] - x[i] * x[i + d];
            s[(i + 1, i + 1 + d)] = acc;
            s[(i + 1 + d, i + 1)] = acc;
        }
    }
    s
}

/// Builds the trajectory matrix of `ts` with window length `window`.
pub fn embed(ts: &TimeSeries, window: usize) -> Result<TrajectoryMatrix> {
    embed_values(ts.values(), window)
}

pub(crate) fn embed_values(values: &[f64], window: usize) -> Result<TrajectoryMatrix> {
    let n = values.len();
    if window <= 1 || window >= n {
        return Err(Error::Parameter(format!(
            "window length must satisfy 1 < L < N = {n}, got {window}"
        )));
    }
    Ok(TrajectoryMatrix {
        series: values.to_vec(),
        window,
    })
}

/// Eigenpairs of `X X^T` with non-zero eigenvalues, sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SsaDecomposition {
    pub eigenvalues: Vec<f64>,
    /// L x d, orthonormal columns matching `eigenvalues`.
    pub eigenvectors: DMatrix<f64>,
}

impl SsaDecomposition {
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// All L eigenpairs of a symmetric matrix, eigenvalues nonincreasing.
pub(crate) fn sorted_eigen(s: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    if s.iter().any(|v| !v.is_finite()) {
        return Err(Error::Computation(
            "lag-covariance matrix is not finite".into(),
        ));
    }
    let n = s.nrows();
    let eig = SymmetricEigen::try_new(s, f64::EPSILON, 0)
        .ok_or_else(|| Error::Computation("symmetric eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

/// Eigendecomposition of the lag-covariance matrix of `x`.
pub fn decompose(x: &TrajectoryMatrix) -> Result<SsaDecomposition> {
    let max_pairs = x.window().min(x.k());
    let (values, vectors) = sorted_eigen(x.lag_covariance())?;
    let top = values.first().copied().unwrap_or(0.0);
    let d = if top > 0.0 {
        values
            .iter()
            .take(max_pairs)
            .take_while(|&&v| v > RANK_CUTOFF * top)
            .count()
    } else {
        0
    };
    Ok(SsaDecomposition {
        eigenvalues: values[..d].to_vec(),
        eigenvectors: vectors.columns(0, d).into_owned(),
    })
}

fn check_unit_columns(w: &DMatrix<f64>) -> Result<()> {
    for (k, col) in w.column_iter().enumerate() {
        let norm = col.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::Parameter(format!(
                "projection vector {k} has norm {norm}, expected 1"
            )));
        }
    }
    Ok(())
}

/// Quadratic forms `w_k^T S w_k` for every column of `w`.
pub(crate) fn quadratic_forms(s: &DMatrix<f64>, w: &DMatrix<f64>) -> Vec<f64> {
    let sw = s * w;
    w.column_iter()
        .zip(sw.column_iter())
        .map(|(a, b)| a.dot(&b).max(0.0))
        .collect()
}

/// Squared norms `||X^T W_k||^2` for each unit column `W_k` of `w`.
pub fn squared_projection_norms(x: &TrajectoryMatrix, w: &DMatrix<f64>) -> Result<Vec<f64>> {
    if w.nrows() != x.window() {
        return Err(Error::Parameter(format!(
            "projection vectors have {} rows, window length is {}",
            w.nrows(),
            x.window()
        )));
    }
    check_unit_columns(w)?;
    Ok(quadratic_forms(&x.lag_covariance(), w))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SeedStream;
    use crate::series::{generate_ar1, Ar1Model};
    use std::f64::consts::PI;

    fn noise(n: usize, seed: u64) -> TimeSeries {
        generate_ar1(
            &Ar1Model::new(0.5, 1.0, n).unwrap(),
            &mut SeedStream::new(seed).rng(),
        )
        .unwrap()
    }

    fn naive_projections(x: &TrajectoryMatrix, w: &DMatrix<f64>) -> Vec<f64> {
        (0..w.ncols())
            .map(|k| {
                (0..x.k())
                    .map(|j| {
                        let dot: f64 = (0..x.window()).map(|i| x.entry(i, j) * w[(i, k)]).sum();
                        dot * dot
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn embed_small_example() {
        let ts = TimeSeries::new(vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let x = embed(&ts, 2).unwrap();
        assert_eq!(
            x.entries(),
            DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 2.0, 3.0, 4.0])
        );
    }

    #[test]
    fn embed_shape_and_columns() {
        let ts = noise(1000, 1);
        let x = embed(&ts, 20).unwrap();
        assert_eq!(x.shape(), (20, 981));
        for j in [0, 17, 500, 980] {
            assert_eq!(x.column(j), &ts.values()[j..j + 20]);
        }
    }

    #[test]
    fn embed_rejects_bad_window() {
        let ts = noise(10, 1);
        assert!(embed(&ts, 1).is_err());
        assert!(embed(&ts, 10).is_err());
        assert!(embed(&ts, 9).is_ok());
    }

    #[test]
    fn lag_covariance_matches_dense_product() {
        let x = embed(&noise(137, 2), 17).unwrap();
        let dense = x.entries() * x.entries().transpose();
        let fast = x.lag_covariance();
        assert!((dense - fast).amax() < 1e-10);
    }

    #[test]
    fn sinusoid_has_rank_two() {
        // period 8 with L = 16 and K = 32
        let n = 16 + 32 - 1;
        let v: Vec<f64> = (1..=n).map(|k| (2.0 * PI * k as f64 / 8.0).sin()).collect();
        let x = embed(&TimeSeries::new(v).unwrap(), 16).unwrap();
        let d = decompose(&x).unwrap();
        assert_eq!(d.rank(), 2);
        assert!((d.eigenvalues[0] - d.eigenvalues[1]).abs() < 1e-6 * d.eigenvalues[0]);
    }

    #[test]
    fn eigenvalues_sum_to_frobenius_norm() {
        let x = embed(&noise(300, 3), 25).unwrap();
        let d = decompose(&x).unwrap();
        let total: f64 = d.eigenvalues.iter().sum();
        let fro = x.frobenius_norm_sq();
        assert!((total - fro).abs() < 1e-8 * fro);
        assert!(d.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn eigenvectors_orthonormal() {
        let x = embed(&noise(400, 4), 30).unwrap();
        let d = decompose(&x).unwrap();
        let gram = d.eigenvectors.transpose() * &d.eigenvectors;
        let id = DMatrix::<f64>::identity(d.rank(), d.rank());
        assert!((gram - id).amax() < 1e-8);
    }

    #[test]
    fn projection_onto_eigenvectors_gives_eigenvalues() {
        let x = embed(&noise(500, 5), 20).unwrap();
        let d = decompose(&x).unwrap();
        let p = squared_projection_norms(&x, &d.eigenvectors).unwrap();
        for (pk, lk) in p.iter().zip(&d.eigenvalues) {
            assert!((pk - lk).abs() <= 1e-8 * lk);
        }
    }

    #[test]
    fn projections_match_naive_oracle() {
        let x = embed(
            &TimeSeries::new(vec![0.3, -1.2, 2.5, 0.7, -0.4, 1.9]).unwrap(),
            3,
        )
        .unwrap();
        let raw = DMatrix::from_row_slice(3, 2, &[1.0, 0.2, -2.0, 0.5, 0.5, -1.0]);
        let w = DMatrix::from_columns(&[raw.column(0).normalize(), raw.column(1).normalize()]);
        let fast = squared_projection_norms(&x, &w).unwrap();
        let slow = naive_projections(&x, &w);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn zero_matrix_projects_to_zero() {
        let x = embed(&TimeSeries::new(vec![0.0; 10]).unwrap(), 4).unwrap();
        let w = DMatrix::<f64>::identity(4, 4);
        assert_eq!(squared_projection_norms(&x, &w).unwrap(), vec![0.0; 4]);
        assert_eq!(decompose(&x).unwrap().rank(), 0);
    }

    #[test]
    fn non_unit_columns_are_rejected() {
        let x = embed(&noise(20, 1), 4).unwrap();
        let w = DMatrix::from_element(4, 1, 1.0);
        assert!(matches!(
            squared_projection_norms(&x, &w),
            Err(Error::Parameter(_))
        ));
        let w = DMatrix::<f64>::identity(3, 3);
        assert!(squared_projection_norms(&x, &w).is_err());
    }

    #[test]
    fn negation_preserves_eigenvalues() {
        let ts = noise(200, 6);
        let neg = ts.scaled(-1.0).unwrap();
        let a = decompose(&embed(&ts, 15).unwrap()).unwrap();
        let b = decompose(&embed(&neg, 15).unwrap()).unwrap();
        for (x, y) in a.eigenvalues.iter().zip(&b.eigenvalues) {
            assert!((x - y).abs() <= 1e-10 * x);
        }
    }

    proptest::proptest! {
        #[test]
        fn hankel_property(values in proptest::collection::vec(-1e3f64..1e3, 3..60), frac in 0.0f64..1.0) {
            let n = values.len();
            let window = 2 + ((n - 3) as f64 * frac) as usize;
            let x = embed(&TimeSeries::new(values.clone()).unwrap(), window).unwrap();
            let m = x.entries();
            for i in 0..window {
                for j in 0..x.k() {
                    proptest::prop_assert_eq!(m[(i, j)], values[i + j]);
                }
            }
        }

        #[test]
        fn energy_conserved_over_orthonormal_basis(seed in 0u64..500) {
            let x = embed(&noise(120, seed), 12).unwrap();
            // eigenvectors of an unrelated series form an arbitrary orthonormal basis
            let d = decompose(&embed(&noise(120, seed + 10_000), 12).unwrap()).unwrap();
            let p = squared_projection_norms(&x, &d.eigenvectors).unwrap();
            let fro = x.frobenius_norm_sq();
            proptest::prop_assert!((p.iter().sum::<f64>() - fro).abs() < 1e-8 * fro);
        }
    }
}
