//! Monte Carlo singular spectrum analysis (MC-SSA) for detecting periodic
//! components in red noise.
//!
//! The crate covers the full pipeline:
//!
//! * [`series`]: AR(1) red-noise generation, sinusoid synthesis and AR(1) fitting,
//! * [`ssa`]: trajectory matrices, their eigensystem and projection energies,
//! * [`esprit`] and [`basis`]: projection vectors labelled with frequencies,
//! * [`detection`]: the surrogate test with family-wise error control,
//! * [`calibration`]: type-I error and power estimation, level adjustment, ROC,
//! * [`io`]: series files, reports, tables and run manifests.
//!
//! ```
//! use mcssa::{run_mcssa, synthesize, Ar1Model, NullModel, SeedStream, SignalSpec, TestConfig};
//!
//! let model = Ar1Model::new(0.7, 1.0, 500).unwrap();
//! let signal = SignalSpec::new(1.0, 5.5).unwrap();
//! let series = synthesize(&signal, 500, &model, &mut SeedStream::new(1).rng()).unwrap();
//! let config = TestConfig::new(20, 200, 0.8).with_null_model(NullModel::Given(model));
//! let result = run_mcssa(&series, &config, SeedStream::new(2)).unwrap();
//! assert!(result.reject);
//! ```

pub mod basis;
pub mod calibration;
pub mod detection;
pub mod error;
pub mod esprit;
pub mod io;
pub mod quantile;
pub mod rng;
pub mod series;
pub mod ssa;

pub use basis::{
    eigen_basis, select_in_range, sine_basis, BasisKind, FrequencyRange, ProjectionBasis,
};
pub use calibration::{
    adjust_alpha, clopper_pearson, estimate_rejection_rate, rejection_rates_at, replicate_outcomes,
    roc_sweep, AlphaAdjustment, AlphaSearch, ErrorEstimate, RocPoint, Scenario,
};
pub use detection::{
    bonferroni_test, multiple_test, prepare_mcssa, run_mcssa, single_interval,
    surrogate_projections, Decision, Interval, NullModel, PreparedTest, SurrogateSample,
    TestConfig, TestResult,
};
pub use error::{Error, Result};
pub use esprit::{esprit_main_frequency, FrequencyEstimate};
pub use rng::SeedStream;
pub use series::{estimate_ar1, generate_ar1, synthesize, Ar1Model, SignalSpec, TimeSeries};
pub use ssa::{decompose, embed, squared_projection_norms, SsaDecomposition, TrajectoryMatrix};
