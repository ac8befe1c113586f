use thiserror::Error;

/// Errors produced by the analysis pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A model or configuration parameter lies outside its domain.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// Input data is unusable (non-finite values, too short).
    #[error("invalid data: {0}")]
    Data(String),

    /// AR(1) estimation could not produce a model.
    #[error("estimation failed: {0}")]
    Estimation(String),

    /// A numerical routine failed.
    #[error("computation failed: {0}")]
    Computation(String),

    /// No basis vector has a frequency inside the requested range.
    #[error("no projection vectors in the requested frequency range [{low}, {high}]")]
    EmptyRange { low: f64, high: f64 },

    /// A surrogate row has zero spread and cannot be standardized.
    #[error(
        "degenerate surrogate distribution for projection vector {index}: zero standard deviation"
    )]
    DegenerateSurrogate { index: usize },

    /// The surrogate count is too small for the requested quantile level.
    #[error("sample size {have} too small: at least {need} surrogates required")]
    SampleSize { have: usize, need: usize },

    /// A series file line is not a number.
    #[error("line {line}: cannot parse '{content}' as a number")]
    Parse { line: usize, content: String },

    #[error("i/o error: {0}")]
    Io(String),

    /// Significance-level search could not bracket the target.
    #[error("alpha search failed: {reason}")]
    SearchFailure {
        reason: String,
        /// (nominal alpha, estimated type-I error) pairs evaluated before giving up.
        trace: Vec<(f64, f64)>,
    },
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
