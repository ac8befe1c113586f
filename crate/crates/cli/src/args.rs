use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use mcssa::{Ar1Model, BasisKind, FrequencyRange, NullModel, Result, TestConfig};

#[derive(Debug, Parser)]
#[command(
    name = "mcssa",
    version,
    about = "Monte Carlo SSA detection of oscillations in red noise"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Test one series for a periodic component.
    Detect(DetectArgs),
    /// Estimate the rejection rate of a scenario by outer Monte Carlo.
    Calibrate(ScenarioArgs),
    /// Estimate power against a sinusoidal alternative.
    Power(ScenarioArgs),
    /// Search for the nominal level that attains a target type-I error.
    AdjustAlpha(AdjustArgs),
    /// False- and true-positive rates over a grid of nominal levels.
    Roc(RocArgs),
    /// Write a synthetic series (AR(1) noise plus optional sinusoid).
    Generate(GenerateArgs),
    /// Re-run the command recorded in a manifest.
    Replay(ReplayArgs),
}

/// Null model specification: `estimate`, `true` (the generating model) or `PHI,DELTA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelArg {
    Estimate,
    True,
    Given { varphi: f64, delta: f64 },
}

impl FromStr for ModelArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "estimate" | "est" => Ok(Self::Estimate),
            "true" | "model" => Ok(Self::True),
            _ => {
                let parsed = s
                    .split_once(',')
                    .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
                match parsed {
                    Some((varphi, delta)) => Ok(Self::Given { varphi, delta }),
                    None => Err(format!(
                        "expected 'estimate', 'true' or 'PHI,DELTA', got '{s}'"
                    )),
                }
            }
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    /// Series length.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// AR(1) coefficient of the noise.
    #[arg(long, default_value_t = 0.7, allow_negative_numbers = true)]
    pub varphi: f64,
    /// Innovation standard deviation of the noise.
    #[arg(long, default_value_t = 1.0)]
    pub delta: f64,
    /// Sinusoid amplitude (0 for pure noise).
    #[arg(long, default_value_t = 0.0)]
    pub amplitude: f64,
    /// Sinusoid period in samples.
    #[arg(long, default_value_t = 5.5)]
    pub period: f64,
    /// Sinusoid phase in radians.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub phase: f64,
}

impl GenArgs {
    pub fn model(&self) -> Result<Ar1Model> {
        Ar1Model::new(self.varphi, self.delta, self.n)
    }

    pub fn signal(&self) -> Result<mcssa::SignalSpec> {
        Ok(mcssa::SignalSpec::new(self.amplitude, self.period)?.with_phase(self.phase))
    }
}

#[derive(Debug, Clone, Args)]
pub struct TestArgs {
    /// Window length L.
    #[arg(long, default_value_t = 20)]
    pub window: usize,
    /// Number of surrogate series G.
    #[arg(long, default_value_t = 1000)]
    pub surrogates: usize,
    /// Confidence level (1 - alpha).
    #[arg(long, default_value_t = 0.8)]
    pub confidence: f64,
    /// Projection basis: ev (eigenvectors) or sin (sine grid).
    #[arg(long, default_value = "ev")]
    pub basis: BasisKind,
    /// Tested frequency range as LOW,HIGH.
    #[arg(long, default_value = "0,0.5")]
    pub range: FrequencyRange,
    /// Use the two-tailed criterion.
    #[arg(long)]
    pub two_tailed: bool,
    /// Null model: estimate, true, or PHI,DELTA [default: estimate for detect, true otherwise].
    #[arg(long, allow_hyphen_values = true)]
    pub model: Option<ModelArg>,
}

impl TestArgs {
    pub fn config(
        &self,
        default_model: ModelArg,
        generating: Option<Ar1Model>,
    ) -> Result<TestConfig> {
        let null_model = match self.model.unwrap_or(default_model) {
            ModelArg::Estimate => NullModel::Estimate,
            ModelArg::Given { varphi, delta } => {
                NullModel::Given(Ar1Model::new(varphi, delta, generating.map_or(2, |m| m.n))?)
            }
            ModelArg::True => match generating {
                Some(m) => NullModel::Given(m),
                None => {
                    return Err(mcssa::Error::Parameter(
                        "--model true needs generation parameters, not --input".into(),
                    ))
                }
            },
        };
        let config = TestConfig::new(self.window, self.surrogates, self.confidence)
            .with_basis(self.basis)
            .with_range(self.range)
            .with_two_tailed(self.two_tailed)
            .with_null_model(null_model);
        config.validate()?;
        Ok(config)
    }
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Master seed; falls back to MCSSA_SEED, then to a time-derived seed.
    #[arg(long, env = "MCSSA_SEED")]
    pub seed: Option<u64>,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Output directory.
    #[arg(long, default_value = "mcssa-out")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct DetectArgs {
    /// Series file, one value per line. Without it a series is generated.
    #[arg(long, conflicts_with_all = ["n", "varphi", "delta", "amplitude", "period", "phase"])]
    pub input: Option<PathBuf>,
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub test: TestArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub test: TestArgs,
    /// Outer Monte Carlo replicates M.
    #[arg(long, default_value_t = 1000)]
    pub replicates: usize,
    /// Row label in the output table.
    #[arg(long, default_value = "estimate")]
    pub label: String,
    /// Nominal levels to evaluate on shared replicates, comma-separated.
    /// Defaults to 1 - confidence.
    #[arg(long, value_delimiter = ',')]
    pub alphas: Vec<f64>,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct AdjustArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Target type-I error.
    #[arg(long, default_value_t = 0.2)]
    pub target: f64,
    /// Lower end of the nominal-level bracket.
    #[arg(long, default_value_t = 0.01)]
    pub lo: f64,
    /// Upper end of the nominal-level bracket.
    #[arg(long, default_value_t = 0.6)]
    pub hi: f64,
    /// Maximum bisection steps.
    #[arg(long, default_value_t = 12)]
    pub max_iter: usize,
}

#[derive(Debug, Clone, Args)]
pub struct RocArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Nominal levels, comma-separated.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "0.05,0.1,0.2,0.3,0.4,0.5"
    )]
    pub levels: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub gen: GenArgs,
    #[command(flatten)]
    pub run: RunArgs,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    /// Manifest written by a previous run.
    pub manifest: PathBuf,
    /// Output directory for the replayed run.
    #[arg(long, default_value = "mcssa-replay")]
    pub out: PathBuf,
    /// Worker threads [default: available parallelism].
    #[arg(long)]
    pub workers: Option<usize>,
}
