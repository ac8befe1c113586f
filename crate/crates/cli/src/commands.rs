use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::Parser;
use mcssa::io::{self, RunManifest, SpectrumTable};
use mcssa::{
    adjust_alpha, estimate_rejection_rate, rejection_rates_at, roc_sweep, run_mcssa, synthesize,
    AlphaSearch, Error, Scenario, SeedStream, SignalSpec,
};
use serde_json::{json, Value};

use crate::args::{
    AdjustArgs, Cli, Command, DetectArgs, GenerateArgs, ModelArg, ReplayArgs, RocArgs, ScenarioArgs,
};

/// Stream of the master seed used for generated data; the test itself uses
/// the next stream, matching the calibration layout.
const DATA_STREAM: u64 = 0;
const TEST_STREAM: u64 = 1;

#[derive(Debug)]
pub enum CliError {
    /// Malformed invocation or input file.
    Usage(String),
    /// The analysis ran and failed.
    Runtime(Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Runtime(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Runtime(Error::SearchFailure { reason, trace }) => {
                write!(f, "alpha search failed: {reason}")?;
                for (nominal, estimate) in trace {
                    write!(f, "\n  nominal {nominal}: type-I error {estimate}")?;
                }
                Ok(())
            }
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse { .. } => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Files and metadata produced by one command.
struct Output {
    files: Vec<(&'static str, String)>,
    /// File echoed to stdout.
    primary: &'static str,
    settings: Value,
    density_overlay_scale: Option<f64>,
}

/// Runs a parsed command. `raw` holds the arguments after the program name.
pub fn execute(command: Command, raw: Vec<String>) -> CliResult<()> {
    let (name, run) = match &command {
        Command::Detect(a) => ("detect", &a.run),
        Command::Calibrate(a) => ("calibrate", &a.run),
        Command::Power(a) => ("power", &a.run),
        Command::AdjustAlpha(a) => ("adjust-alpha", &a.scenario.run),
        Command::Roc(a) => ("roc", &a.scenario.run),
        Command::Generate(a) => ("generate", &a.run),
        Command::Replay(a) => return replay(a),
    };
    let seed = resolve_seed(run.seed);
    let workers = run.workers.unwrap_or_else(default_workers);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(Error::Computation(e.to_string())))?;

    let start = Instant::now();
    let output = pool.install(|| match &command {
        Command::Detect(a) => detect(a, seed),
        Command::Calibrate(a) => calibrate(a, seed, false),
        Command::Power(a) => calibrate(a, seed, true),
        Command::AdjustAlpha(a) => adjust(a, seed),
        Command::Roc(a) => roc(a, seed),
        Command::Generate(a) => generate(a, seed),
        Command::Replay(_) => unreachable!(),
    })?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;

    fs::create_dir_all(&run.out).map_err(Error::from)?;
    for (file, contents) in &output.files {
        fs::write(run.out.join(file), contents).map_err(Error::from)?;
    }
    let manifest = RunManifest {
        tool: "mcssa".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: name.into(),
        args: replay_args(&raw, seed),
        seed,
        workers,
        settings: output.settings,
        density_overlay_scale: output.density_overlay_scale,
        timings_ms: BTreeMap::from([("run".to_string(), elapsed)]),
    };
    manifest.write(&run.out.join("manifest.json"))?;

    if let Some((_, text)) = output.files.iter().find(|(f, _)| *f == output.primary) {
        print!("{text}");
    }
    Ok(())
}

fn replay(a: &ReplayArgs) -> CliResult<()> {
    let manifest = RunManifest::read(&a.manifest)?;
    let mut args = manifest.args.clone();
    args.push("--out".into());
    args.push(a.out.display().to_string());
    if let Some(w) = a.workers {
        args.push("--workers".into());
        args.push(w.to_string());
    }
    let cli = Cli::try_parse_from(std::iter::once("mcssa".to_string()).chain(args.iter().cloned()))
        .map_err(|e| CliError::Usage(format!("manifest arguments are invalid: {e}")))?;
    if matches!(cli.command, Command::Replay(_)) {
        return Err(CliError::Usage("a manifest cannot record a replay".into()));
    }
    execute(cli.command, args)
}

fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        let now = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .unwrap_or_default();
        now.as_secs() ^ u64::from(now.subsec_nanos()).rotate_left(32)
    })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Arguments that reproduce the run: output location and worker count are
/// dropped, the input path is made absolute and the resolved seed is made
/// explicit.
fn replay_args(raw: &[String], seed: u64) -> Vec<String> {
    let mut out = Vec::with_capacity(raw.len() + 2);
    let mut iter = raw.iter();
    while let Some(arg) = iter.next() {
        if arg == "--out" || arg == "--workers" {
            iter.next();
        } else if arg == "--input" {
            out.push(arg.clone());
            out.extend(iter.next().map(|p| absolute(p)));
        } else if let Some(p) = arg.strip_prefix("--input=") {
            out.push(format!("--input={}", absolute(p)));
        } else if !(arg.starts_with("--out=") || arg.starts_with("--workers=")) {
            out.push(arg.clone());
        }
    }
    if !raw
        .iter()
        .any(|a| a == "--seed" || a.starts_with("--seed="))
    {
        out.push("--seed".into());
        out.push(seed.to_string());
    }
    out
}

fn absolute(path: &str) -> String {
    fs::canonicalize(Path::new(path)).map_or_else(|_| path.to_string(), |p| p.display().to_string())
}

fn detect(a: &DetectArgs, seed: u64) -> CliResult<Output> {
    let master = SeedStream::new(seed);
    let mut files = Vec::new();
    let (series, generating) = match &a.input {
        Some(path) => (io::read_series(path)?, None),
        None => {
            let model = a.gen.model()?;
            let series = synthesize(
                &a.gen.signal()?,
                a.gen.n,
                &model,
                &mut master.child(DATA_STREAM).rng(),
            )?;
            files.push(("series.txt", io::format_series(&series)));
            (series, Some(model))
        }
    };
    let config = a.test.config(ModelArg::Estimate, generating)?;
    let result = run_mcssa(&series, &config, master.child(TEST_STREAM))?;
    files.push(("report.txt", io::format_report(&result, &config, seed)));
    files.push(("spectrum.csv", SpectrumTable::from_result(&result).to_csv()));
    let settings = json!({
        "config": config,
        "input": a.input.as_ref().map(|p| p.display().to_string()),
        "generation": generating.map(|model| json!({ "model": model, "signal": a.gen.signal().ok() })),
        "null_model": result.null_model,
    });
    Ok(Output {
        files,
        primary: "report.txt",
        settings,
        density_overlay_scale: Some(series.len() as f64),
    })
}

fn scenario(a: &ScenarioArgs) -> CliResult<Scenario> {
    let model = a.gen.model()?;
    let scenario = Scenario {
        model,
        signal: a.gen.signal()?,
        config: a.test.config(ModelArg::True, Some(model))?,
        replicates: a.replicates,
    };
    scenario.validate()?;
    Ok(scenario)
}

fn calibrate(a: &ScenarioArgs, seed: u64, power: bool) -> CliResult<Output> {
    if power && a.gen.amplitude == 0.0 {
        return Err(CliError::Usage("power needs a non-zero --amplitude".into()));
    }
    let scenario = scenario(a)?;
    let master = SeedStream::new(seed);
    let rows = if a.alphas.is_empty() {
        vec![(a.label.clone(), estimate_rejection_rate(&scenario, master)?)]
    } else {
        rejection_rates_at(&scenario, &a.alphas, master)?
            .into_iter()
            .zip(&a.alphas)
            .map(|(e, alpha)| (format!("{}@{alpha}", a.label), e))
            .collect()
    };
    Ok(Output {
        files: vec![("estimates.csv", io::estimates_csv(&rows))],
        primary: "estimates.csv",
        settings: json!({ "scenario": scenario, "alphas": a.alphas }),
        density_overlay_scale: None,
    })
}

fn adjust(a: &AdjustArgs, seed: u64) -> CliResult<Output> {
    let scenario = scenario(&a.scenario)?;
    let search = AlphaSearch {
        lo: a.lo,
        hi: a.hi,
        max_iter: a.max_iter,
    };
    let adj = adjust_alpha(&scenario, a.target, search, SeedStream::new(seed))?;
    let mut summary = String::new();
    let last = adj.trace.last().map(|s| s.estimate);
    let _ = writeln!(summary, "target = {}", adj.target);
    let _ = writeln!(summary, "adjusted = {}", adj.adjusted);
    let _ = writeln!(summary, "converged = {}", adj.converged);
    let _ = writeln!(summary, "evaluations = {}", adj.trace.len());
    if let Some(step) = adj.trace.iter().find(|s| s.nominal == adj.adjusted) {
        let _ = writeln!(summary, "estimate = {}", step.estimate.proportion);
        let _ = writeln!(summary, "ci_2.5 = {}", step.estimate.ci_low);
        let _ = writeln!(summary, "ci_97.5 = {}", step.estimate.ci_high);
    } else if let Some(e) = last {
        let _ = writeln!(summary, "estimate = {}", e.proportion);
    }
    Ok(Output {
        files: vec![
            ("adjustment.txt", summary),
            ("alpha_trace.csv", io::alpha_trace_csv(&adj)),
        ],
        primary: "adjustment.txt",
        settings: json!({ "scenario": scenario, "target": a.target, "search": search }),
        density_overlay_scale: None,
    })
}

fn roc(a: &RocArgs, seed: u64) -> CliResult<Output> {
    if a.scenario.gen.amplitude == 0.0 {
        return Err(CliError::Usage(
            "roc needs a non-zero --amplitude for the alternative".into(),
        ));
    }
    let alternative = scenario(&a.scenario)?;
    let null = Scenario {
        signal: SignalSpec::new(0.0, alternative.signal.period)?,
        ..alternative
    };
    let points = roc_sweep(&null, &alternative, &a.levels, SeedStream::new(seed))?;
    Ok(Output {
        files: vec![("roc.csv", io::roc_csv(&points))],
        primary: "roc.csv",
        settings: json!({ "alternative": alternative, "levels": a.levels }),
        density_overlay_scale: None,
    })
}

fn generate(a: &GenerateArgs, seed: u64) -> CliResult<Output> {
    let model = a.gen.model()?;
    let signal = a.gen.signal()?;
    let series = synthesize(
        &signal,
        a.gen.n,
        &model,
        &mut SeedStream::new(seed).child(DATA_STREAM).rng(),
    )?;
    Ok(Output {
        files: vec![("series.txt", io::format_series(&series))],
        primary: "",
        settings: json!({ "model": model, "signal": signal }),
        density_overlay_scale: None,
    })
}
