//! File formats: series input, detection reports, spectrum and calibration
//! tables, and run manifests.
//!
//! Series files hold one decimal number per line; blank lines and lines
//! starting with `#` are skipped. Reports are `key = value` lines. Tables are
//! comma-separated with a header row and contain only numbers, so no quoting
//! is needed.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::calibration::{AlphaAdjustment, ErrorEstimate, RocPoint};
use crate::detection::TestConfig;
use crate::error::{Error, Result};
use crate::series::TimeSeries;
use crate::TestResult;

pub const SPECTRUM_HEADER: &str =
    "index,frequency,observed,lower,upper,included,significant,density";
pub const ESTIMATE_HEADER: &str = "label,estimate,ci_2.5,ci_97.5,rejections,replicates";
pub const ROC_HEADER: &str = "nominal_alpha,fpr,fpr_ci_2.5,fpr_ci_97.5,tpr,tpr_ci_2.5,tpr_ci_97.5";
pub const ALPHA_TRACE_HEADER: &str = "step,nominal_alpha,estimate,ci_2.5,ci_97.5";

pub fn parse_series(text: &str) -> Result<TimeSeries> {
    let mut values = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v = line.parse::<f64>().map_err(|_| Error::Parse {
            line: i + 1,
            content: line.to_string(),
        })?;
        values.push(v);
    }
    TimeSeries::new(values)
}

pub fn read_series(path: &Path) -> Result<TimeSeries> {
    parse_series(&fs::read_to_string(path)?)
}

/// One value per line with 17 significant digits.
pub fn format_series(ts: &TimeSeries) -> String {
    let mut out = String::with_capacity(ts.len() * 26);
    for v in ts.values() {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

pub fn write_series(path: &Path, ts: &TimeSeries) -> Result<()> {
    Ok(fs::write(path, format_series(ts))?)
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Key-value detection report.
pub fn format_report(result: &TestResult, config: &TestConfig, seed: u64) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("reject", result.reject.to_string());
    kv("freq_max", opt(result.freq_max));
    kv("q_upper", opt(result.q_upper));
    kv("q_lower", opt(result.q_lower));
    kv("alpha", config.alpha().to_string());
    kv("G", config.surrogates.to_string());
    kv("L", config.window.to_string());
    kv("basis", config.basis.to_string());
    kv("range", config.range.to_string());
    kv("seed", seed.to_string());
    kv("two_tailed", config.two_tailed.to_string());
    kv("max_statistic", result.max_statistic().to_string());
    kv("varphi", result.null_model.varphi.to_string());
    kv("delta", result.null_model.delta.to_string());
    out
}

/// Parses `key = value` lines back into a map.
pub fn parse_report(text: &str) -> BTreeMap<String, String> {
    text.lines()
        .filter_map(|l| l.split_once(" = "))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

/// One row of the spectrum table.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumRow {
    pub index: usize,
    pub frequency: f64,
    pub observed: f64,
    /// Corrected bounds, present for vectors inside the tested range.
    pub bounds: Option<(f64, f64)>,
    pub significant: bool,
    /// Raw AR(1) spectral density of the null model at `frequency`.
    pub density: f64,
}

/// Plot-ready per-vector data, sorted by frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub rows: Vec<SpectrumRow>,
}

impl SpectrumTable {
    pub fn from_result(result: &TestResult) -> Self {
        let mut rows: Vec<SpectrumRow> = result
            .frequencies
            .iter()
            .zip(&result.observed)
            .enumerate()
            .map(|(index, (&frequency, &observed))| SpectrumRow {
                index,
                frequency,
                observed,
                bounds: None,
                significant: false,
                density: result.null_model.spectral_density(frequency),
            })
            .collect();
        for (pos, &k) in result.included.iter().enumerate() {
            rows[k].bounds = Some((result.lower[pos], result.upper[pos]));
            rows[k].significant = result.significant[pos];
        }
        rows.sort_by(|a, b| {
            a.frequency
                .total_cmp(&b.frequency)
                .then(a.index.cmp(&b.index))
        });
        Self { rows }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(SPECTRUM_HEADER);
        out.push('\n');
        for r in &self.rows {
            let (lo, hi) = r.bounds.map_or((String::new(), String::new()), |(l, u)| {
                (l.to_string(), u.to_string())
            });
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.index,
                r.frequency,
                r.observed,
                lo,
                hi,
                u8::from(r.bounds.is_some()),
                u8::from(r.significant),
                r.density
            );
        }
        out
    }
}

pub fn estimate_row(label: &str, e: &ErrorEstimate) -> String {
    format!(
        "{label},{},{},{},{},{}",
        e.proportion, e.ci_low, e.ci_high, e.rejections, e.replicates
    )
}

pub fn estimates_csv(rows: &[(String, ErrorEstimate)]) -> String {
    let mut out = String::from(ESTIMATE_HEADER);
    out.push('\n');
    for (label, e) in rows {
        out.push_str(&estimate_row(label, e));
        out.push('\n');
    }
    out
}

pub fn roc_csv(points: &[RocPoint]) -> String {
    let mut out = String::from(ROC_HEADER);
    out.push('\n');
    for p in points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            p.nominal,
            p.fpr.proportion,
            p.fpr.ci_low,
            p.fpr.ci_high,
            p.tpr.proportion,
            p.tpr.ci_low,
            p.tpr.ci_high
        );
    }
    out
}

pub fn alpha_trace_csv(adj: &AlphaAdjustment) -> String {
    let mut out = String::from(ALPHA_TRACE_HEADER);
    out.push('\n');
    for (i, s) in adj.trace.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            s.nominal,
            s.estimate.proportion,
            s.estimate.ci_low,
            s.estimate.ci_high
        );
    }
    out
}

/// Everything needed to repeat a CLI run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Arguments after the program name; replaying them reproduces the outputs.
    pub args: Vec<String>,
    pub seed: u64,
    pub workers: usize,
    /// Resolved configuration values, for reference.
    pub settings: serde_json::Value,
    /// Multiplier for overlaying the density column on projection norms.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub density_overlay_scale: Option<f64>,
    pub timings_ms: BTreeMap<String, f64>,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Io(e.to_string()))?;
        Ok(fs::write(path, json + "\n")?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Io(format!("invalid manifest: {e}")))
    }
}
