//! Config-driven experiment runner for the `mixlimit` laboratory.
//!
//! A run reads one TOML config (or an embedded preset), executes it and
//! writes a JSON report, plus optionally the raw samples as CSV. The report
//! embeds the resolved config and [`mixlimit::VERSION`], and is
//! byte-identical for a given config and seed whatever the worker count.

pub mod assemble;
pub mod config;
pub mod experiments;
pub mod hypotheses;
pub mod presets;

use std::fmt;
use std::path::{Path, PathBuf};

use mixlimit::LabError;
use serde::Serialize;

pub use config::{ExperimentConfig, ExperimentKind};

/// Exit status of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    /// The run completed but some pass flag is false.
    Fail = 1,
    ConfigError = 2,
    DiagnosticError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Diagnostic(String),
}

impl CliError {
    pub fn status(&self) -> ExitStatus {
        match self {
            CliError::Config(_) => ExitStatus::ConfigError,
            CliError::Diagnostic(_) => ExitStatus::DiagnosticError,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Diagnostic(m) => write!(f, "diagnostic failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        if e.is_configuration() {
            CliError::Config(e.to_string())
        } else {
            CliError::Diagnostic(e.to_string())
        }
    }
}

/// The JSON report of a run.
#[derive(Debug, Clone, Serialize)]
pub struct Document {
    pub version: &'static str,
    pub experiment: ExperimentKind,
    pub seed: u64,
    pub pass: bool,
    pub config: ExperimentConfig,
    pub results: serde_json::Value,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Document {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// A finished run.
pub struct RunResult {
    pub document: Document,
    pub samples: Option<(&'static str, Vec<f64>)>,
}

impl RunResult {
    pub fn status(&self) -> ExitStatus {
        if self.document.pass {
            ExitStatus::Pass
        } else {
            ExitStatus::Fail
        }
    }

    pub fn samples_csv(&self) -> Option<String> {
        let (label, values) = self.samples.as_ref()?;
        let mut out = format!("sample_index,{label}\n");
        for (i, v) in values.iter().enumerate() {
            out.push_str(&format!("{i},{v:?}\n"));
        }
        Some(out)
    }
}

/// Reads a config from a file path, or from the embedded presets when the
/// path has the form `preset/<name>`.
pub fn load_config(path: &str) -> Result<ExperimentConfig, CliError> {
    let text = match presets::lookup(path) {
        Some(text) => text.to_string(),
        None => std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {path}: {e}")))?,
    };
    ExperimentConfig::from_toml(&text).map_err(|e| CliError::Config(format!("{path}: {e}")))
}

/// Runs `cfg` on a pool of `workers` threads (all available cores when
/// `None`).
pub fn run_config(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunResult, CliError> {
    with_workers(workers, || {
        let outcome = experiments::execute(cfg)?;
        Ok(RunResult {
            document: Document {
                version: mixlimit::VERSION,
                experiment: cfg.experiment,
                seed: cfg.seed,
                pass: outcome.pass,
                config: cfg.clone(),
                results: outcome.results,
                notes: outcome.notes,
            },
            samples: outcome.samples,
        })
    })
}

/// Runs only the hypothesis diagnostics for the system and cocycle of `cfg`.
pub fn check_config(cfg: &ExperimentConfig, workers: Option<usize>) -> Result<RunResult, CliError> {
    let mut cfg = cfg.clone();
    cfg.experiment = ExperimentKind::HypothesisCheck;
    run_config(&cfg, workers)
}

fn with_workers<T: Send>(
    workers: Option<usize>,
    f: impl FnOnce() -> Result<T, CliError> + Send,
) -> Result<T, CliError> {
    match workers {
        None => f(),
        Some(0) => Err(CliError::Config("--workers must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::Diagnostic(format!("cannot start worker pool: {e}")))?
            .install(f),
    }
}

/// File stem for a config path: `preset/c02_dirac_dlt` gives `c02_dirac_dlt`.
pub fn report_stem(path: &str) -> String {
    Path::new(path).file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "report".into())
}

/// Writes `<stem>.json` and, when requested, `<stem>.samples.csv` into `dir`.
pub fn write_outputs(result: &RunResult, dir: &Path, stem: &str, dump_samples: bool) -> Result<Vec<PathBuf>, CliError> {
    let io = |e: std::io::Error| CliError::Config(format!("cannot write to {}: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut written = Vec::new();
    let json = dir.join(format!("{stem}.json"));
    std::fs::write(&json, result.document.to_json()).map_err(io)?;
    written.push(json);
    if dump_samples {
        if let Some(csv) = result.samples_csv() {
            let path = dir.join(format!("{stem}.samples.csv"));
            std::fs::write(&path, csv).map_err(io)?;
            written.push(path);
        }
    }
    Ok(written)
}
