//! Scenario runner for the polyhardy toolkit.
//!
//! A scenario file names a construction or verification and its parameters;
//! running it produces a [`Report`] with a residual ledger. The verdict is
//! `pass` exactly when every residual is within its tolerance.
//!
//! Exit codes: 0 pass, 1 fail, 2 precondition or structure violation, 3 I/O or
//! parse error.

use std::path::{Path, PathBuf};
use std::time::Instant;

use thiserror::Error;

pub mod kinds;
pub mod report;
pub mod scenario;

pub use report::{format_report, LedgerEntry, Report, TolSource, Tolerances, Verdict, REPORT_SCHEMA};
pub use scenario::{Params, Scenario, KINDS};

/// Environment variable overriding the default tolerance.
pub const TOL_ENV: &str = "POLYHARDY_TOL";

/// Seed used when neither the scenario nor the caller gives one.
pub const DEFAULT_SEED: u64 = 0;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Core(#[from] polyhardy::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Parse(_) => 3,
            CliError::Core(polyhardy::Error::Serialization(_)) => 3,
            CliError::Core(_) => 2,
        }
    }

    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }
}

/// Caller-side overrides. `tol` beats the scenario's own value, which beats
/// `env_tol`, which beats the kind's default.
#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub env_tol: Option<f64>,
}

fn check_tol(t: f64, what: &str) -> Result<f64, CliError> {
    if t.is_finite() && t > 0.0 {
        Ok(t)
    } else {
        Err(CliError::Parse(format!("{what} must be a positive real, got {t}")))
    }
}

/// Reads `POLYHARDY_TOL`; unset or empty means no override.
pub fn env_tol() -> Result<Option<f64>, CliError> {
    match std::env::var(TOL_ENV) {
        Ok(v) if !v.trim().is_empty() => {
            let t: f64 = v.trim().parse().map_err(|_| CliError::Parse(format!("{TOL_ENV}={v:?} is not a number")))?;
            Ok(Some(check_tol(t, TOL_ENV)?))
        }
        _ => Ok(None),
    }
}

pub fn resolve_tol(params: &Params, opts: &RunOptions) -> Result<Tolerances, CliError> {
    let (tol, source) = if let Some(t) = opts.tol {
        (t, TolSource::Flag)
    } else if let Some(t) = params.common().tol {
        (t, TolSource::Scenario)
    } else if let Some(t) = opts.env_tol {
        (t, TolSource::Env)
    } else {
        (params.default_tol(), TolSource::Default)
    };
    Ok(Tolerances { tol: check_tol(tol, "tolerance")?, source })
}

/// Runs a parsed scenario. Precondition failures inside the computation
/// become a report with verdict `error`; only parameter problems are `Err`.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<Report, CliError> {
    let tolerances = resolve_tol(&sc.params, opts)?;
    let seed = opts.seed.or(sc.params.common().seed).unwrap_or(DEFAULT_SEED);
    let start = Instant::now();
    let result = kinds::execute(&sc.params, kinds::Ctx { tol: tolerances.tol, seed });
    let total_seconds = start.elapsed().as_secs_f64();
    let (verdict, exit_code, error, ledger, outputs) = match result {
        Ok(out) => {
            let pass = out.ledger.values().all(LedgerEntry::ok);
            let (v, c) = if pass { (Verdict::Pass, 0) } else { (Verdict::Fail, 1) };
            (v, c, None, out.ledger, out.outputs)
        }
        Err(e @ CliError::Core(_)) if e.exit_code() == 2 => {
            (Verdict::Error, 2, Some(e.to_string()), Default::default(), Default::default())
        }
        Err(e) => return Err(e),
    };
    Ok(Report {
        schema: REPORT_SCHEMA.to_string(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        scenario: sc.name.clone(),
        kind: sc.params.kind().to_string(),
        seed,
        verdict,
        exit_code,
        error,
        tolerances,
        ledger,
        outputs,
        timings: report::Timings { total_seconds },
    })
}

pub fn load(path: &Path) -> Result<Scenario, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    Scenario::parse(&text)
}

pub fn run(path: &Path, opts: &RunOptions) -> Result<Report, CliError> {
    run_scenario(&load(path)?, opts)
}

pub fn write_report(report: &Report, path: &Path) -> Result<(), CliError> {
    let text = polyhardy::io::to_json(report)?;
    std::fs::write(path, text + "\n").map_err(|e| CliError::io(path, e))
}

/// One line of a suite summary.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SuiteRow {
    pub file: String,
    pub scenario: String,
    pub kind: String,
    pub verdict: Verdict,
    pub exit_code: i32,
    pub seconds: f64,
    /// Failing ledger entries, or the error message.
    pub detail: String,
    #[serde(skip)]
    pub report: Option<Report>,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct SuiteSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub exit_code: i32,
    pub rows: Vec<SuiteRow>,
}

/// `*.json` files of `dir`, sorted by name.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| CliError::io(dir, e))? {
        let p = entry.map_err(|e| CliError::io(dir, e))?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == "json") {
            files.push(p);
        }
    }
    files.sort();
    Ok(files)
}

fn suite_row(path: &Path, opts: &RunOptions) -> SuiteRow {
    let file = path.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default();
    match run(path, opts) {
        Ok(r) => SuiteRow {
            file,
            scenario: r.scenario.clone(),
            kind: r.kind.clone(),
            verdict: r.verdict,
            exit_code: r.exit_code,
            seconds: r.timings.total_seconds,
            detail: r.error.clone().unwrap_or_else(|| r.failing().join(", ")),
            report: Some(r),
        },
        Err(e) => SuiteRow {
            file,
            scenario: String::new(),
            kind: String::new(),
            verdict: Verdict::Error,
            exit_code: e.exit_code(),
            seconds: 0.0,
            detail: e.to_string(),
            report: None,
        },
    }
}

/// Runs every scenario of `dir` (concurrently with the `parallel` feature).
/// With `out`, each report is written to `<out>/<file stem>.report.json`.
pub fn suite(dir: &Path, opts: &RunOptions, out: Option<&Path>) -> Result<SuiteSummary, CliError> {
    let files = scenario_files(dir)?;
    let rows = polyhardy::par::map_slice(&files, |p| suite_row(p, opts));
    if let Some(out) = out {
        std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
        for (p, row) in files.iter().zip(&rows) {
            if let Some(r) = &row.report {
                let stem = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                write_report(r, &out.join(format!("{stem}.report.json")))?;
            }
        }
    }
    let passed = rows.iter().filter(|r| r.verdict == Verdict::Pass).count();
    let failed = rows.iter().filter(|r| r.verdict == Verdict::Fail).count();
    let errors = rows.len() - passed - failed;
    let exit_code = rows.iter().map(|r| r.exit_code).max().unwrap_or(0);
    Ok(SuiteSummary { total: rows.len(), passed, failed, errors, exit_code, rows })
}

pub fn format_summary(s: &SuiteSummary) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let w = s.rows.iter().map(|r| r.file.len()).max().unwrap_or(4).max(4);
    let _ = writeln!(out, "{:<w$}  {:<18}  {:<6}  {:>8}  detail", "file", "kind", "result", "seconds");
    for r in &s.rows {
        let _ = writeln!(
            out,
            "{:<w$}  {:<18}  {:<6}  {:>8.2}  {}",
            r.file,
            r.kind,
            report::verdict_word(r.verdict),
            r.seconds,
            r.detail
        );
    }
    let _ = writeln!(
        out,
        "{} scenarios: {} passed, {} failed, {} errors",
        s.total, s.passed, s.failed, s.errors
    );
    out
}
