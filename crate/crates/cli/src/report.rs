//! Report files and their human-readable summaries.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use polyhardy::io::sci;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Version tag written into every report.
pub const REPORT_SCHEMA: &str = "polyhardy-report/1";

/// One residual and the tolerance it is judged against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LedgerEntry {
    #[serde(serialize_with = "sci::f64")]
    pub value: f64,
    #[serde(serialize_with = "sci::f64")]
    pub tol: f64,
}

impl LedgerEntry {
    /// Non-finite values are stored as `f64::MAX` so they always fail.
    pub fn new(value: f64, tol: f64) -> Self {
        let value = if value.is_finite() { value } else { f64::MAX };
        LedgerEntry { value, tol }
    }

    pub fn ok(&self) -> bool {
        self.value <= self.tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// A precondition or structure check stopped the run.
    Error,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TolSource {
    Flag,
    Scenario,
    Env,
    Default,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(serialize_with = "sci::f64")]
    pub tol: f64,
    pub source: TolSource,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timings {
    pub total_seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema: String,
    pub tool_version: String,
    pub scenario: String,
    pub kind: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub exit_code: i32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub tolerances: Tolerances,
    pub ledger: BTreeMap<String, LedgerEntry>,
    pub outputs: BTreeMap<String, Value>,
    pub timings: Timings,
}

impl Report {
    pub fn failing(&self) -> Vec<&str> {
        self.ledger.iter().filter(|(_, e)| !e.ok()).map(|(k, _)| k.as_str()).collect()
    }
}

pub fn verdict_word(v: Verdict) -> &'static str {
    match v {
        Verdict::Pass => "PASS",
        Verdict::Fail => "FAIL",
        Verdict::Error => "ERROR",
    }
}

fn source_word(s: TolSource) -> &'static str {
    match s {
        TolSource::Flag => "flag",
        TolSource::Scenario => "scenario",
        TolSource::Env => "env",
        TolSource::Default => "default",
    }
}

pub fn format_report(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} ({}): {} in {:.2} s, tol {:.1e} ({}), seed {}",
        r.scenario,
        r.kind,
        verdict_word(r.verdict),
        r.timings.total_seconds,
        r.tolerances.tol,
        source_word(r.tolerances.source),
        r.seed
    );
    if let Some(e) = &r.error {
        let _ = writeln!(s, "  error: {e}");
    }
    let width = r.ledger.keys().map(|k| k.len()).max().unwrap_or(0);
    for (name, e) in &r.ledger {
        let mark = if e.ok() { "ok" } else { "FAIL" };
        let _ = writeln!(s, "  {name:<width$}  {:>10.3e}  <= {:>9.2e}  {mark}", e.value, e.tol);
    }
    s
}
