//! Machine-readable reports and their plain-text rendering.

use std::collections::BTreeMap;
use std::fmt::Write;

use invariance_core::checks::{Leg, FAIL_THRESHOLD};
use serde::Serialize;

use crate::scenario::Expectations;

pub const TOOL: &str = "invariance";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Version of the report layout; bumped on any incompatible change.
pub const REPORT_SCHEMA: u32 = 1;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_SCHEMA: i32 = 2;
pub const EXIT_EXECUTION: i32 = 3;

/// One leg aggregated over every transform it was evaluated under.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LegOut {
    pub pass: bool,
    /// Largest residual.
    pub residual: f64,
    /// Smallest residual; a FAIL expectation needs it above the fail threshold.
    pub min_residual: f64,
    pub tolerance: f64,
    pub samples: usize,
}

impl LegOut {
    pub fn new(residual: f64, tol: f64) -> Self {
        Self { pass: residual <= tol, residual, min_residual: residual, tolerance: tol, samples: 1 }
    }

    pub fn from_leg(leg: Leg, tol: f64) -> Self {
        Self { pass: leg.pass, ..Self::new(leg.residual, tol) }
    }

    /// A boolean outcome as a leg with residual 0 or 1.
    pub fn flag(ok: bool) -> Self {
        Self::new(if ok { 0.0 } else { 1.0 }, 0.5)
    }

    pub fn merge(&mut self, other: LegOut) {
        self.pass &= other.pass;
        self.residual = self.residual.max(other.residual);
        self.min_residual = self.min_residual.min(other.min_residual);
        self.tolerance = self.tolerance.min(other.tolerance);
        self.samples += other.samples;
    }

    /// PASS expectations need a passing leg, FAIL expectations a residual
    /// above the fail threshold under every transform.
    pub fn meets(&self, want_pass: bool) -> bool {
        if want_pass {
            self.pass
        } else {
            !self.pass && self.min_residual > FAIL_THRESHOLD
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Row {
    pub id: String,
    pub legs: BTreeMap<String, LegOut>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub expected: BTreeMap<String, bool>,
    #[serde(skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl Row {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into(), legs: BTreeMap::new(), expected: BTreeMap::new(), details: serde_json::Value::Null }
    }

    pub fn leg(mut self, name: &str, leg: LegOut) -> Self {
        self.add(name, leg);
        self
    }

    pub fn add(&mut self, name: &str, leg: LegOut) {
        match self.legs.get_mut(name) {
            Some(l) => l.merge(leg),
            None => {
                self.legs.insert(name.to_string(), leg);
            }
        }
    }

    pub fn details(mut self, d: impl Serialize) -> Self {
        self.details = serde_json::to_value(d).unwrap_or(serde_json::Value::Null);
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    SchemaError,
    ExecutionError,
}

impl Status {
    pub fn label(&self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::SchemaError => "SCHEMA-ERROR",
            Status::ExecutionError => "EXEC-ERROR",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub report_schema: u32,
    pub scenario: String,
    /// File name of the scenario, without directories.
    pub source: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    /// `sha256:` digest of the scenario bytes.
    pub input_digest: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    pub status: Status,
    pub expected_met: bool,
    pub mismatches: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub exit_code: i32,
    pub rows: Vec<Row>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
    /// Seconds since the Unix epoch.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<u64>,
}

impl Report {
    pub fn blank(scenario: &str, source: &str, digest: String) -> Self {
        Self {
            tool: TOOL,
            version: VERSION,
            report_schema: REPORT_SCHEMA,
            scenario: scenario.into(),
            source: source.into(),
            kind: None,
            input_digest: digest,
            tolerance: None,
            seed: None,
            points: None,
            status: Status::Pass,
            expected_met: true,
            mismatches: Vec::new(),
            error: None,
            exit_code: EXIT_OK,
            rows: Vec::new(),
            runtime_ms: None,
            timestamp: None,
        }
    }

    pub fn fail_with(mut self, status: Status, message: String) -> Self {
        self.exit_code = if status == Status::SchemaError { EXIT_SCHEMA } else { EXIT_EXECUTION };
        self.status = status;
        self.expected_met = false;
        self.error = Some(message);
        self
    }

    /// Attach expectations, set status and exit code.
    pub fn finish(mut self, rows: Vec<Row>, expect: &Expectations, strict: bool) -> Self {
        let mut mismatches = Vec::new();
        let mut rows = rows;
        for (id, legs) in expect {
            let Some(row) = rows.iter_mut().find(|r| &r.id == id) else {
                mismatches.push(format!("{id}: no such row"));
                continue;
            };
            for (leg, want) in legs {
                row.expected.insert(leg.clone(), *want);
                match row.legs.get(leg) {
                    None => mismatches.push(format!("{id}.{leg}: no such leg")),
                    Some(l) if !l.meets(*want) => mismatches.push(format!(
                        "{id}.{leg}: expected {}, found {} (residual {:e})",
                        verdict(*want),
                        verdict(l.pass),
                        l.residual
                    )),
                    _ => {}
                }
            }
        }
        let all_pass = rows.iter().all(|r| r.legs.values().all(|l| l.pass));
        self.status = if all_pass { Status::Pass } else { Status::Fail };
        self.expected_met = mismatches.is_empty();
        self.exit_code = if !self.expected_met || (strict && !all_pass) { EXIT_MISMATCH } else { EXIT_OK };
        self.mismatches = mismatches;
        self.rows = rows;
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "scenario {} [{}]  status {}  expected {}  exit {}",
            self.scenario,
            self.kind.as_deref().unwrap_or("-"),
            self.status.label(),
            if self.expected_met { "met" } else { "NOT MET" },
            self.exit_code
        );
        if let Some(e) = &self.error {
            let _ = writeln!(out, "  error: {e}");
            return out;
        }
        let id_w = self.rows.iter().map(|r| r.id.len()).max().unwrap_or(3).max(3);
        let leg_w = self.rows.iter().flat_map(|r| r.legs.keys().map(String::len)).max().unwrap_or(3).max(3);
        let _ = writeln!(out, "  {:id_w$}  {:leg_w$}  {:7}  {:>10}  {:>9}  expected", "row", "leg", "verdict", "residual", "tol");
        for r in &self.rows {
            for (name, l) in &r.legs {
                let want = r.expected.get(name).map_or("-", |w| verdict(*w));
                let _ = writeln!(
                    out,
                    "  {:id_w$}  {:leg_w$}  {:7}  {:>10.3e}  {:>9.1e}  {want}",
                    r.id,
                    name,
                    verdict(l.pass),
                    l.residual,
                    l.tolerance
                );
            }
        }
        for m in &self.mismatches {
            let _ = writeln!(out, "  mismatch: {m}");
        }
        out
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

/// One line per report plus a totals line.
pub fn summary(reports: &[Report]) -> String {
    let w = reports.iter().map(|r| r.scenario.len()).max().unwrap_or(8).max(8);
    let mut out = String::new();
    let _ = writeln!(out, "{:w$}  {:15}  {:12}  {:8}  exit", "scenario", "kind", "status", "expected");
    for r in reports {
        let _ = writeln!(
            out,
            "{:w$}  {:15}  {:12}  {:8}  {}",
            r.scenario,
            r.kind.as_deref().unwrap_or("-"),
            r.status.label(),
            if r.expected_met { "met" } else { "NOT MET" },
            r.exit_code
        );
    }
    let count = |s: Status| reports.iter().filter(|r| r.status == s).count();
    let _ = writeln!(
        out,
        "{} scenarios: {} pass, {} fail, {} schema errors, {} execution errors, {} expectation mismatches; exit {}",
        reports.len(),
        count(Status::Pass),
        count(Status::Fail),
        count(Status::SchemaError),
        count(Status::ExecutionError),
        reports.iter().filter(|r| !r.expected_met).count(),
        aggregate_exit(reports)
    );
    out
}

/// Largest per-scenario exit code; 0 for an empty suite.
pub fn aggregate_exit(reports: &[Report]) -> i32 {
    reports.iter().map(|r| r.exit_code).max().unwrap_or(EXIT_OK)
}
