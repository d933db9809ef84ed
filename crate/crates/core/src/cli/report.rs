use std::fmt::Write as _;
use std::time::Instant;

use serde::Serialize;

use crate::brst::TruncationWindow;

/// Version of the machine-readable report layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Error,
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub id: String,
    pub status: Status,
    /// Main computed value, rendered.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<String>,
    /// Residuals, mismatches or the error message.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub detail: Vec<String>,
    pub elapsed_ms: u64,
}

/// Outcome of one check before timing is attached.
pub struct Outcome {
    pub pass: bool,
    pub value: Option<String>,
    pub detail: Vec<String>,
}

impl Outcome {
    pub fn pass(value: impl Into<Option<String>>) -> Self {
        Outcome { pass: true, value: value.into(), detail: Vec::new() }
    }

    pub fn from_detail(value: impl Into<Option<String>>, detail: Vec<String>) -> Self {
        Outcome { pass: detail.is_empty(), value: value.into(), detail }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<TruncationWindow>,
    pub checks: Vec<CheckResult>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        Report { schema_version: SCHEMA_VERSION, command: command.to_string(), window: None, checks: Vec::new() }
    }

    /// Runs one check; an error is recorded against this check only.
    pub fn run<E: std::fmt::Display>(&mut self, id: &str, f: impl FnOnce() -> Result<Outcome, E>) {
        let t = Instant::now();
        let r = f();
        let elapsed_ms = u64::try_from(t.elapsed().as_millis()).unwrap_or(u64::MAX);
        let check = match r {
            Ok(o) => CheckResult { id: id.to_string(), status: if o.pass { Status::Pass } else { Status::Fail }, value: o.value, detail: o.detail, elapsed_ms },
            Err(e) => CheckResult { id: id.to_string(), status: Status::Error, value: None, detail: vec![e.to_string()], elapsed_ms },
        };
        self.checks.push(check);
    }

    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.status == Status::Pass)
    }

    /// Checks sorted by id.
    pub fn finish(mut self) -> Self {
        self.checks.sort_by(|a, b| a.id.cmp(&b.id));
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_human(&self) -> String {
        let mut out = String::new();
        if let Some(w) = &self.window {
            let _ = writeln!(out, "window: max-kazhdan {}, max-depth {}, ghost {}..{}", w.max_kazhdan, w.max_conformal, w.ghost_min, w.ghost_max);
        }
        for c in &self.checks {
            let tag = match c.status {
                Status::Pass => "PASS ",
                Status::Fail => "FAIL ",
                Status::Error => "ERROR",
            };
            match &c.value {
                Some(v) => writeln!(out, "{} {}: {}", tag, c.id, v),
                None => writeln!(out, "{} {}", tag, c.id),
            }
            .expect("write to string");
            for d in &c.detail {
                let _ = writeln!(out, "      {}", d);
            }
        }
        let failed = self.checks.iter().filter(|c| c.status != Status::Pass).count();
        let _ = writeln!(out, "{}: {} checks, {} failed", self.command, self.checks.len(), failed);
        out
    }
}
