//! Verification report structure shared by every suite.
//!
//! Reports are byte-deterministic for a fixed configuration and seed: the
//! config map is ordered, checks appear in registration order, and every
//! float that reaches a report is produced by a deterministic computation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Clone, Debug)]
pub struct CheckEntry {
    pub name: String,
    pub pass: bool,
    pub detail: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<String>,
}

#[derive(Serialize, Clone, Debug)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub suite: String,
    pub config: BTreeMap<String, String>,
    pub pass: bool,
    pub checks: Vec<CheckEntry>,
}

impl VerificationReport {
    pub fn new(suite: &str) -> Self {
        VerificationReport {
            schema_version: SCHEMA_VERSION,
            suite: suite.to_string(),
            config: BTreeMap::new(),
            pass: true,
            checks: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.insert(key.to_string(), value.to_string());
    }

    pub fn check(&mut self, name: &str, pass: bool, detail: impl ToString) {
        self.pass &= pass;
        self.checks.push(CheckEntry {
            name: name.to_string(),
            pass,
            detail: detail.to_string(),
            witness: None,
        });
    }

    pub fn check_witness(
        &mut self,
        name: &str,
        pass: bool,
        detail: impl ToString,
        witness: Option<String>,
    ) {
        self.pass &= pass;
        self.checks.push(CheckEntry {
            name: name.to_string(),
            pass,
            detail: detail.to_string(),
            witness: if pass { None } else { witness },
        });
    }

    /// Fold another report's checks into this one, prefixing their names.
    pub fn absorb(&mut self, prefix: &str, other: VerificationReport) {
        for (k, v) in other.config {
            self.config.entry(format!("{prefix}.{k}")).or_insert(v);
        }
        for mut c in other.checks {
            c.name = format!("{prefix}.{}", c.name);
            self.pass &= c.pass;
            self.checks.push(c);
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "suite: {}", self.suite);
        for (k, v) in &self.config {
            let _ = writeln!(s, "  {k} = {v}");
        }
        for c in &self.checks {
            let tag = if c.pass { "PASS" } else { "FAIL" };
            let _ = writeln!(s, "[{tag}] {}  {}", c.name, c.detail);
            if let Some(w) = &c.witness {
                let _ = writeln!(s, "       witness: {w}");
            }
        }
        let n_pass = self.checks.iter().filter(|c| c.pass).count();
        let _ = writeln!(
            s,
            "result: {} ({}/{} checks)",
            if self.pass { "PASS" } else { "FAIL" },
            n_pass,
            self.checks.len()
        );
        s
    }

    pub fn render(&self, json: bool) -> String {
        if json {
            self.to_json()
        } else {
            self.to_text()
        }
    }
}
