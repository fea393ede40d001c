//! Summaries, artifact files and the human-readable table.

use std::path::Path;

use selfshrink::verify::{Check, CheckSummary};
use serde_json::{json, Map, Value};

use crate::error::CliError;

pub struct Outcome {
    pub command: &'static str,
    pub config: Map<String, Value>,
    pub result: Value,
    pub summary: CheckSummary,
    pub files: Vec<(&'static str, Vec<u8>)>,
    pub error: Option<(&'static str, String)>,
}

impl Outcome {
    pub fn new(command: &'static str, config: Map<String, Value>) -> Self {
        Self {
            command,
            config,
            result: Value::Null,
            summary: CheckSummary::default(),
            files: Vec::new(),
            error: None,
        }
    }

    pub fn failed(mut self, kind: &'static str, err: impl std::fmt::Display) -> Self {
        self.error = Some((kind, err.to_string()));
        self
    }

    pub fn check(&mut self, check: Check) {
        self.summary.push(check);
    }

    pub fn file(&mut self, name: &'static str, bytes: Vec<u8>) {
        self.files.push((name, bytes));
    }

    pub fn exit_code(&self) -> i32 {
        if self.error.is_some() || !self.summary.all_pass() {
            1
        } else {
            0
        }
    }

    /// The JSON summary; object keys come out sorted.
    pub fn to_json(&self) -> String {
        let mut doc = json!({
            "command": self.command,
            "config": self.config,
        });
        match &self.error {
            Some((kind, message)) => {
                doc["error"] = json!({ "kind": kind, "message": message });
            }
            None => {
                doc["result"] = self.result.clone();
                doc["checks"] = serde_json::to_value(&self.summary.checks).expect("checks serialize");
            }
        }
        let mut text = serde_json::to_string_pretty(&doc).expect("summary serializes");
        text.push('\n');
        text
    }

    pub fn table(&self) -> String {
        let mut out = format!("selfshrink {}\n", self.command);
        if let Some((kind, message)) = &self.error {
            out.push_str(&format!("  ERROR ({kind}): {message}\n"));
            return out;
        }
        let width = self.summary.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &self.summary.checks {
            out.push_str(&format!(
                "  {}  {:<width$}  margin {:>+10.3e}  {}\n",
                if c.pass { "PASS" } else { "FAIL" },
                c.name,
                c.margin,
                c.citation,
            ));
        }
        let passed = self.summary.checks.iter().filter(|c| c.pass).count();
        out.push_str(&format!("{passed}/{} checks passed\n", self.summary.checks.len()));
        out
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let fail = |e: std::io::Error| CliError::module("output", format!("{}: {e}", dir.display()));
        std::fs::create_dir_all(dir).map_err(fail)?;
        std::fs::write(dir.join("summary.json"), self.to_json()).map_err(fail)?;
        for (name, bytes) in &self.files {
            std::fs::write(dir.join(name), bytes).map_err(fail)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_summary_serializes_to_empty_list() {
        assert_eq!(serde_json::to_string(&CheckSummary::default()).unwrap(), r#"{"checks":[]}"#);
        let outcome = Outcome::new("verify-all", Map::new());
        assert_eq!(outcome.exit_code(), 0);
        let doc: Value = serde_json::from_str(&outcome.to_json()).unwrap();
        assert_eq!(doc["checks"], json!([]));
    }

    #[test]
    fn failing_check_sets_exit_code() {
        let mut outcome = Outcome::new("geometry", Map::new());
        let check = |name: &str, pass: bool| Check {
            name: name.into(),
            pass,
            margin: if pass { 0.5 } else { -0.5 },
            citation: "c".into(),
            detail: String::new(),
        };
        outcome.check(check("a", true));
        assert_eq!(outcome.exit_code(), 0);
        outcome.check(check("b", false));
        assert_eq!(outcome.exit_code(), 1);
        assert!(outcome.table().contains("1/2 checks passed"));
    }

    #[test]
    fn error_record() {
        let outcome = Outcome::new("flow", Map::new()).failed("instability", "boom");
        assert_eq!(outcome.exit_code(), 1);
        let doc: Value = serde_json::from_str(&outcome.to_json()).unwrap();
        assert_eq!(doc["error"]["kind"], "instability");
        assert!(doc.get("checks").is_none());
    }
}
