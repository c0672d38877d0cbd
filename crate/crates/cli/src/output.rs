//! Output formats and the header stamped on every artifact.

use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use uict_core::TOOL_VERSION;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

impl Format {
    pub fn name(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
            Format::Text => "text",
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool_version: &'static str,
    pub command: &'static str,
    /// `None` for commands that draw no random numbers.
    pub seed: Option<u64>,
    pub config: Map<String, Value>,
}

impl Header {
    pub fn new(command: &'static str, seed: Option<u64>, config: Map<String, Value>) -> Self {
        Self {
            tool_version: TOOL_VERSION,
            command,
            seed,
            config,
        }
    }

    /// `#`-prefixed comment lines for CSV and text artifacts.
    pub fn comment_lines(&self) -> String {
        let seed = self.seed.map_or("none".to_owned(), |s| s.to_string());
        format!(
            "# {}\n# command {}\n# seed {}\n# config {}\n",
            self.tool_version,
            self.command,
            seed,
            Value::Object(self.config.clone())
        )
    }

    /// JSON document `{"header": ..., <body fields>}`.
    pub fn wrap_json(&self, body: Value) -> String {
        let mut doc = Map::new();
        doc.insert("header".into(), serde_json::to_value(self).expect("header serialises"));
        match body {
            Value::Object(fields) => doc.extend(fields),
            other => {
                doc.insert("data".into(), other);
            }
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("json serialises");
        s.push('\n');
        s
    }
}

/// Where the artifact goes: a file from `--out`, or stdout.
pub struct Sink(pub Option<PathBuf>);

impl Sink {
    pub fn emit(&self, text: &str) -> Result<(), CliError> {
        match &self.0 {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| CliError::Failure(anyhow::anyhow!("cannot write {}: {e}", path.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| CliError::Failure(e.into()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_forms() {
        let mut config = Map::new();
        config.insert("t".into(), 100.into());
        let h = Header::new("sample-path", Some(42), config);
        let lines = h.comment_lines();
        assert!(lines.starts_with(&format!("# {TOOL_VERSION}\n")));
        assert!(lines.contains("# seed 42\n"));
        assert!(lines.contains(r#"# config {"t":100}"#));

        let doc: Value = serde_json::from_str(&h.wrap_json(serde_json::json!({"value": 1.5}))).unwrap();
        assert_eq!(doc["header"]["seed"], 42);
        assert_eq!(doc["header"]["config"]["t"], 100);
        assert_eq!(doc["value"], 1.5);
    }
}
