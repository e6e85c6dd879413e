use std::fmt::Display;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{Map, Value};
use tnbs_core::model_file::write_atomic;

/// Text report for the terminal plus a JSON sidecar. Only deterministic
/// values belong in the sidecar; timings go to the text alone.
pub struct Report {
    text: String,
    sidecar: Map<String, Value>,
}

impl Report {
    pub fn new(command: &str) -> Self {
        let mut sidecar = Map::new();
        sidecar.insert("command".into(), command.into());
        Self { text: format!("tnbs {command}\n"), sidecar }
    }

    pub fn heading(&mut self, title: &str) {
        self.text.push_str(&format!("\n{title}\n"));
    }

    pub fn line(&mut self, key: &str, value: impl Display) {
        self.text.push_str(&format!("  {key:<24} {value}\n"));
    }

    pub fn raw(&mut self, text: &str) {
        self.text.push_str(text);
        if !text.ends_with('\n') {
            self.text.push('\n');
        }
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.sidecar.insert(key.into(), v);
    }

    pub fn emit(self, sidecar: Option<&Path>) -> Result<()> {
        print!("{}", self.text);
        if let Some(path) = sidecar {
            let mut body = serde_json::to_string_pretty(&Value::Object(self.sidecar)).expect("sidecar serializes");
            body.push('\n');
            write_atomic(path, body.as_bytes()).with_context(|| format!("cannot write report {}", path.display()))?;
        }
        Ok(())
    }
}

pub fn list<T: Display>(xs: &[T]) -> String {
    xs.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}
