//! Output artifacts. Nothing touches the disk until every artifact of a run
//! has been produced, so failed runs leave no files behind.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const TOOL: &str = "schottkydim";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Header {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
}

impl Header {
    /// The hash covers the command and the effective config (file contents
    /// after flag overrides), serialized with sorted keys.
    pub fn new(command: &str, config: &Value, seed: u64) -> Self {
        let canonical = serde_json::to_string(&json!({ "command": command, "config": config })).expect("values serialize");
        let config_hash = hex::encode(Sha256::digest(canonical.as_bytes()));
        Self { tool: TOOL, version: VERSION, command: command.into(), config_hash, seed }
    }

    fn csv_lines(&self) -> String {
        format!("# {} {}\n# command {}\n# config_sha256 {}\n# seed {}\n", self.tool, self.version, self.command, self.config_hash, self.seed)
    }
}

/// Round-trip formatting with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

pub struct Csv {
    columns: Vec<String>,
    notes: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Csv {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| (*c).to_string()).collect(), notes: Vec::new(), rows: Vec::new() }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self { columns, notes: Vec::new(), rows: Vec::new() }
    }

    /// An extra `# key value` line after the header block.
    pub fn note(&mut self, key: &str, value: impl std::fmt::Display) {
        self.notes.push(format!("# {key} {value}"));
    }

    pub fn row(&mut self, cells: Vec<String>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }

    fn render(&self, header: &Header) -> String {
        let mut s = header.csv_lines();
        for n in &self.notes {
            s.push_str(n);
            s.push('\n');
        }
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

pub enum Body {
    Json(Value),
    Csv(Csv),
}

pub struct Artifact {
    /// Appended to the output prefix, e.g. `.json` or `_depth.csv`.
    pub suffix: &'static str,
    pub body: Body,
}

pub fn json_artifact<T: Serialize>(suffix: &'static str, result: &T) -> Artifact {
    Artifact { suffix, body: Body::Json(serde_json::to_value(result).expect("results serialize")) }
}

pub fn csv_artifact(suffix: &'static str, csv: Csv) -> Artifact {
    Artifact { suffix, body: Body::Csv(csv) }
}

fn render(a: &Artifact, header: &Header, runtime_ms: Option<u128>) -> String {
    match &a.body {
        Body::Json(v) => {
            let mut h = serde_json::to_value(header).expect("header serializes");
            if let Some(ms) = runtime_ms {
                h["runtime_ms"] = json!(ms);
            }
            let mut s = serde_json::to_string_pretty(&json!({ "header": h, "result": v })).expect("values serialize");
            s.push('\n');
            s
        }
        Body::Csv(c) => c.render(header),
    }
}

pub fn path_for(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

pub fn write_all(prefix: &Path, header: &Header, artifacts: &[Artifact], runtime_ms: Option<u128>) -> Result<Vec<PathBuf>, CliError> {
    let rendered: Vec<(PathBuf, String)> = artifacts.iter().map(|a| (path_for(prefix, a.suffix), render(a, header, runtime_ms))).collect();
    if let Some(dir) = prefix.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    for (p, s) in &rendered {
        fs::write(p, s)?;
    }
    Ok(rendered.into_iter().map(|(p, _)| p).collect())
}
