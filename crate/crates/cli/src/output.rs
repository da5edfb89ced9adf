//! CSV/JSON emission and run manifests.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct Csv {
    lines: Vec<String>,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let header: Vec<&str> = header.iter().map(|s| s.as_ref()).collect();
        Self {
            lines: vec![header.join(",")],
        }
    }

    pub fn row(&mut self, cells: impl IntoIterator<Item = String>) {
        self.lines.push(cells.into_iter().collect::<Vec<_>>().join(","));
    }

    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        s.push('\n');
        s
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: &'static str,
    pub master_seed: Option<u64>,
    /// Inputs after defaults were applied.
    pub config: Value,
    /// The experiment file as given, when there was one.
    pub config_text: Option<String>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, master_seed: Option<u64>, config: Value, config_text: Option<String>) -> Self {
        Self {
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION"),
            master_seed,
            config,
            config_text,
            outputs: Vec::new(),
        }
    }
}

/// Collects artifacts for one run and writes them together with manifest.json.
pub struct Artifacts {
    dir: Option<PathBuf>,
    files: Vec<(String, String)>,
}

impl Artifacts {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self { dir, files: Vec::new() }
    }

    pub fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    /// Records the paths the run will write, before the documents embedding
    /// the manifest are rendered.
    pub fn plan(&self, manifest: &mut Manifest, names: &[&str]) {
        if let Some(d) = &self.dir {
            manifest.outputs = names
                .iter()
                .chain(&["manifest.json"])
                .map(|n| d.join(n).display().to_string())
                .collect();
        }
    }

    /// Writes everything, or prints to stdout when no directory was given.
    pub fn finish(self, manifest: &Manifest, wall_time: f64) -> Result<(), CliError> {
        let Some(dir) = &self.dir else {
            for (_, contents) in &self.files {
                print!("{contents}");
            }
            return Ok(());
        };
        fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        for (name, contents) in &self.files {
            let path = dir.join(name);
            fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        }
        let mut value = serde_json::to_value(manifest).map_err(|e| CliError::Numeric(e.to_string()))?;
        value["wall_time_seconds"] = json!(wall_time);
        let path = dir.join("manifest.json");
        fs::write(&path, pretty(&value)?).map_err(|e| io_error(&path, e))?;
        for (name, _) in &self.files {
            eprintln!("wrote {}", dir.join(name).display());
        }
        Ok(())
    }
}

pub fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

pub fn pretty<T: Serialize>(value: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Numeric(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// {"manifest", "results", "analytic_reference"}.
pub fn document(manifest: &Manifest, results: Value, analytic: Value) -> Result<String, CliError> {
    pretty(&json!({
        "manifest": manifest,
        "results": results,
        "analytic_reference": analytic,
    }))
}
