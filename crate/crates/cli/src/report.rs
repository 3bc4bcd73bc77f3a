//! Artifacts: CSV tables, JSON reports and checks.
//!
//! Everything written here is a pure function of the config and seed.
//! Wall-clock time goes to a separate `<command>.timing.json` so that the
//! other files can be compared byte for byte across runs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use jlab_core::rational_map::MapSpec;
use serde::Serialize;

use crate::CliError;

/// One pass/fail line of a report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// Human-readable acceptance condition, including its tolerance.
    pub condition: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, value: f64, condition: impl Into<String>) -> Self {
        Self {
            name: name.to_string(),
            passed,
            value,
            condition: condition.into(),
        }
    }

    /// `value <= bound`.
    pub fn at_most(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, value, format!("<= {bound}"))
    }

    /// `value >= bound`.
    pub fn at_least(name: &str, value: f64, bound: f64) -> Self {
        Self::new(name, value >= bound, value, format!(">= {bound}"))
    }
}

#[derive(Debug, Serialize)]
pub struct ExperimentReport<R: Serialize> {
    pub command: &'static str,
    pub name: String,
    pub jlab_version: &'static str,
    pub seed: u64,
    pub map: MapSpec,
    pub results: R,
    pub checks: Vec<Check>,
    pub passed: bool,
}

#[derive(Serialize)]
struct Timing<'a> {
    command: &'a str,
    wall_clock_seconds: f64,
}

pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<PathBuf>,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl ArtifactDir {
    pub fn create(root: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&root).map_err(|e| io_error(&root, e))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    fn path(&mut self, file: &str) -> PathBuf {
        let p = self.root.join(file);
        self.written.push(p.clone());
        p
    }

    /// Serializes `rows` under the header derived from `T`'s field names.
    pub fn csv<T: Serialize>(&mut self, file: &str, rows: impl IntoIterator<Item = T>) -> Result<(), CliError> {
        let path = self.path(file);
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|e| io_error(&path, e))?;
        for row in rows {
            w.serialize(row).map_err(|e| io_error(&path, e))?;
        }
        w.flush().map_err(|e| io_error(&path, e))
    }

    pub fn json<T: Serialize>(&mut self, file: &str, value: &T) -> Result<(), CliError> {
        let path = self.path(file);
        let f = File::create(&path).map_err(|e| io_error(&path, e))?;
        let mut w = BufWriter::new(f);
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_error(&path, e))?;
        w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| io_error(&path, e))
    }

    pub fn timing(&mut self, command: &str, seconds: f64) -> Result<(), CliError> {
        let path = self.root.join(format!("{command}.timing.json"));
        let text = serde_json::to_string_pretty(&Timing {
            command,
            wall_clock_seconds: seconds,
        })
        .map_err(|e| io_error(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io_error(&path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Row {
        re: f64,
        im: f64,
    }

    #[test]
    fn csv_uses_lf_and_field_headers() {
        let dir = tempfile::tempdir().unwrap();
        let mut out = ArtifactDir::create(dir.path().join("nested")).unwrap();
        out.csv("pts.csv", [Row { re: 0.5, im: -1.0 }, Row { re: 1e-20, im: 2.0 }])
            .unwrap();
        let text = std::fs::read_to_string(out.root().join("pts.csv")).unwrap();
        assert_eq!(text, "re,im\n0.5,-1.0\n1e-20,2.0\n");
        assert_eq!(out.written().len(), 1);
    }

    #[test]
    fn checks_compare_against_bounds() {
        assert!(Check::at_most("a", 0.1, 0.1).passed);
        assert!(!Check::at_least("b", 0.89, 0.9).passed);
    }
}
