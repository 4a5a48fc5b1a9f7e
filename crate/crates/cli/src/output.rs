//! In-memory experiment outputs, written only once a run has finished.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

use ottolab_core::io::{render_csv, render_json, render_jsonl, Header, Table};

#[derive(Clone, Debug)]
pub struct OutFile {
    pub path: PathBuf,
    pub text: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

impl Status {
    pub fn from_pass(pass: bool) -> Self {
        if pass {
            Status::Pass
        } else {
            Status::Fail
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
        }
    }
}

/// Files and results of one experiment.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub header: Header,
    pub pass: bool,
    pub results: serde_json::Value,
    pub files: Vec<OutFile>,
}

impl Outcome {
    pub fn new(header: Header) -> Self {
        Self { header, pass: true, results: serde_json::Value::Null, files: Vec::new() }
    }

    pub fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        let text = table.render(&self.header)?;
        self.files.push(OutFile { path: name.into(), text });
        Ok(())
    }

    pub fn csv(&mut self, name: &str, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let cols: Vec<String> = columns.iter().map(|c| c.to_string()).collect();
        let text = render_csv(&self.header, &cols, rows)?;
        self.files.push(OutFile { path: name.into(), text });
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, body: &T) -> Result<()> {
        let text = render_json(&self.header, body)?;
        self.files.push(OutFile { path: name.into(), text });
        Ok(())
    }

    pub fn jsonl<T: Serialize>(&mut self, name: &str, items: &[T]) -> Result<()> {
        let text = render_jsonl(&self.header, items)?;
        self.files.push(OutFile { path: name.into(), text });
        Ok(())
    }

    /// Moves all files under `dir`.
    pub fn nest(mut self, dir: &Path) -> Self {
        for f in &mut self.files {
            f.path = dir.join(&f.path);
        }
        self
    }
}

pub fn write_all(root: &Path, files: &[OutFile]) -> Result<()> {
    for f in files {
        let path = root.join(&f.path);
        ottolab_core::io::write_text(&path, &f.text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
