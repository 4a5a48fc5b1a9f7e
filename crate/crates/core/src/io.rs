//! CSV and JSON output with a provenance header.
//!
//! Floats are written with 17 significant digits so that every value
//! round-trips exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Header {
    pub format_version: u32,
    pub command: String,
    pub param_hash: String,
}

impl Header {
    pub fn new(command: &str, param_hash: &str) -> Self {
        Self { format_version: FORMAT_VERSION, command: command.to_string(), param_hash: param_hash.to_string() }
    }

    fn comment_lines(&self) -> String {
        format!(
            "# format_version={}\n# command={}\n# param_hash={}\n",
            self.format_version, self.command, self.param_hash
        )
    }
}

/// Numeric table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn io_err(e: impl std::fmt::Display) -> Error {
    Error::InvalidInput(format!("i/o failure: {e}"))
}

/// Renders header comments, column names and string rows.
pub fn render_csv(header: &Header, columns: &[String], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(columns).map_err(io_err)?;
    for r in rows {
        w.write_record(r).map_err(io_err)?;
    }
    let body = String::from_utf8(w.into_inner().map_err(io_err)?).map_err(io_err)?;
    Ok(header.comment_lines() + &body)
}

impl Table {
    pub fn render(&self, header: &Header) -> Result<String> {
        let rows: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(|&v| fmt_f64(v)).collect()).collect();
        render_csv(header, &self.columns, &rows)
    }

    pub fn write(&self, path: &Path, header: &Header) -> Result<()> {
        write_text(path, &self.render(header)?)
    }
}

/// Pretty JSON object with the header as its first field.
pub fn render_json<T: Serialize>(header: &Header, body: &T) -> Result<String> {
    let mut map = serde_json::Map::new();
    map.insert("header".into(), serde_json::to_value(header).map_err(io_err)?);
    match serde_json::to_value(body).map_err(io_err)? {
        serde_json::Value::Object(m) => map.extend(m),
        other => {
            map.insert("data".into(), other);
        }
    }
    let mut s = serde_json::to_string_pretty(&serde_json::Value::Object(map)).map_err(io_err)?;
    s.push('\n');
    Ok(s)
}

/// JSON lines; the first line is `{"header": …}`.
pub fn render_jsonl<T: Serialize>(header: &Header, items: &[T]) -> Result<String> {
    let mut s = serde_json::to_string(&serde_json::json!({ "header": header })).map_err(io_err)?;
    s.push('\n');
    for it in items {
        s.push_str(&serde_json::to_string(it).map_err(io_err)?);
        s.push('\n');
    }
    Ok(s)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err)?;
    }
    let mut f = fs::File::create(path).map_err(io_err)?;
    f.write_all(text.as_bytes()).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_roundtrip() {
        for &x in &[0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn csv_has_header_and_newlines() {
        let t = Table { columns: vec!["a".into(), "b".into()], rows: vec![vec![1.0, 2.0]] };
        let s = t.render(&Header::new("finite-flow", "abc")).unwrap();
        assert!(s.starts_with("# format_version=1\n# command=finite-flow\n# param_hash=abc\na,b\n"));
        assert!(!s.contains('\r'));
    }

    #[test]
    fn json_header_first() {
        #[derive(Serialize)]
        struct B {
            x: f64,
        }
        let s = render_json(&Header::new("c", "h"), &B { x: 1.0 }).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["header"]["command"], "c");
        assert_eq!(v["x"], 1.0);
    }
}
