//! CSV tables and JSON summaries.
//!
//! Floats are written with Rust's shortest round-trip formatting, so equal
//! inputs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

/// A cell of a CSV row.
pub enum Cell {
    Int(usize),
    Float(f64),
    Text(String),
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

fn fmt_cell(c: &Cell) -> String {
    match c {
        Cell::Int(v) => v.to_string(),
        Cell::Float(v) => format_float(*v),
        Cell::Text(s) => s.clone(),
    }
}

pub fn format_float(v: f64) -> String {
    if v == 0.0 {
        // folds -0 into 0
        "0".into()
    } else {
        format!("{v:e}")
    }
}

pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Self {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Header, rows, then one `# key=value` line per metadata entry.
    pub fn render(&self, meta: &[(String, String)]) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(fmt_cell).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        for (k, v) in meta {
            let _ = writeln!(s, "# {k}={v}");
        }
        s
    }
}

/// A sequence of nodal vectors as rows, readable back as a control file.
pub fn render_field(seq: &[Vec<f64>], meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for row in seq {
        let cells: Vec<String> = row.iter().map(|v| format_float(*v)).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    for (k, v) in meta {
        let _ = writeln!(s, "# {k}={v}");
    }
    s
}

/// Output directory plus the list of files written so far.
pub struct Sink {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Sink {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)?;
        self.written.push(path);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::from)?;
        text.push('\n');
        self.write(name, &text)
    }
}
