//! Versioned CSV tables.
//!
//! Every file opens with `#`-prefixed metadata lines (schema, config hash,
//! criterion version, software version) followed by one header row. Floats
//! are written with 17 significant digits so that they parse back to the
//! same `f64`.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};

/// One field of a row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Cell<'a> {
    Int(i64),
    UInt(u64),
    Float(f64),
    Text(&'a str),
    Bool(bool),
    Empty,
}

impl From<i64> for Cell<'_> {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<u64> for Cell<'_> {
    fn from(v: u64) -> Self {
        Cell::UInt(v)
    }
}

impl From<usize> for Cell<'_> {
    fn from(v: usize) -> Self {
        Cell::UInt(v as u64)
    }
}

impl From<f64> for Cell<'_> {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell<'_> {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl<'a> From<&'a str> for Cell<'a> {
    fn from(v: &'a str) -> Self {
        Cell::Text(v)
    }
}

impl<'a, T: Into<Cell<'a>>> From<Option<T>> for Cell<'a> {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

/// `f64` with 17 significant digits; non-finite values as `nan`, `inf`, `-inf`.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

/// Metadata carried by every table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TableMeta {
    pub config_hash: String,
    pub criterion_version: String,
}

pub struct Table {
    text: String,
    width: usize,
}

impl Table {
    pub fn new(schema: &str, meta: &TableMeta, columns: &[&str]) -> Self {
        let mut text = String::new();
        let _ = writeln!(text, "# schema: {schema}");
        let _ = writeln!(text, "# config_hash: {}", meta.config_hash);
        let _ = writeln!(text, "# criterion_version: {}", meta.criterion_version);
        let _ = writeln!(text, "# software: sympatric-harness {}", env!("CARGO_PKG_VERSION"));
        text.push_str(&columns.join(","));
        text.push('\n');
        Self {
            text,
            width: columns.len(),
        }
    }

    pub fn row(&mut self, cells: &[Cell<'_>]) {
        assert_eq!(cells.len(), self.width, "row width differs from the header");
        for (i, c) in cells.iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match *c {
                Cell::Int(v) => {
                    let _ = write!(self.text, "{v}");
                }
                Cell::UInt(v) => {
                    let _ = write!(self.text, "{v}");
                }
                Cell::Float(v) => self.text.push_str(&format_float(v)),
                Cell::Text(s) => {
                    assert!(!s.contains([',', '\n', '"']), "text cells must not need quoting");
                    self.text.push_str(s);
                }
                Cell::Bool(v) => self.text.push_str(if v { "true" } else { "false" }),
                Cell::Empty => {}
            }
        }
        self.text.push('\n');
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, &self.text).with_context(|| format!("writing {}", path.display()))
    }
}

/// A table read back from disk: metadata pairs, column names and rows of
/// raw fields.
#[derive(Debug, Clone)]
pub struct ParsedTable {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedTable {
    pub fn parse(text: &str) -> Result<Self> {
        let mut meta = Vec::new();
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = loop {
            let Some(line) = lines.next() else { bail!("no header row") };
            if let Some(rest) = line.strip_prefix('#') {
                if let Some((k, v)) = rest.split_once(':') {
                    meta.push((k.trim().to_string(), v.trim().to_string()));
                }
            } else {
                break line;
            }
        };
        let columns: Vec<String> = header.split(',').map(str::to_string).collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(str::to_string).collect();
            if row.len() != columns.len() {
                bail!("row {} has {} fields, header has {}", n + 1, row.len(), columns.len());
            }
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// First of `names` present in the header.
    pub fn column_any(&self, names: &[&str]) -> Result<usize> {
        names
            .iter()
            .find_map(|n| self.column(n))
            .with_context(|| format!("none of the columns {names:?} is present"))
    }

    /// Numeric values of column `i`; empty fields become `None`.
    pub fn floats(&self, i: usize) -> Result<Vec<Option<f64>>> {
        self.rows
            .iter()
            .map(|r| {
                let f = r[i].trim();
                if f.is_empty() {
                    Ok(None)
                } else {
                    f.parse::<f64>()
                        .map(Some)
                        .with_context(|| format!("column {} holds non-numeric {f:?}", self.columns[i]))
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> TableMeta {
        TableMeta {
            config_hash: "abc".into(),
            criterion_version: "v".into(),
        }
    }

    #[test]
    fn floats_round_trip_exactly() {
        for v in [0.1, 1.0 / 3.0, 6e-5, 2.0f64.powi(-1060), f64::MAX, -1234.5678e10] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn written_tables_parse_back() {
        let mut t = Table::new("demo v1", &meta(), &["time", "x", "note", "p"]);
        t.row(&[0.5.into(), (-3i64).into(), "a".into(), Cell::Empty]);
        t.row(&[1.5.into(), 2i64.into(), "b".into(), Some(0.25).into()]);
        let p = ParsedTable::parse(t.as_str()).unwrap();
        assert_eq!(p.meta("config_hash"), Some("abc"));
        assert_eq!(p.meta("criterion_version"), Some("v"));
        assert_eq!(p.columns, ["time", "x", "note", "p"]);
        assert_eq!(p.floats(3).unwrap(), [None, Some(0.25)]);
        assert_eq!(p.floats(1).unwrap(), [Some(-3.0), Some(2.0)]);
    }

    #[test]
    fn ragged_rows_are_rejected() {
        assert!(ParsedTable::parse("a,b\n1\n").is_err());
    }
}
