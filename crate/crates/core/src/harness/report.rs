//! Tabular output with provenance, emitted as CSV or JSON lines.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::error::Result;

/// `<crate version>+<git describe>`.
pub fn version_string() -> String {
    format!(
        "{}+{}",
        env!("CARGO_PKG_VERSION"),
        env!("PATHGROUP_GIT_DESCRIBE")
    )
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub version: String,
}

impl Provenance {
    pub fn new(config_hash: String) -> Self {
        Self {
            config_hash,
            version: version_string(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Csv,
    JsonLines,
}

/// A table whose rows all carry the same provenance. Each row also carries
/// its own `seed` column when the experiment derives per-row seeds.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub title: String,
    pub provenance: Provenance,
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(title: impl Into<String>, provenance: Provenance, columns: Vec<Column>) -> Self {
        Self {
            title: title.into(),
            provenance,
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(
            row.len(),
            self.columns.len(),
            "row width must match the header"
        );
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Values of a numeric column; missing cells become NaN.
    pub fn column_f64(&self, name: &str) -> Option<Vec<f64>> {
        let idx = self.column_index(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| r[idx].as_f64().unwrap_or(f64::NAN))
                .collect(),
        )
    }

    pub fn write<W: Write>(&self, format: Format, out: W) -> Result<()> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::JsonLines => self.write_json_lines(out),
        }
    }

    pub fn render(&self, format: Format) -> String {
        let mut buf = Vec::new();
        self.write(format, &mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8 output")
    }

    /// Header cells read `name[unit]`; provenance columns lead every row.
    fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["config_hash".to_string(), "version".to_string()];
        header.extend(
            self.columns
                .iter()
                .map(|c| format!("{}[{}]", c.name, c.unit)),
        );
        w.write_record(&header).map_err(csv_err)?;
        for row in &self.rows {
            let mut record = vec![
                self.provenance.config_hash.clone(),
                self.provenance.version.clone(),
            ];
            record.extend(row.iter().map(cell_text));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// First line is a header object listing columns and units; each further
    /// line is one row object including provenance.
    fn write_json_lines<W: Write>(&self, mut out: W) -> Result<()> {
        let header = json!({
            "table": self.title,
            "columns": self.columns,
            "provenance": self.provenance,
        });
        writeln!(out, "{header}")?;
        for row in &self.rows {
            let mut obj = Map::new();
            obj.insert("config_hash".into(), json!(self.provenance.config_hash));
            obj.insert("version".into(), json!(self.provenance.version));
            for (c, v) in self.columns.iter().zip(row) {
                obj.insert(c.name.into(), v.clone());
            }
            writeln!(out, "{}", Value::Object(obj))?;
        }
        Ok(())
    }
}

fn cell_text(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn csv_err(e: csv::Error) -> crate::error::Error {
    crate::error::Error::Io(e.to_string())
}

/// JSON number for finite values, `null` otherwise.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        Value::Null
    }
}
