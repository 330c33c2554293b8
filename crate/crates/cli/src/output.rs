//! Experiment reports: a parameter echo plus a rectangular result table,
//! rendered as CSV or JSON and written in a single filesystem call so a
//! failed run never leaves a partial file.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    Int(i64),
    Uint(u64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Uint(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// One experiment's output: the command name, an ordered parameter echo,
/// and rows under fixed column names.
pub struct Report {
    command: String,
    params: BTreeMap<String, String>,
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Report {
    pub fn new(command: &str, columns: &[&str]) -> Self {
        Report {
            command: command.to_string(),
            params: BTreeMap::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl std::fmt::Display) {
        self.params.insert(key.to_string(), value.to_string());
    }

    pub fn row(&mut self, cells: Vec<Cell>) {
        assert_eq!(cells.len(), self.columns.len(), "row width mismatch");
        self.rows.push(cells);
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.render_csv(),
            Format::Json => self.render_json(),
        }
    }

    /// `# key=value` echo lines, a header row, then one line per row.
    /// Floats print via Rust's shortest round-trip formatting with a '.'
    /// separator, so equal runs give equal bytes.
    fn render_csv(&self) -> String {
        let mut out = String::new();
        writeln!(out, "# command={}", self.command).unwrap();
        for (k, v) in &self.params {
            writeln!(out, "# {k}={v}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(csv_cell).collect();
            writeln!(out, "{}", line.join(",")).unwrap();
        }
        out
    }

    fn render_json(&self) -> String {
        let params: serde_json::Map<String, serde_json::Value> = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone())))
            .collect();
        let results: Vec<serde_json::Value> = self
            .rows
            .iter()
            .map(|row| {
                let obj: serde_json::Map<String, serde_json::Value> = self
                    .columns
                    .iter()
                    .zip(row)
                    .map(|(c, cell)| (c.clone(), json_cell(cell)))
                    .collect();
                serde_json::Value::Object(obj)
            })
            .collect();
        let mut root = serde_json::Map::new();
        root.insert(
            "command".to_string(),
            serde_json::Value::String(self.command.clone()),
        );
        root.insert("parameters".to_string(), serde_json::Value::Object(params));
        root.insert("results".to_string(), serde_json::Value::Array(results));
        let mut text = serde_json::to_string_pretty(&serde_json::Value::Object(root)).unwrap();
        text.push('\n');
        text
    }

    pub fn write(&self, path: &Path, format: Format) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.render(format))
    }
}

fn csv_cell(cell: &Cell) -> String {
    match cell {
        Cell::Int(v) => v.to_string(),
        Cell::Uint(v) => v.to_string(),
        Cell::Float(v) => format_float(*v),
        Cell::Bool(v) => v.to_string(),
        Cell::Text(v) => {
            if v.contains([',', '"', '\n']) {
                format!("\"{}\"", v.replace('"', "\"\""))
            } else {
                v.clone()
            }
        }
    }
}

fn json_cell(cell: &Cell) -> serde_json::Value {
    match cell {
        Cell::Int(v) => serde_json::Value::from(*v),
        Cell::Uint(v) => serde_json::Value::from(*v),
        Cell::Float(v) => {
            // JSON has no NaN/inf literals; fall back to strings for those.
            serde_json::Number::from_f64(*v)
                .map(serde_json::Value::Number)
                .unwrap_or_else(|| serde_json::Value::String(format_float(*v)))
        }
        Cell::Bool(v) => serde_json::Value::from(*v),
        Cell::Text(v) => serde_json::Value::String(v.clone()),
    }
}

fn format_float(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        // Keep a decimal point so the column stays visibly floating-point.
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}
