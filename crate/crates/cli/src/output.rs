//! Tables rendered as CSV or JSON.
//!
//! Numbers are written with 17 significant digits in scientific notation,
//! independent of locale. Non-finite numbers become `inf`, `-inf` or `nan`
//! in CSV and `null` in JSON.

use std::fmt::Write;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
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

/// Column-named rows plus a summary block.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
    pub summary: Vec<(String, Cell)>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            ..Self::default()
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl Into<Cell>) {
        self.summary.push((key.into(), value.into()));
    }
}

/// Header fields echoed into every output.
pub struct Meta<'a> {
    pub command: &'a str,
    pub config: &'a [(&'static str, String)],
}

pub fn number(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{v:.16e}")
    }
}

fn csv_cell(cell: &Cell) -> String {
    match cell {
        Cell::Num(v) => number(*v),
        Cell::Int(v) => v.to_string(),
        Cell::Bool(v) => v.to_string(),
        Cell::Text(s) => s.clone(),
    }
}

fn json_cell(cell: &Cell) -> String {
    match cell {
        Cell::Num(v) if v.is_finite() => number(*v),
        Cell::Num(_) => "null".to_string(),
        Cell::Int(v) => v.to_string(),
        Cell::Bool(v) => v.to_string(),
        Cell::Text(s) => json_string(s),
    }
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

/// Header line, one line per row, then `# key = value` lines for the
/// summary and the effective configuration.
pub fn to_csv(table: &Table, meta: &Meta) -> String {
    let mut out = table.columns.join(",");
    out.push('\n');
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(csv_cell).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    for (key, value) in &table.summary {
        let _ = writeln!(out, "# {key} = {}", csv_cell(value));
    }
    let _ = writeln!(out, "# command = {}", meta.command);
    let _ = writeln!(out, "# version = {}", env!("CARGO_PKG_VERSION"));
    for (key, value) in meta.config {
        let _ = writeln!(out, "# config.{key} = {value}");
    }
    out
}

pub fn to_json(table: &Table, meta: &Meta) -> String {
    let mut out = String::from("{\n  \"meta\": {\n");
    let _ = writeln!(out, "    \"program\": \"decaylaw\",");
    let _ = writeln!(out, "    \"version\": {},", json_string(env!("CARGO_PKG_VERSION")));
    let _ = writeln!(out, "    \"command\": {},", json_string(meta.command));
    out.push_str("    \"config\": {");
    for (i, (key, value)) in meta.config.iter().enumerate() {
        let sep = if i == 0 { "\n" } else { ",\n" };
        let _ = write!(out, "{sep}      {}: {}", json_string(key), json_string(value));
    }
    out.push_str("\n    }\n  },\n");

    let columns: Vec<String> = table.columns.iter().map(|c| json_string(c)).collect();
    let _ = writeln!(out, "  \"columns\": [{}],", columns.join(", "));

    out.push_str("  \"records\": [");
    for (i, row) in table.rows.iter().enumerate() {
        let fields: Vec<String> = table
            .columns
            .iter()
            .zip(row)
            .map(|(c, v)| format!("{}: {}", json_string(c), json_cell(v)))
            .collect();
        let sep = if i == 0 { "\n" } else { ",\n" };
        let _ = write!(out, "{sep}    {{{}}}", fields.join(", "));
    }
    out.push_str(if table.rows.is_empty() { "],\n" } else { "\n  ],\n" });

    out.push_str("  \"summary\": {");
    for (i, (key, value)) in table.summary.iter().enumerate() {
        let sep = if i == 0 { "\n" } else { ",\n" };
        let _ = write!(out, "{sep}    {}: {}", json_string(key), json_cell(value));
    }
    out.push_str(if table.summary.is_empty() { "}\n}\n" } else { "\n  }\n}\n" });
    out
}
