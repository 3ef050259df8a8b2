//! CSV and JSON rendering. Floats in CSV carry 17 significant digits; JSON
//! objects have sorted keys.

use serde_json::{Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

#[derive(Debug, Clone, Default)]
pub struct Output {
    pub record: Option<Map<String, Value>>,
    pub table: Option<Table>,
}

pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        // spelled the same way on every platform
        if x.is_nan() { "nan" } else if x > 0.0 { "inf" } else { "-inf" }.to_string()
    }
}

fn csv_value(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::Bool(b) => b.to_string(),
        Value::Number(n) => n.as_f64().map(fmt_float).unwrap_or_else(|| n.to_string()),
        Value::String(s) => s.clone(),
        Value::Array(a) => a.iter().map(csv_value).collect::<Vec<_>>().join(";"),
        Value::Object(_) => unreachable!("objects are flattened"),
    }
}

fn flatten(prefix: &str, map: &Map<String, Value>, out: &mut Vec<(String, String)>) {
    for (k, v) in map {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Object(inner) => flatten(&key, inner, out),
            other => out.push((key, csv_value(other))),
        }
    }
}

impl Output {
    pub fn record(record: Map<String, Value>) -> Self {
        Self { record: Some(record), table: None }
    }

    pub fn table(table: Table) -> Self {
        Self { record: None, table: Some(table) }
    }

    /// CSV prefers the table, JSON prefers the record.
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => match (&self.table, &self.record) {
                (Some(t), _) => render_table(t),
                (None, Some(r)) => {
                    let mut rows = Vec::new();
                    flatten("", r, &mut rows);
                    let mut s = String::from("key,value\n");
                    for (k, v) in rows {
                        s.push_str(&format!("{k},{v}\n"));
                    }
                    s
                }
                (None, None) => String::new(),
            },
            Format::Json => {
                let value = match (&self.record, &self.table) {
                    (Some(r), _) => Value::Object(r.clone()),
                    (None, Some(t)) => {
                        let mut m = Map::new();
                        m.insert("columns".into(), Value::from(t.columns.clone()));
                        m.insert("rows".into(), Value::from(t.rows.iter().map(|r| Value::from(r.clone())).collect::<Vec<_>>()));
                        Value::Object(m)
                    }
                    (None, None) => Value::Object(Map::new()),
                };
                let mut s = serde_json::to_string_pretty(&value).expect("json values serialize");
                s.push('\n');
                s
            }
        }
    }
}

fn render_table(t: &Table) -> String {
    let mut s = t.columns.join(",");
    s.push('\n');
    for row in &t.rows {
        s.push_str(&row.iter().map(|&x| fmt_float(x)).collect::<Vec<_>>().join(","));
        s.push('\n');
    }
    s
}

/// Parse CSV produced by [`Output::render`] back into a table.
pub fn parse_csv_table(text: &str) -> Option<Table> {
    let mut lines = text.lines();
    let columns: Vec<String> = lines.next()?.split(',').map(str::to_string).collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| l.split(',').map(|c| c.parse::<f64>().ok()).collect::<Option<Vec<f64>>>())
        .collect::<Option<Vec<_>>>()?;
    Some(Table { columns, rows })
}
