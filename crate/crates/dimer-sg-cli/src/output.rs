use crate::error::{CliError, CliResult};
use serde_json::Value;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
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

/// A CSV table with named columns.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn check_finite(&self) -> CliResult<()> {
        for row in &self.rows {
            for (c, cell) in row.iter().enumerate() {
                if let Cell::Num(v) = cell {
                    if !v.is_finite() {
                        return Err(CliError::NonFinite(self.columns[c].clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// `# <command> <params as JSON>`, the header row, then one line per row.
    pub fn render(&self, command: &str, params: &Value) -> CliResult<String> {
        self.check_finite()?;
        let mut s = format!("# dimer-sg {command} {params}\n");
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|c| match c {
                    // + 0.0 folds −0 into +0
                    Cell::Num(v) => format!("{:.16e}", v + 0.0),
                    Cell::Int(v) => v.to_string(),
                    Cell::Text(t) => t.clone(),
                })
                .collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        Ok(s)
    }
}

/// JSON document `{command, params, result}`; rejects non-finite numbers.
pub fn render_json(command: &str, params: &Value, result: Value) -> CliResult<String> {
    fn finite(v: &Value, key: &str) -> CliResult<()> {
        match v {
            Value::Null => Err(CliError::NonFinite(key.to_string())),
            Value::Object(m) => m.iter().try_for_each(|(k, x)| finite(x, k)),
            Value::Array(a) => a.iter().try_for_each(|x| finite(x, key)),
            _ => Ok(()),
        }
    }
    // serde_json maps NaN and ±inf to null
    finite(&result, "result")?;
    let doc = serde_json::json!({ "command": command, "params": params, "result": result });
    Ok(serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n")
}

pub fn emit(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(path) if path != Path::new("-") => std::fs::write(path, text)?,
        _ => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
