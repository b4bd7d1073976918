use std::fmt::Write as _;

use crate::error::{Error, Result};

/// One table entry.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Num(v) => Some(v),
            _ => None,
        }
    }

    /// Full-precision text: floats use the shortest representation that
    /// parses back to the same value.
    fn exact(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }

    fn rounded(&self) -> String {
        match self {
            Cell::Num(v) if v.is_finite() => format!("{v:.3}"),
            Cell::Missing => "-".into(),
            other => other.exact(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Num)
    }
}

/// A rectangular result table with named columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn get(&self, row: usize, column: &str) -> Option<&Cell> {
        self.rows.get(row)?.get(self.column_index(column)?)
    }

    /// Numeric values of a column; non-numeric cells are skipped.
    pub fn numbers(&self, column: &str) -> Vec<f64> {
        match self.column_index(column) {
            Some(j) => self.rows.iter().filter_map(|r| r[j].as_f64()).collect(),
            None => Vec::new(),
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::Data(e.to_string());
        writer.write_record(&self.columns).map_err(to_err)?;
        for row in &self.rows {
            writer.write_record(row.iter().map(Cell::exact)).map_err(to_err)?;
        }
        let bytes = writer.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Data(e.to_string()))
    }

    /// Aligned pipe table, floats rounded to three decimals.
    pub fn to_markdown(&self) -> String {
        let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Cell::rounded).collect()).collect();
        let widths: Vec<usize> = (0..self.columns.len())
            .map(|j| cells.iter().map(|r| r[j].len()).chain([self.columns[j].len(), 3]).max().unwrap_or(3))
            .collect();
        let mut out = String::new();
        let line = |out: &mut String, items: &[String]| {
            out.push('|');
            for (item, w) in items.iter().zip(&widths) {
                let _ = write!(out, " {item:>w$} |");
            }
            out.push('\n');
        };
        line(&mut out, &self.columns);
        let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
        line(&mut out, &rule);
        for row in &cells {
            line(&mut out, row);
        }
        out
    }
}
