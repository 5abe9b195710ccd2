//! CSV and JSON emission.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

/// Columns that order the rows, in priority order. A blank key sorts first.
const KEYS: [&str; 4] = ["t", "lambda", "p", "index"];

/// Rows of optional floats under a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: Vec<&'static str>,
    rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Table { columns: columns.to_vec(), rows: Vec::new() }
    }

    /// Appends a row from (column, value) pairs; missing columns stay blank.
    pub fn push(&mut self, cells: &[(&str, Option<f64>)]) {
        let mut row = vec![None; self.columns.len()];
        for (name, v) in cells {
            let j = self.columns.iter().position(|c| c == name).unwrap_or_else(|| panic!("no column {name}"));
            row[j] = *v;
        }
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    fn sort(&mut self) {
        let keys: Vec<usize> = KEYS.iter().filter_map(|k| self.columns.iter().position(|c| c == k)).collect();
        let cmp = |a: &Option<f64>, b: &Option<f64>| match (a, b) {
            (None, None) => Ordering::Equal,
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(x), Some(y)) => x.total_cmp(y),
        };
        self.rows.sort_by(|a, b| keys.iter().map(|&k| cmp(&a[k], &b[k])).find(|o| o.is_ne()).unwrap_or(Ordering::Equal));
    }

    pub fn to_csv(&mut self) -> String {
        self.sort();
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.map_or_else(String::new, |x| format!("{x:.17e}"))).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub fn write(path: &Path, contents: &str) -> Result<(), String> {
    fs::write(path, contents).map_err(|e| format!("{}: {e}", path.display()))
}

/// Pretty JSON with sorted keys.
pub fn json(value: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("JSON values serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let mut t = Table::new(&["t", "value"]);
        assert_eq!(t.to_csv(), "t,value\n");
    }

    #[test]
    fn rows_sort_by_time_then_lambda() {
        let mut t = Table::new(&["t", "lambda", "value"]);
        t.push(&[("t", Some(1.0)), ("value", Some(2.0))]);
        t.push(&[("lambda", Some(5.0))]);
        t.push(&[("t", Some(0.5)), ("value", None)]);
        t.push(&[("lambda", Some(1.0))]);
        let csv = t.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with(",1.0"));
        assert!(lines[2].starts_with(",5.0"));
        assert!(lines[3].starts_with("5.0"));
        assert_eq!(lines[3], "5.00000000000000000e-1,,");
    }
}
