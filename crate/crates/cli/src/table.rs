//! Minimal CSV writing and reading for the command outputs.

use std::fs;
use std::path::Path;

use crate::failure::Failure;

pub struct Table {
    text: String,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            text: header.join(",") + "\n",
        }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn write(&self, path: &Path) -> Result<(), Failure> {
        fs::write(path, &self.text).map_err(|e| Failure::io(path, e))
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Header and numeric rows of a headed CSV file.
pub struct Columns {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Columns {
    pub fn read(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<String> = lines
            .next()
            .ok_or_else(|| Failure::invalid(format!("{}: empty file", path.display())))?
            .split(',')
            .map(|s| s.trim().to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| Failure::invalid(format!("{}:{}: {e}", path.display(), i + 2)))?;
            if row.len() != header.len() {
                return Err(Failure::invalid(format!(
                    "{}:{}: expected {} fields, found {}",
                    path.display(),
                    i + 2,
                    header.len(),
                    row.len()
                )));
            }
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Failure::invalid(format!("{}: no data rows", path.display())));
        }
        Ok(Columns { header, rows })
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}
