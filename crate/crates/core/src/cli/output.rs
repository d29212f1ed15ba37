use std::path::{Path, PathBuf};

use super::config::Config;
use crate::error::Result;

pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub struct Table {
    pub file: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: impl Into<String>, columns: &[&'static str]) -> Self {
        Self { file: file.into(), columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// Two-column `quantity,value` table.
    pub fn key_values(file: impl Into<String>, rows: Vec<(&str, String)>) -> Self {
        let mut t = Self::new(file, &["quantity", "value"]);
        for (k, v) in rows {
            t.push(vec![k.to_string(), v]);
        }
        t
    }
}

/// Writes the manifest block followed by the CSV body.
pub fn write_table(dir: &Path, subcommand: &str, cfg: &Config, table: &Table) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(&table.file);
    let mut text = String::new();
    text.push_str(&format!("# subcommand: {subcommand}\n"));
    text.push_str(&format!("# version: {}\n", env!("CARGO_PKG_VERSION")));
    for (k, v) in cfg.manifest_entries() {
        text.push_str(&format!("# {k}: {v}\n"));
    }
    text.push_str(&format!("# output.file: {}\n", table.file));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    let body = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
    text.push_str(&String::from_utf8(body).expect("csv output is utf-8"));
    std::fs::write(&path, text)?;
    Ok(path)
}
