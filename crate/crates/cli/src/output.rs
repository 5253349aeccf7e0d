use std::io::Write;
use std::path::Path;

use serde_json::{Map, Value};

use crate::config::Format;
use crate::error::Result;
use crate::SCHEMA;

/// Flat rows for the CSV rendering.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|h| h.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Outcome of one subcommand: the JSON document, its CSV table and the
/// overall verdict.
#[derive(Debug, Clone)]
pub struct Report {
    pub json: Value,
    pub table: Table,
    pub pass: bool,
}

impl Report {
    /// Wraps `body` with the schema, command and status keys, in that order.
    pub fn new(command: &str, pass: bool, body: Value, table: Table) -> Self {
        let mut doc = Map::new();
        doc.insert("schema".into(), SCHEMA.into());
        doc.insert("command".into(), command.into());
        doc.insert("status".into(), status(pass).into());
        if let Value::Object(fields) = body {
            doc.extend(fields);
        }
        Self { json: Value::Object(doc), table, pass }
    }

    pub fn render(&self, format: Format) -> Result<Vec<u8>> {
        match format {
            Format::Json => {
                let mut bytes = serde_json::to_vec_pretty(&self.json)?;
                bytes.push(b'\n');
                Ok(bytes)
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.table.header)?;
                for row in &self.table.rows {
                    w.write_record(row)?;
                }
                w.into_inner().map_err(|e| std::io::Error::other(e.to_string()).into())
            }
        }
    }

    pub fn emit(&self, format: Format, output: Option<&Path>) -> Result<()> {
        let bytes = self.render(format)?;
        match output {
            Some(path) => std::fs::write(path, bytes)?,
            None => std::io::stdout().lock().write_all(&bytes)?,
        }
        Ok(())
    }
}

pub fn status(pass: bool) -> &'static str {
    if pass { "PASS" } else { "FAIL" }
}

/// Shortest round-trip decimal form, identical across runs and platforms.
pub fn num(x: f64) -> String {
    format!("{x:e}")
}
