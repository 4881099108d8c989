use serde_json::Value;

use crate::{CliError, Format};

/// A nested JSON document plus a flat table for CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub json: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(json: Value, header: &[&str]) -> Self {
        Self {
            json,
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> Result<String, CliError> {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.json)
                    .map_err(|e| CliError::Usage(format!("cannot serialize report: {e}")))?;
                s.push('\n');
                Ok(s)
            }
            Format::Csv => {
                let mut writer = csv::Writer::from_writer(Vec::new());
                let write = |w: &mut csv::Writer<Vec<u8>>, r: &[String]| {
                    w.write_record(r)
                        .map_err(|e| CliError::Usage(format!("cannot serialize report: {e}")))
                };
                write(&mut writer, &self.header)?;
                for row in &self.rows {
                    write(&mut writer, row)?;
                }
                let bytes = writer
                    .into_inner()
                    .map_err(|e| CliError::Usage(format!("cannot serialize report: {e}")))?;
                Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
            }
        }
    }
}
