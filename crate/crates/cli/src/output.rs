use std::path::Path;

use clap::ValueEnum;
use serde::Serialize;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// One report file: name relative to the output directory and its bytes.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFile {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl OutputFile {
    pub fn json<T: Serialize>(name: &str, value: &T) -> Self {
        let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize");
        bytes.push(b'\n');
        Self {
            name: name.to_string(),
            bytes,
        }
    }

    /// A table produced as CSV, written as CSV or as columnar JSON.
    pub fn table(stem: &str, csv: Vec<u8>, format: Format) -> Self {
        match format {
            Format::Csv => Self {
                name: format!("{stem}.csv"),
                bytes: csv,
            },
            Format::Json => {
                let text = String::from_utf8(csv).expect("tables are UTF-8");
                Self::json(&format!("{stem}.json"), &csv_to_columns(&text))
            }
        }
    }
}

/// `{"columns": [...], "data": [[column 0 values], [column 1 values], ...]}`.
/// Numeric cells become numbers, empty cells `null`, anything else strings.
pub fn csv_to_columns(text: &str) -> serde_json::Value {
    let mut lines = text.lines();
    let columns: Vec<String> = lines
        .next()
        .map(|h| h.split(',').map(str::to_string).collect())
        .unwrap_or_default();
    let mut data: Vec<Vec<serde_json::Value>> = vec![Vec::new(); columns.len()];
    for line in lines {
        for (col, cell) in data.iter_mut().zip(line.split(',')) {
            col.push(if cell.is_empty() {
                serde_json::Value::Null
            } else if let Ok(i) = cell.parse::<i64>() {
                i.into()
            } else if let Ok(f) = cell.parse::<f64>() {
                serde_json::Number::from_f64(f).map_or_else(|| cell.into(), serde_json::Value::Number)
            } else {
                cell.into()
            });
        }
    }
    serde_json::json!({ "columns": columns, "data": data })
}

pub fn write_all(dir: &Path, files: &[OutputFile]) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::runtime("out-dir", e);
    std::fs::create_dir_all(dir).map_err(io)?;
    for f in files {
        std::fs::write(dir.join(&f.name), &f.bytes).map_err(io)?;
    }
    Ok(())
}
