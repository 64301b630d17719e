//! CSV tables and schema files.

use std::fs;
use std::path::Path;

use causa_core::dataset::{CausalDataset, Schema};

use crate::error::CliError;

/// Header and rows of a comma-separated file. Rows may be ragged; the
/// consumer decides whether that is an error.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), CliError> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header = reader.headers().map_err(csv_err)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for record in reader.records() {
        rows.push(record.map_err(csv_err)?.iter().map(str::to_string).collect());
    }
    Ok((header, rows))
}

pub fn load_csv(path: &Path, schema: &Schema) -> Result<CausalDataset, CliError> {
    let (header, rows) = read_table(path)?;
    CausalDataset::from_records(&header, &rows, schema)
        .map_err(|source| CliError::Dataset { path: path.to_path_buf(), source })
}

pub fn write_csv(path: &Path, ds: &CausalDataset) -> Result<(), CliError> {
    let csv_err = |source| CliError::Csv { path: path.to_path_buf(), source };
    let (header, rows) = ds.to_records();
    let mut writer = csv::Writer::from_path(path).map_err(csv_err)?;
    writer.write_record(&header).map_err(csv_err)?;
    for row in &rows {
        writer.write_record(row).map_err(csv_err)?;
    }
    writer.flush().map_err(|e| CliError::io(path, e))
}

/// Role → column mapping from a TOML file:
///
/// ```toml
/// entity = "State"
/// period = "Year"
/// covariates = ["Funds", "Population_density"]
/// treatment = "Treatment"
/// outcome = "Post_users"
/// ```
pub fn load_schema(path: &Path) -> Result<Schema, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    toml::from_str(&text).map_err(|source| CliError::Toml { path: path.to_path_buf(), source })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}
