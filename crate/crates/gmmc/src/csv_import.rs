//! CSV import: one sample per row, integer label in the last column,
//! optional header row.

use std::io::Read;

use gmmc_core::data::{EmbeddingDataset, SplitTag};
use gmmc_core::Matrix;

use crate::formats::FormatError;

/// Parses CSV rows into a dataset with every row tagged `Train`.
///
/// The first row is treated as a header when any of its fields fails to
/// parse as a number. The class count is `max(label) + 1`.
pub fn read_csv<R: Read>(input: R, provenance: &str) -> Result<EmbeddingDataset, FormatError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut width: Option<usize> = None;
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| FormatError::Invalid(format!("csv row {}: {e}", i + 1)))?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() < 2 {
            return Err(FormatError::Invalid(format!(
                "csv row {} needs at least one feature and a label",
                i + 1
            )));
        }
        let parsed: Result<Vec<f64>, _> = record
            .iter()
            .take(record.len() - 1)
            .map(|f| f.parse::<f64>())
            .collect();
        let label = record[record.len() - 1].parse::<i64>();
        let (row, label) = match (parsed, label) {
            (Ok(row), Ok(label)) => (row, label),
            _ if i == 0 => continue,
            _ => {
                return Err(FormatError::Invalid(format!(
                    "csv row {} has a non-numeric feature or label",
                    i + 1
                )))
            }
        };
        if label < 0 {
            return Err(FormatError::Consistency(format!(
                "csv row {} has negative label {label}",
                i + 1
            )));
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(FormatError::Consistency(format!(
                    "csv row {} has {} features, expected {w}",
                    i + 1,
                    row.len()
                )))
            }
            _ => {}
        }
        features.extend(row);
        labels.push(label as usize);
    }
    let d = width.ok_or_else(|| FormatError::Length("csv has no data rows".into()))?;
    let n = labels.len();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Ok(EmbeddingDataset::new(
        Matrix::new(n, d, features)?,
        labels,
        classes,
        vec![SplitTag::Train; n],
        provenance.to_string(),
    )?)
}
