use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DataError, Dataset, Split};
use crate::numerics::Matrix;

/// Original label values; index `i` holds the value remapped to class `i`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMap {
    pub original: Vec<i64>,
}

/// Loads a headered, comma-separated file.
///
/// `feature_columns` selects and orders the feature columns; `None` takes
/// every column except the label. Labels must be integers and are remapped
/// to `[0, k)` in sorted order of their original values. Row and column
/// numbers in errors are 1-based, rows counting data rows after the header.
pub fn load_csv(
    path: impl AsRef<Path>,
    label_column: &str,
    feature_columns: Option<&[String]>,
) -> Result<(Dataset, LabelMap), DataError> {
    let path = path.as_ref();
    let shown = path.display().to_string();
    let io_err = |e: &dyn std::fmt::Display| DataError::Io {
        path: shown.clone(),
        message: e.to_string(),
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io_err(&e))?;
    let headers = reader.headers().map_err(|e| io_err(&e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(DataError::EmptyFile { path: shown });
    }
    let column_index = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn {
                path: shown.clone(),
                column: name.to_string(),
            })
    };
    let label_idx = column_index(label_column)?;
    let feature_idx: Vec<usize> = match feature_columns {
        Some(cols) => cols.iter().map(|c| column_index(c)).collect::<Result<_, _>>()?,
        None => (0..headers.len()).filter(|&i| i != label_idx).collect(),
    };

    let mut data = Vec::new();
    let mut raw_labels = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| io_err(&e))?;
        if record.len() != headers.len() {
            return Err(DataError::RaggedRow {
                path: shown,
                row,
                found: record.len(),
                expected: headers.len(),
            });
        }
        let parse = |col: usize| -> Result<f64, DataError> {
            let cell = &record[col];
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::NonNumeric {
                    path: shown.clone(),
                    row,
                    column: col + 1,
                    value: cell.to_string(),
                })
        };
        for &c in &feature_idx {
            data.push(parse(c)?);
        }
        let label = parse(label_idx)?;
        if label.fract() != 0.0 || label.abs() > i64::MAX as f64 {
            return Err(DataError::NonIntegerLabel {
                path: shown,
                row,
                value: label,
            });
        }
        raw_labels.push(label as i64);
    }
    if raw_labels.is_empty() {
        return Err(DataError::EmptyFile { path: shown });
    }

    let original: Vec<i64> = raw_labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let labels = raw_labels
        .iter()
        .map(|v| original.binary_search(v).expect("value collected above"))
        .collect();
    let features = Matrix::from_vec(raw_labels.len(), feature_idx.len(), data).expect("sized by loop");
    let dataset = Dataset::new(features, labels, original.len(), Split::Train)?;
    Ok((dataset, LabelMap { original }))
}

/// Writes `dataset` with feature columns `f0..f{d-1}` followed by `label`.
/// Floats use Rust's shortest round-trip formatting.
pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    let io_err = |e: &dyn std::fmt::Display| DataError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    };
    let mut writer = csv::Writer::from_path(path).map_err(|e| io_err(&e))?;
    let mut header: Vec<String> = (0..dataset.feature_width()).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    writer.write_record(&header).map_err(|e| io_err(&e))?;
    for (row, label) in dataset.features().row_iter().zip(dataset.labels()) {
        let mut fields: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        fields.push(label.to_string());
        writer.write_record(&fields).map_err(|e| io_err(&e))?;
    }
    writer.flush().map_err(|e| io_err(&e))
}
