use std::path::Path;

use crate::error::{Error, Result};

use super::Dataset;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::Io { path: path.to_path_buf(), source },
        other => Error::Parse { row, column: 0, reason: format!("{other:?}") },
    }
}

/// Reads comma-separated numeric rows with one integer label column.
///
/// Row and column numbers in errors are 1-based and count physical lines,
/// header included. The class count is `max(label) + 1` (at least 2).
pub fn load_csv(path: impl AsRef<Path>, has_header: bool, label_column: usize) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).flexible(true).from_reader(file);

    let mut width = None;
    let mut features = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    let mut first = true;
    loop {
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_err(path, e)),
        }
        let row = record.position().map_or(0, |p| p.line() as usize);
        if std::mem::take(&mut first) && has_header {
            continue;
        }
        let expected = *width.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow { row, expected, found: record.len() });
        }
        if label_column >= expected {
            return Err(Error::Parse {
                row,
                column: label_column + 1,
                reason: format!("label column missing; row has {expected} columns"),
            });
        }
        for (c, cell) in record.iter().enumerate() {
            let cell = cell.trim();
            let column = c + 1;
            if c == label_column {
                let label: i64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column,
                    reason: format!("label `{cell}` is not an integer"),
                })?;
                let label = usize::try_from(label).map_err(|_| Error::LabelOutOfRange {
                    row,
                    column,
                    label: cell.to_string(),
                })?;
                labels.push(label);
            } else {
                let x: f64 = cell.parse().map_err(|_| Error::Parse {
                    row,
                    column,
                    reason: format!("`{cell}` is not a number"),
                })?;
                if !x.is_finite() {
                    return Err(Error::Parse { row, column, reason: format!("`{cell}` is not finite") });
                }
                features.push(x);
            }
        }
    }
    let width = width.ok_or_else(|| Error::invalid("csv", format!("{} has no data rows", path.display())))?;
    if width < 2 {
        return Err(Error::invalid("csv", "need at least one feature column besides the label"));
    }
    let num_classes = labels.iter().max().map_or(2, |&m| (m + 1).max(2));
    Dataset::new(features, width - 1, labels, num_classes)
}

/// Writes features followed by the label as the last column, no header.
///
/// Floats use the shortest representation that parses back to the same
/// bits, so `load_csv(path, false, ds.dim())` reproduces `ds` exactly.
pub fn write_csv(path: impl AsRef<Path>, ds: &Dataset) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for i in 0..ds.len() {
        let mut cells: Vec<String> = ds.row(i).iter().map(|x| x.to_string()).collect();
        cells.push(ds.label(i).to_string());
        writer.write_record(&cells).map_err(|e| csv_err(path, e))?;
    }
    writer.flush().map_err(io_err(path))
}
