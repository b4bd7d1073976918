use std::fs::File;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let row = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(source) => io_error(path, source),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            path: path.to_path_buf(),
            row,
            column: len as usize + 1,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            path: path.to_path_buf(),
            row,
            column: 0,
            message: format!("{other:?}"),
        },
    }
}

/// Reads a numeric CSV matrix. A first line containing any non-numeric
/// field is treated as a header and skipped. Rows and columns in error
/// messages are 1-based line and field numbers.
pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let file = File::open(path).map_err(|e| io_error(path, e))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut values = Vec::new();
    let mut ncols = None;
    let mut nrows = 0;
    for (index, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(index + 1, |p| p.line() as usize);
        let parsed: Vec<std::result::Result<f64, _>> = record.iter().map(str::parse::<f64>).collect();
        if index == 0 && parsed.iter().any(|v| v.is_err()) {
            ncols = Some(record.len());
            continue;
        }
        if let Some(expected) = ncols {
            if record.len() != expected {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    column: record.len().min(expected) + 1,
                    message: format!("expected {expected} fields, found {}", record.len()),
                });
            }
        }
        ncols = Some(record.len());
        for (j, value) in parsed.into_iter().enumerate() {
            let value = value.map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                row: line,
                column: j + 1,
                message: format!("'{}' is not a number", &record[j]),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row: line,
                    column: j + 1,
                    message: format!("'{}' is not finite", &record[j]),
                });
            }
            values.push(value);
        }
        nrows += 1;
    }
    let ncols = ncols.unwrap_or(0);
    if nrows == 0 || ncols == 0 {
        return Err(Error::Data(format!("{}: no numeric rows", path.display())));
    }
    Ok(DMatrix::from_row_slice(nrows, ncols, &values))
}

fn write_rows<I, R>(path: &Path, header: Option<&[&str]>, rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut writer = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    if let Some(h) = header {
        writer.write_record(h).map_err(|e| csv_error(path, e))?;
    }
    for row in rows {
        writer
            .write_record(row.into_iter().collect::<Vec<_>>())
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| io_error(path, e))
}

/// Writes a matrix without a header; floats use the shortest text that
/// parses back to the identical value.
pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_rows(path, None, m.row_iter().map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>()))
}

/// Writes 1-based indices: one `row` column, or `row,column` pairs.
pub fn write_rows_index(path: &Path, rows: &[usize]) -> Result<()> {
    write_rows(path, Some(&["row"]), rows.iter().map(|r| vec![(r + 1).to_string()]))
}

pub fn write_element_index(path: &Path, elements: &[(usize, usize)]) -> Result<()> {
    write_rows(
        path,
        Some(&["row", "column"]),
        elements.iter().map(|(i, j)| vec![(i + 1).to_string(), (j + 1).to_string()]),
    )
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| io_error(path, e))
}
