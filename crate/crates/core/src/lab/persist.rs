//! CSV output: one header row, `episode` first, LF line endings.

use std::path::Path;

use crate::error::{Error, Result};
use crate::lab::experiment::RunRecord;

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(|e| csv_error(path, e))
}

/// `episode,steps` with episodes numbered from 1.
pub fn write_run_csv(record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let write = |w: &mut csv::Writer<_>| -> std::result::Result<(), csv::Error> {
        w.write_record(["episode", "steps"])?;
        for (i, s) in record.steps_per_episode.iter().enumerate() {
            w.write_record([(i + 1).to_string(), s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| csv_error(path, e))
}

/// `episode,<label1>,<label2>,...`; columns shorter than the longest are left blank.
pub fn write_series_csv(labels: &[String], columns: &[Vec<f64>], path: &Path) -> Result<()> {
    let mut w = writer(path)?;
    let rows = columns.iter().map(Vec::len).max().unwrap_or(0);
    let write = |w: &mut csv::Writer<_>| -> std::result::Result<(), csv::Error> {
        let mut header = vec!["episode".to_string()];
        header.extend(labels.iter().cloned());
        w.write_record(&header)?;
        for i in 0..rows {
            let mut row = vec![(i + 1).to_string()];
            row.extend(
                columns
                    .iter()
                    .map(|c| c.get(i).map(|v| v.to_string()).unwrap_or_default()),
            );
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| csv_error(path, e))
}

/// A parsed series table: labels (without `episode`) and their columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub labels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

/// Reads any file written by this module; blank cells end a column.
pub fn read_series_csv(path: &Path) -> Result<SeriesTable> {
    let mut r = csv::ReaderBuilder::new()
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.get(0) != Some("episode") || headers.len() < 2 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "expected a header starting with `episode` and at least one column".into(),
        });
    }
    let labels: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut columns = vec![Vec::new(); labels.len()];
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        for (col, cell) in columns.iter_mut().zip(rec.iter().skip(1)) {
            if cell.is_empty() {
                continue;
            }
            let v = cell.parse::<f64>().map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                message: format!("row {}: `{cell}`: {e}", line + 2),
            })?;
            col.push(v);
        }
    }
    Ok(SeriesTable { labels, columns })
}

/// Reads the `steps` column of a run CSV.
pub fn read_run_csv(path: &Path) -> Result<Vec<usize>> {
    let table = read_series_csv(path)?;
    let col = table
        .labels
        .iter()
        .position(|l| l == "steps")
        .ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            message: "no `steps` column".into(),
        })?;
    Ok(table.columns[col].iter().map(|v| *v as usize).collect())
}
