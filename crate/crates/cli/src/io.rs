//! File formats: distance/point CSV, sequence lists, embedding and trace
//! CSV, JSON documents.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use manifold_core::metric::PseudometricSpace;
use manifold_core::optimize::{Embedding, TraceEntry};
use manifold_core::SquareMatrix;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::CliError;

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn open(path: &Path) -> Result<File, CliError> {
    File::open(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_field(path: &Path, line: usize, field: &str) -> Result<f64, CliError> {
    field.trim().parse::<f64>().map_err(|_| CliError::Format {
        path: path.display().to_string(),
        line,
        message: format!("cannot parse {field:?} as a number"),
    })
}

/// Numeric CSV rows; a first row that does not parse as numbers is
/// returned separately as a header.
pub fn read_numeric_csv(path: &Path) -> Result<(Option<Vec<String>>, Vec<Vec<f64>>), CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut header = None;
    let mut rows = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Format {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        if idx == 0 && rec.iter().any(|f| f.parse::<f64>().is_err()) {
            header = Some(rec.iter().map(str::to_string).collect());
            continue;
        }
        rows.push(
            rec.iter()
                .map(|f| parse_field(path, idx + 1, f))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok((header, rows))
}

/// Distance matrix CSV with an optional header row of labels.
pub fn read_distances(path: &Path, strict: bool) -> Result<PseudometricSpace, CliError> {
    let (header, rows) = read_numeric_csv(path)?;
    let x = PseudometricSpace::from_rows(&rows, strict)?;
    match header {
        Some(labels) => Ok(x.with_labels(labels)?),
        None => Ok(x),
    }
}

pub fn read_points(path: &Path) -> Result<PseudometricSpace, CliError> {
    let (_, rows) = read_numeric_csv(path)?;
    Ok(PseudometricSpace::from_points_euclidean(&rows)?)
}

/// One sequence per line; blank lines are skipped.
pub fn read_sequences(path: &Path) -> Result<Vec<String>, CliError> {
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(open(path)?).lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        let seq = line.trim();
        if seq.is_empty() {
            continue;
        }
        if !seq.bytes().all(|b| b.is_ascii_uppercase()) {
            return Err(CliError::Format {
                path: path.display().to_string(),
                line: idx + 1,
                message: "sequences must be uppercase letters".into(),
            });
        }
        out.push(seq.to_string());
    }
    Ok(out)
}

pub fn write_matrix(path: &Path, m: &SquareMatrix, labels: Option<&[String]>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    if let Some(labels) = labels {
        w.write_record(labels).map_err(csv_err)?;
    }
    for row in m.rows() {
        w.write_record(row.iter().map(|&v| fmt_f64(v))).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// One row per point, `m` columns, preceded by a label column when labels
/// are given.
pub fn write_embedding(path: &Path, a: &Embedding, labels: Option<&[String]>) -> Result<(), CliError> {
    let mut w = csv::WriterBuilder::new().from_writer(create(path)?);
    let csv_err = |e: csv::Error| CliError::Io {
        path: path.display().to_string(),
        source: e.into(),
    };
    for i in 0..a.n() {
        let mut rec: Vec<String> = Vec::with_capacity(a.m() + 1);
        if let Some(l) = labels {
            rec.push(l[i].clone());
        }
        rec.extend(a.row(i).iter().map(|&v| fmt_f64(v)));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Embedding CSV, ignoring a leading label column if present.
pub fn read_embedding(path: &Path) -> Result<Embedding, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let mut rows = Vec::new();
    for (idx, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Format {
            path: path.display().to_string(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        let skip = usize::from(rec.get(0).is_some_and(|f| f.parse::<f64>().is_err()));
        rows.push(
            rec.iter()
                .skip(skip)
                .map(|f| parse_field(path, idx + 1, f))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(Embedding::from_rows(&rows)?)
}

pub fn write_trace(path: &Path, trace: &[TraceEntry]) -> Result<(), CliError> {
    let mut w = create(path)?;
    writeln!(w, "iteration,loss,step,grad_norm").map_err(io_err(path))?;
    for t in trace {
        writeln!(
            w,
            "{},{},{},{}",
            t.iteration,
            fmt_f64(t.loss),
            fmt_f64(t.step),
            fmt_f64(t.grad_norm)
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    writeln!(w).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    serde_json::from_reader(BufReader::new(open(path)?)).map_err(|e| CliError::Json {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}
