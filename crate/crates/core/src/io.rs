//! Matrix files and JSON artifacts.
//!
//! Binary layout: `b"SKMM"`, version `u16`, rows `u64`, cols `u64`, then the
//! row-major `f64` payload, all little-endian. CSV input with a `col_0,…`
//! header is accepted wherever a matrix file is read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"SKMM";
pub const FORMAT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 8 + 8;

pub fn encode_matrix(m: &DenseMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_matrix(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
        return Err(Error::Format("not a SKMM matrix file".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
    let (rows, cols) = (word(6), word(14));
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| usize::try_from(c).ok())
        .ok_or_else(|| Error::Format("matrix dimensions overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != count {
        return Err(Error::Format(format!(
            "payload holds {} bytes, header promises {count}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    DenseMatrix::new(rows as usize, cols as usize, data)
}

pub fn write_matrix(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&encode_matrix(m))?;
    w.flush()?;
    Ok(())
}

/// Reads a binary matrix file, or CSV when the magic bytes are absent.
pub fn read_matrix(path: &Path) -> Result<DenseMatrix> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    if bytes.starts_with(MAGIC) {
        decode_matrix(&bytes)
    } else {
        parse_csv(&bytes)
    }
}

pub fn write_csv(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_error)?;
    let header: Vec<String> = (0..m.cols()).map(|j| format!("col_{j}")).collect();
    w.write_record(&header).map_err(csv_error)?;
    for row in m.row_iter() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))
            .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv: {e}"))
}

/// Parses CSV numbers; a first record that is not numeric is a header.
pub fn parse_csv(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(csv_error)?;
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) => rows.push(values),
            Err(_) if line == 0 => continue,
            Err(e) => {
                return Err(Error::Format(format!("csv record {}: {e}", line + 1)));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::Format("csv holds no data rows".into()));
    }
    DenseMatrix::from_rows(&rows).map_err(|e| Error::Format(e.to_string()))
}

/// Labels are stored as an `N×1` matrix.
pub fn labels_to_matrix(y: &[f64]) -> DenseMatrix {
    DenseMatrix::new(y.len(), 1, y.to_vec()).expect("N×1 shape")
}

pub fn read_labels(path: &Path) -> Result<Vec<f64>> {
    let m = read_matrix(path)?;
    if m.cols() != 1 {
        return Err(Error::Format(format!(
            "labels must have one column, found {}",
            m.cols()
        )));
    }
    Ok(m.into_vec())
}

pub fn write_labels(path: &Path, y: &[f64]) -> Result<()> {
    write_matrix(path, &labels_to_matrix(y))
}

pub fn to_json_pretty<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_pretty(value)?)?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
