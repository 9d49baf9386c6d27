//! Matrix files.
//!
//! USM binary layout (all little-endian):
//!
//! ```text
//! offset 0   b"USM1"
//! offset 4   u32 rows
//! offset 8   u32 cols
//! offset 12  u32 reserved (zero)
//! offset 16  rows*cols binary64 values, column-major
//! ```
//!
//! CSV: one matrix row per line, comma separated, no header.

use std::fs;
use std::path::Path;

use crate::model::SampleMatrix;
use crate::{Error, Result, Scalar};

pub const USM_MAGIC: &[u8; 4] = b"USM1";
pub const USM_HEADER_LEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Usm,
    Csv,
}

impl MatrixFormat {
    /// Picks a format from the file extension; anything but `.csv` is USM.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Usm,
        }
    }
}

/// Reads a matrix, detecting USM by its magic bytes and falling back to CSV.
pub fn read_matrix<T: Scalar>(path: impl AsRef<Path>) -> Result<SampleMatrix<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_matrix(&bytes)
}

pub fn decode_matrix<T: Scalar>(bytes: &[u8]) -> Result<SampleMatrix<T>> {
    if bytes.starts_with(USM_MAGIC) {
        decode_usm(bytes)
    } else {
        let text = std::str::from_utf8(bytes)
            .map_err(|e| Error::malformed(format!("byte {}", e.valid_up_to()), "not UTF-8 text"))?;
        decode_csv(text)
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> u32 {
    u32::from_le_bytes(bytes[offset..offset + 4].try_into().unwrap())
}

fn decode_usm<T: Scalar>(bytes: &[u8]) -> Result<SampleMatrix<T>> {
    if bytes.len() < USM_HEADER_LEN {
        return Err(Error::malformed(
            format!("byte {}", bytes.len()),
            "truncated USM header",
        ));
    }
    let rows = read_u32(bytes, 4) as usize;
    let cols = read_u32(bytes, 8) as usize;
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyMatrix);
    }
    let payload = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| Error::malformed("header", format!("dimension overflow {rows}x{cols}")))?;
    let expected = USM_HEADER_LEN + payload;
    if bytes.len() != expected {
        return Err(Error::malformed(
            format!("byte {}", bytes.len().min(expected)),
            format!(
                "{rows}x{cols} matrix needs {expected} bytes, file has {}",
                bytes.len()
            ),
        ));
    }
    let mut values = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes[USM_HEADER_LEN..].chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(Error::NonFinite {
                row: i % rows,
                col: i / rows,
            });
        }
        values.push(T::lit(v));
    }
    SampleMatrix::from_column_major(rows, cols, values)
}

fn decode_csv<T: Scalar>(text: &str) -> Result<SampleMatrix<T>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (field_no, field) in line.split(',').enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::malformed(
                    format!("line {}, field {}", line_no + 1, field_no + 1),
                    format!("cannot parse {:?} as a number", field.trim()),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::NonFinite {
                    row: rows.len(),
                    col: field_no,
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::malformed(
                    format!("line {}", line_no + 1),
                    format!("expected {} fields, found {}", first.len(), row.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::EmptyMatrix);
    }
    let (m, n) = (rows.len(), rows[0].len());
    let mut values = Vec::with_capacity(m * n);
    for j in 0..n {
        for row in &rows {
            values.push(T::lit(row[j]));
        }
    }
    SampleMatrix::from_column_major(m, n, values)
}

pub fn encode_usm<T: Scalar>(m: &SampleMatrix<T>) -> Result<Vec<u8>> {
    let rows = u32::try_from(m.rows())
        .map_err(|_| Error::InvalidParameter("row count exceeds u32".into()))?;
    let cols = u32::try_from(m.cols())
        .map_err(|_| Error::InvalidParameter("column count exceeds u32".into()))?;
    let mut out = Vec::with_capacity(USM_HEADER_LEN + 8 * m.rows() * m.cols());
    out.extend_from_slice(USM_MAGIC);
    out.extend_from_slice(&rows.to_le_bytes());
    out.extend_from_slice(&cols.to_le_bytes());
    out.extend_from_slice(&0u32.to_le_bytes());
    for v in m.to_column_major() {
        out.extend_from_slice(&v.as_f64().to_le_bytes());
    }
    Ok(out)
}

/// Shortest round-trip decimal representation, one matrix row per line.
pub fn encode_csv<T: Scalar>(m: &SampleMatrix<T>) -> String {
    let view = m.view();
    let mut out = String::new();
    for row in view.rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{}", v.as_f64())).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix<T: Scalar>(
    m: &SampleMatrix<T>,
    path: impl AsRef<Path>,
    format: MatrixFormat,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = match format {
        MatrixFormat::Usm => encode_usm(m)?,
        MatrixFormat::Csv => encode_csv(m).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
