//! The `LFME` little-endian binary matrix format.
//!
//! Layout: magic `LFME`, version `u32`, rows `u64`, cols `u32`, dtype `u8`
//! (0 = f32, 1 = f64), then the row-major payload.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LFME";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 8 + 4 + 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

/// Encodes a matrix into an in-memory `LFME` buffer.
pub fn encode(matrix: &DMatrix<f64>, dtype: Dtype) -> Vec<u8> {
    let (rows, cols) = matrix.shape();
    let mut buf = Vec::with_capacity(HEADER_LEN + rows * cols * dtype.width());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    buf.push(dtype.code());
    for i in 0..rows {
        for j in 0..cols {
            let v = matrix[(i, j)];
            match dtype {
                Dtype::F32 => buf.extend_from_slice(&(v as f32).to_le_bytes()),
                Dtype::F64 => buf.extend_from_slice(&v.to_le_bytes()),
            }
        }
    }
    buf
}

/// Decodes an `LFME` buffer. `origin` only labels error messages.
pub fn decode(bytes: &[u8], origin: &Path) -> Result<DMatrix<f64>> {
    let bad = |message: String| Error::Parse {
        path: origin.to_path_buf(),
        line: 0,
        message,
    };
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[0..4] != MAGIC {
        return Err(bad("bad magic, expected LFME".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(Error::VersionMismatch {
            expected: VERSION,
            found: version,
        });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[16..20].try_into().unwrap()) as usize;
    let dtype = match bytes[20] {
        0 => Dtype::F32,
        1 => Dtype::F64,
        other => return Err(bad(format!("field dtype: unknown code {other}"))),
    };
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(dtype.width()))
        .ok_or_else(|| bad("field n/d: size overflow".into()))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() != expected {
        return Err(bad(format!(
            "payload is {} bytes, header declares {rows}x{cols} ({expected} bytes)",
            payload.len()
        )));
    }
    let w = dtype.width();
    let values = payload.chunks_exact(w).map(|c| match dtype {
        Dtype::F32 => f32::from_le_bytes(c.try_into().unwrap()) as f64,
        Dtype::F64 => f64::from_le_bytes(c.try_into().unwrap()),
    });
    Ok(DMatrix::from_row_iterator(rows, cols, values))
}

pub fn write_matrix(path: &Path, matrix: &DMatrix<f64>, dtype: Dtype) -> Result<()> {
    let buf = encode(matrix, dtype);
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf).map_err(|e| Error::io(path, e))?;
    decode(&buf, path)
}
