//! Binary dense-matrix persistence.
//!
//! Layout: 4 magic bytes, u32 version, u64 rows, u64 cols, row-major
//! little-endian f32 payload, then a CRC32 of everything before it.
//! Values are stored at f32 precision regardless of the in-memory scalar;
//! an `f32` pipeline round-trips bit-exactly.

use crate::num::Real;
use ndarray::{Array2, ArrayView2};
use std::io::{Read, Write};
use std::path::Path;
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"PFMX";
pub const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum MatrixIoError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic bytes (not a matrix file)")]
    BadMagic,
    #[error("unsupported matrix file version {0}")]
    BadVersion(u32),
    #[error("matrix file truncated or corrupt: {0}")]
    Corrupt(String),
    #[error("checksum mismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("non-finite value at row {row}, col {col}")]
    NonFinite { row: usize, col: usize },
}

pub type Result<T> = std::result::Result<T, MatrixIoError>;

/// Write a matrix; returns the CRC32 so sidecar metadata can pin the pair.
pub fn write_matrix<T: Real>(path: &Path, m: ArrayView2<'_, T>) -> Result<u32> {
    let (rows, cols) = m.dim();
    let mut buf = Vec::with_capacity(20 + rows * cols * 4);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(rows as u64).to_le_bytes());
    buf.extend_from_slice(&(cols as u64).to_le_bytes());
    for value in m.iter() {
        let v = value.to_f32().unwrap_or(f32::NAN);
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&buf);
    let mut file = std::fs::File::create(path)?;
    file.write_all(&buf)?;
    file.write_all(&crc.to_le_bytes())?;
    Ok(crc)
}

/// Read a matrix back, verifying magic, version, shape and checksum.
pub fn read_matrix<T: Real>(path: &Path) -> Result<(Array2<T>, u32)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 24 + 4 {
        return Err(MatrixIoError::Corrupt(format!("file too short ({} bytes)", bytes.len())));
    }
    if bytes[0..4] != MAGIC {
        return Err(MatrixIoError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(MatrixIoError::BadVersion(version));
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let payload_end = 24usize
        .checked_add(rows.checked_mul(cols).and_then(|n| n.checked_mul(4)).ok_or_else(
            || MatrixIoError::Corrupt("shape overflow".to_string()),
        )?)
        .ok_or_else(|| MatrixIoError::Corrupt("shape overflow".to_string()))?;
    if bytes.len() != payload_end + 4 {
        return Err(MatrixIoError::Corrupt(format!(
            "expected {} bytes for a {rows}x{cols} matrix, found {}",
            payload_end + 4,
            bytes.len()
        )));
    }
    let stored = u32::from_le_bytes(bytes[payload_end..payload_end + 4].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..payload_end]);
    if stored != computed {
        return Err(MatrixIoError::ChecksumMismatch { stored, computed });
    }
    let mut data = Vec::with_capacity(rows * cols);
    for (i, chunk) in bytes[24..payload_end].chunks_exact(4).enumerate() {
        let v = f32::from_le_bytes(chunk.try_into().unwrap());
        if !v.is_finite() {
            return Err(MatrixIoError::NonFinite { row: i / cols.max(1), col: i % cols.max(1) });
        }
        data.push(T::from_f64_lossy(f64::from(v)));
    }
    let m = Array2::from_shape_vec((rows, cols), data)
        .map_err(|e| MatrixIoError::Corrupt(e.to_string()))?;
    Ok((m, stored))
}
