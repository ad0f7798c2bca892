//! `BSF1` field files.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 0–3   | magic `42 53 46 31` (`"BSF1"`) |
//! | 4     | version = 1 |
//! | 5     | component count, 1 or 3 |
//! | 6–7   | reserved, zero |
//! | 8–19  | `nx, ny, nz` as u32, all equal |
//! | 20–27 | box length `L` as f64 |
//! | 28–   | `ncomp·n³` f64 samples, x-fastest, components consecutive |

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{AnyField, Grid3, ScalarField, VectorField};

pub const MAGIC: [u8; 4] = *b"BSF1";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 28;

fn format_err<T>(offset: usize, msg: impl Into<String>) -> Result<T> {
    Err(Error::Format { offset: offset as u64, msg: msg.into() })
}

pub fn encode(field: &AnyField) -> Vec<u8> {
    let grid = field.grid();
    let comps = field.components();
    let n = grid.n() as u32;
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * comps.len() * grid.len());
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(comps.len() as u8);
    out.extend_from_slice(&[0, 0]);
    for _ in 0..3 {
        out.extend_from_slice(&n.to_le_bytes());
    }
    out.extend_from_slice(&grid.length().to_le_bytes());
    for c in comps {
        for v in c.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<AnyField> {
    if bytes.len() < HEADER_LEN {
        return format_err(bytes.len(), format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()));
    }
    if bytes[0..4] != MAGIC {
        return format_err(0, format!("bad magic {:02x?}", &bytes[0..4]));
    }
    if bytes[4] != VERSION {
        return format_err(4, format!("unsupported version {}", bytes[4]));
    }
    let ncomp = bytes[5] as usize;
    if ncomp != 1 && ncomp != 3 {
        return format_err(5, format!("component count {ncomp} is not 1 or 3"));
    }
    if bytes[6] != 0 || bytes[7] != 0 {
        return format_err(6, "reserved bytes are not zero");
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let (nx, ny, nz) = (dim(8), dim(12), dim(16));
    if ny != nx {
        return format_err(12, format!("dimension mismatch: nx={nx}, ny={ny}"));
    }
    if nz != nx {
        return format_err(16, format!("dimension mismatch: nx={nx}, nz={nz}"));
    }
    let length = f64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let grid = Grid3::new(nx, length)?;

    let expected = HEADER_LEN + 8 * ncomp * grid.len();
    if bytes.len() < expected {
        return format_err(bytes.len(), format!("truncated payload: expected {expected} bytes"));
    }
    if bytes.len() > expected {
        return format_err(expected, format!("{} trailing bytes", bytes.len() - expected));
    }

    let mut comps = Vec::with_capacity(ncomp);
    for c in 0..ncomp {
        let start = HEADER_LEN + 8 * c * grid.len();
        let mut data = Vec::with_capacity(grid.len());
        for s in 0..grid.len() {
            let at = start + 8 * s;
            let v = f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap());
            if !v.is_finite() {
                return format_err(at, "non-finite sample");
            }
            data.push(v);
        }
        comps.push(ScalarField::from_parts_unchecked(grid, data));
    }
    Ok(if ncomp == 1 {
        AnyField::Scalar(comps.pop().unwrap())
    } else {
        let c = comps.pop().unwrap();
        let b = comps.pop().unwrap();
        let a = comps.pop().unwrap();
        AnyField::Vector(VectorField::new([a, b, c])?)
    })
}

pub fn write_field(field: &AnyField, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode(field))?;
    Ok(())
}

pub fn read_field(path: impl AsRef<Path>) -> Result<AnyField> {
    decode(&fs::read(path)?)
}
