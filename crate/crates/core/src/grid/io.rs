//! Grid file formats.
//!
//! CSV: first line is the comma-separated dims `m1,...,md`; the remaining
//! lines hold the values in row-major order, one line per run of the last
//! axis. Binary: ASCII magic `MSGD`, `u32` d, `u32` dims, then `f64` values,
//! all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use super::GridField;
use crate::error::{Error, Result};

pub const BINARY_MAGIC: &[u8; 4] = b"MSGD";

pub fn write_grid_csv<W: Write>(grid: &GridField, mut out: W) -> Result<()> {
    let header: Vec<String> = grid.dims().iter().map(|m| m.to_string()).collect();
    writeln!(out, "{}", header.join(","))?;
    let row = *grid.dims().last().unwrap();
    for chunk in grid.values().chunks(row) {
        let line: Vec<String> = chunk.iter().map(|v| format!("{:?}", v)).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_grid_csv<R: Read>(mut input: R) -> Result<GridField> {
    let mut text = String::new();
    input.read_to_string(&mut text)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Corrupt("empty grid csv".into()))?;
    let dims = header
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("dims header {:?}: {}", t, e)))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut values = Vec::new();
    for line in lines {
        for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            values.push(
                tok.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("value {:?}: {}", tok, e)))?,
            );
        }
    }
    GridField::new(dims, values)
}

pub fn write_grid_binary<W: Write>(grid: &GridField, mut out: W) -> Result<()> {
    out.write_all(BINARY_MAGIC)?;
    out.write_all(&(grid.d() as u32).to_le_bytes())?;
    for &m in grid.dims() {
        let m = u32::try_from(m).map_err(|_| Error::InvalidDims(format!("{} exceeds u32", m)))?;
        out.write_all(&m.to_le_bytes())?;
    }
    for v in grid.values() {
        out.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_grid_binary<R: Read>(mut input: R) -> Result<GridField> {
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() < 8 || &bytes[..4] != BINARY_MAGIC {
        return Err(Error::Corrupt("missing MSGD magic".into()));
    }
    let u32_at = |at: usize| -> Result<u32> {
        bytes
            .get(at..at + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::Corrupt("truncated header".into()))
    };
    let d = u32_at(4)? as usize;
    let dims = (0..d)
        .map(|k| u32_at(8 + 4 * k).map(|m| m as usize))
        .collect::<Result<Vec<_>>>()?;
    let start = 8 + 4 * d;
    let body = &bytes[start..];
    if body.len() % 8 != 0 {
        return Err(Error::Corrupt("value block is not a multiple of 8 bytes".into()));
    }
    let values = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    GridField::new(dims, values)
}

/// Reads a grid, choosing the format from the file's leading bytes.
pub fn read_grid(path: &Path) -> Result<GridField> {
    let bytes = std::fs::read(path)?;
    if bytes.starts_with(BINARY_MAGIC) {
        read_grid_binary(&bytes[..])
    } else {
        read_grid_csv(&bytes[..])
    }
}
