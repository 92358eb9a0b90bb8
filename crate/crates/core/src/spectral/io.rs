//! Binary field dumps.
//!
//! Layout, little-endian: magic `LAGF`, `u32` version, `u32` n, `u32` N,
//! `f64` L, `u32` component count, then each component's grid values in
//! row-major order.

use std::io::{Read, Write};

use super::field::ScalarField;
use super::grid::{Grid, GridSpec};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LAGF";
pub const VERSION: u32 = 1;

pub fn write_fields<W: Write>(mut w: W, fields: &[&ScalarField]) -> Result<()> {
    let grid = fields
        .first()
        .ok_or_else(|| Error::Format("no components to write".into()))?
        .grid();
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(grid.dim() as u32).to_le_bytes())?;
    w.write_all(&(grid.points() as u32).to_le_bytes())?;
    w.write_all(&grid.length().to_le_bytes())?;
    w.write_all(&(fields.len() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(grid.len() * 8);
    for f in fields {
        if f.grid() != grid {
            return Err(Error::GridMismatch);
        }
        buf.clear();
        for v in f.values() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a dump back into its grid and components.
pub fn read_fields<R: Read>(mut r: R) -> Result<(Grid, Vec<ScalarField>)> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = read_u32(&mut r)? as usize;
    let points = read_u32(&mut r)? as usize;
    let mut lb = [0u8; 8];
    r.read_exact(&mut lb)
        .map_err(|_| Error::Format("truncated header".into()))?;
    let length = f64::from_le_bytes(lb);
    let count = read_u32(&mut r)? as usize;
    let grid = Grid::new(GridSpec::new(dim, points).with_length(length))?;
    let mut bytes = vec![0u8; grid.len() * 8];
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut bytes)
            .map_err(|_| Error::Format("truncated payload".into()))?;
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        out.push(ScalarField::from_values(&grid, values));
    }
    Ok((grid, out))
}
