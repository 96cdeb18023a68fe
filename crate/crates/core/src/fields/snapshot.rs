//! `KSF1` field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes | content |
//! |-------|---------|
//! | 4     | magic `KSF1` |
//! | 4     | `u32` nx |
//! | 4     | `u32` ny |
//! | 4     | `u32` flags |
//! | 8·nx·ny | `f64` values, y-major (`j * nx + i`) |
//! | 32    | `f64` lx, ly, t, reserved |

use std::io::{Read, Write};

use super::{Grid2D, ScalarField};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"KSF1";

/// Set when the field left the finite range or crossed the divergence ceiling.
pub const FLAG_DIVERGED: u32 = 1;

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub field: ScalarField,
    pub time: f64,
    pub flags: u32,
}

pub fn write_snapshot<W: Write>(mut w: W, field: &ScalarField, time: f64) -> Result<()> {
    let g = field.grid();
    let nx = u32::try_from(g.nx()).map_err(|_| Error::Snapshot("nx exceeds u32".into()))?;
    let ny = u32::try_from(g.ny()).map_err(|_| Error::Snapshot("ny exceeds u32".into()))?;
    let flags = if field.is_diverged() { FLAG_DIVERGED } else { 0 };

    let mut buf = Vec::with_capacity(16 + 8 * g.len() + 32);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&nx.to_le_bytes());
    buf.extend_from_slice(&ny.to_le_bytes());
    buf.extend_from_slice(&flags.to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for v in [g.lx(), g.ly(), time, 0.0] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Snapshot> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)?;
    if &header[..4] != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap());
    let (nx, ny, flags) = (word(4) as usize, word(8) as usize, word(12));

    let mut body = vec![0u8; 8 * nx * ny + 32];
    r.read_exact(&mut body)?;
    let mut floats = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    let values: Vec<f64> = floats.by_ref().take(nx * ny).collect();
    let lx = floats.next().unwrap_or(f64::NAN);
    let ly = floats.next().unwrap_or(f64::NAN);
    let time = floats.next().unwrap_or(f64::NAN);

    let grid = Grid2D::new(nx, ny, lx, ly).map_err(|e| Error::Snapshot(e.to_string()))?;
    let mut field = ScalarField::from_values(&grid, values)?;
    if flags & FLAG_DIVERGED != 0 {
        field.mark_diverged();
    }
    Ok(Snapshot { field, time, flags })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_bit_exact() {
        let g = Grid2D::new(4, 5, 1.0, 2.5).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| x - 3.0 * y);
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &u, 0.125).unwrap();

        assert_eq!(bytes.len(), 16 + 8 * 20 + 32);
        assert_eq!(&bytes[..4], b"KSF1");
        assert_eq!(&bytes[4..8], &4u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &5u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &0u32.to_le_bytes());
        // second value is node (i = 1, j = 0)
        assert_eq!(&bytes[24..32], &u.get(1, 0).to_le_bytes());
        let tail = &bytes[16 + 160..];
        assert_eq!(&tail[..8], &1.0f64.to_le_bytes());
        assert_eq!(&tail[8..16], &2.5f64.to_le_bytes());
        assert_eq!(&tail[16..24], &0.125f64.to_le_bytes());
        assert_eq!(&tail[24..32], &0.0f64.to_le_bytes());

        let snap = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(snap.time, 0.125);
        assert_eq!(snap.flags, 0);
        assert_eq!(snap.field.values(), u.values());
    }

    #[test]
    fn diverged_flag_survives() {
        let g = Grid2D::new(4, 4, 1.0, 1.0).unwrap();
        let mut u = ScalarField::constant(&g, f64::INFINITY);
        u.mark_diverged();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &u, 1.0).unwrap();
        let snap = read_snapshot(bytes.as_slice()).unwrap();
        assert_eq!(snap.flags, FLAG_DIVERGED);
        assert!(snap.field.is_diverged());
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        let g = Grid2D::new(4, 4, 1.0, 1.0).unwrap();
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &ScalarField::zeros(&g), 0.0).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(read_snapshot(bad.as_slice()), Err(Error::Snapshot(_))));
        assert!(read_snapshot(&bytes[..40]).is_err());
    }
}
