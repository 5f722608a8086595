//! Velocity/pressure snapshots and the `OBL1` binary format.
//!
//! Layout: magic `OBL1`, then little-endian `u32 nx`, `u32 ny`, `f64 Lx`,
//! `f64 Ly`, `f64 t`, `f64 nu`, then the row-major arrays `u1`, `u2`, `p`
//! of `nx * ny` doubles each.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::{Grid2, ScalarField2, VectorField2, BC_TOLERANCE};

const MAGIC: &[u8; 4] = b"OBL1";

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub nu: f64,
    pub u: VectorField2,
    pub p: ScalarField2,
}

impl Snapshot {
    pub fn grid(&self) -> &Grid2 {
        self.u.grid()
    }

    pub fn encode(&self) -> Vec<u8> {
        let g = self.grid();
        let mut buf = Vec::with_capacity(4 + 8 + 32 + 24 * g.len());
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&(g.nx as u32).to_le_bytes());
        buf.extend_from_slice(&(g.ny as u32).to_le_bytes());
        for v in [g.lx, g.ly, self.t, self.nu] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for f in [&self.u.c[0], &self.u.c[1], &self.p] {
            for v in f.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        buf
    }

    /// Decode a snapshot. The velocity is tagged no-slip when its wall rows
    /// vanish to the default tolerance.
    pub fn decode(mut bytes: &[u8]) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact(&mut bytes, &mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic, expected OBL1".into()));
        }
        let nx = read_u32(&mut bytes)? as usize;
        let ny = read_u32(&mut bytes)? as usize;
        let lx = read_f64(&mut bytes)?;
        let ly = read_f64(&mut bytes)?;
        let t = read_f64(&mut bytes)?;
        let nu = read_f64(&mut bytes)?;
        let grid = Grid2::new(lx, ly, nx, ny)?;
        let expected = 3 * grid.len() * 8;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "payload has {} bytes, expected {expected} for a {nx}x{ny} grid",
                bytes.len()
            )));
        }
        let mut arrays = Vec::with_capacity(3);
        for _ in 0..3 {
            let mut v = Vec::with_capacity(grid.len());
            for _ in 0..grid.len() {
                v.push(read_f64(&mut bytes)?);
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format("non-finite value in snapshot".into()));
            }
            arrays.push(ScalarField2::from_vec(&grid, v)?);
        }
        let p = arrays.pop().unwrap();
        let u2 = arrays.pop().unwrap();
        let u1 = arrays.pop().unwrap();
        let mut u = VectorField2::new(u1, u2);
        u.no_slip = u.wall_max() <= BC_TOLERANCE;
        Ok(Self { t, nu, u, p })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }
}

fn read_exact(src: &mut &[u8], out: &mut [u8]) -> Result<()> {
    src.read_exact(out)
        .map_err(|_| Error::Format("truncated snapshot".into()))
}

fn read_u32(src: &mut &[u8]) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(src, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(src: &mut &[u8]) -> Result<f64> {
    let mut b = [0u8; 8];
    read_exact(src, &mut b)?;
    Ok(f64::from_le_bytes(b))
}
