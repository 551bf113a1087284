//! Binary checkpoints: magic `FHNLS001`, a little-endian header, then the
//! field as interleaved `(re, im)` f64 pairs in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{build_grid, ComplexField, Space, SpectralError};

pub const MAGIC: &[u8; 8] = b"FHNLS001";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),
    #[error("checkpoint grid is not cubic: {0:?}")]
    NonCubic(Vec<u32>),
    #[error("invalid lambda byte {0}")]
    InvalidLambda(i8),
    #[error("field must be in physical space")]
    NotPhysical,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A saved solution with the parameters needed to continue it.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub field: ComplexField,
    pub t: f64,
    pub dt: f64,
    pub mass: f64,
    pub alpha: f64,
    pub gamma: f64,
    pub lambda: i8,
}

impl Checkpoint {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), CheckpointError> {
        if self.field.space() != Space::Physical {
            return Err(CheckpointError::NotPhysical);
        }
        let grid = self.field.grid();
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u8(grid.dim() as u8)?;
        for _ in 0..grid.dim() {
            w.write_u32::<LittleEndian>(grid.points_per_axis() as u32)?;
        }
        for v in [
            grid.half_length(),
            self.t,
            self.dt,
            self.mass,
            self.alpha,
            self.gamma,
        ] {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.write_i8(self.lambda)?;
        for v in self.field.values() {
            w.write_f64::<LittleEndian>(v.re)?;
            w.write_f64::<LittleEndian>(v.im)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(CheckpointError::UnsupportedVersion(version));
        }
        let dim = r.read_u8()? as usize;
        if !(1..=3).contains(&dim) {
            return Err(SpectralError::InvalidGrid(format!("dimension {dim}")).into());
        }
        let mut points = Vec::with_capacity(dim);
        for _ in 0..dim {
            points.push(r.read_u32::<LittleEndian>()?);
        }
        if points.iter().any(|&p| p != points[0]) {
            return Err(CheckpointError::NonCubic(points));
        }
        let mut header = [0.0; 6];
        for v in header.iter_mut() {
            *v = r.read_f64::<LittleEndian>()?;
        }
        let [half_length, t, dt, mass, alpha, gamma] = header;
        let lambda = r.read_i8()?;
        if lambda != 1 && lambda != -1 {
            return Err(CheckpointError::InvalidLambda(lambda));
        }
        let grid = build_grid(dim, points[0] as usize, half_length)?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let re = r.read_f64::<LittleEndian>()?;
            let im = r.read_f64::<LittleEndian>()?;
            values.push(Complex64::new(re, im));
        }
        let field = ComplexField::new(&grid, values, Space::Physical)?;
        Ok(Checkpoint {
            field,
            t,
            dt,
            mass,
            alpha,
            gamma,
            lambda,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), CheckpointError> {
        self.write_to(BufWriter::new(File::create(path)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, CheckpointError> {
        Self::read_from(BufReader::new(File::open(path)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Checkpoint {
        let g = build_grid(2, 8, 3.0).unwrap();
        let field = ComplexField::from_fn(&g, |x| Complex64::new(x[0], -x[1] * 0.5));
        Checkpoint {
            field,
            t: 1.25,
            dt: 1e-3,
            mass: 1.0,
            alpha: 1.5,
            gamma: 1.5,
            lambda: -1,
        }
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let c = sample();
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 1 + 2 * 4 + 6 * 8 + 1 + 64 * 16);
        assert_eq!(&buf[..8], b"FHNLS001");
        let back = Checkpoint::read_from(buf.as_slice()).unwrap();
        assert_eq!(back.field.values(), c.field.values());
        assert_eq!(back.field.grid(), c.field.grid());
        assert_eq!(
            (
                back.t,
                back.dt,
                back.mass,
                back.alpha,
                back.gamma,
                back.lambda
            ),
            (1.25, 1e-3, 1.0, 1.5, 1.5, -1)
        );
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            Checkpoint::read_from(bad.as_slice()),
            Err(CheckpointError::BadMagic)
        ));
        let mut bad = buf.clone();
        bad[8] = 9;
        assert!(matches!(
            Checkpoint::read_from(bad.as_slice()),
            Err(CheckpointError::UnsupportedVersion(9))
        ));
        assert!(Checkpoint::read_from(&buf[..buf.len() - 3]).is_err());
    }
}
