//! ELSF binary snapshots.
//!
//! Layout (little-endian): magic `ELSF`, version `u32 = 1`, dim `u32`, res `u32`,
//! box_len `f64`, time `f64`, ncomp `u32`, then `ncomp·M^dim` complex
//! coefficients as interleaved `(re, im)` `f64` pairs, component-major and
//! row-major over FFT mode indices (index `i` along an axis is mode `wrap(i)`).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::spectral::{Grid, SpectralField};

pub const MAGIC: &[u8; 4] = b"ELSF";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(out: &mut W, field: &SpectralField, time: f64) -> Result<()> {
    let grid = field.grid();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(grid.dim() as u32).to_le_bytes())?;
    out.write_all(&(grid.res() as u32).to_le_bytes())?;
    out.write_all(&grid.box_len().to_le_bytes())?;
    out.write_all(&time.to_le_bytes())?;
    out.write_all(&(field.ncomp() as u32).to_le_bytes())?;
    let mut buf = Vec::with_capacity(field.coeffs().len() * 16);
    for c in field.coeffs() {
        buf.extend_from_slice(&c.re.to_le_bytes());
        buf.extend_from_slice(&c.im.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Reads one snapshot, returning the field and its time stamp.
pub fn read_snapshot<R: Read>(input: &mut R) -> Result<(SpectralField, f64)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!("bad magic {magic:?}")));
    }
    let version = read_u32(input)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported version {version}")));
    }
    let dim = read_u32(input)? as usize;
    let res = read_u32(input)? as usize;
    let box_len = read_f64(input)?;
    let time = read_f64(input)?;
    let ncomp = read_u32(input)? as usize;
    let grid = Grid::new(dim, res, box_len)?;
    if ncomp == 0 || ncomp > 64 {
        return Err(Error::Format(format!(
            "implausible component count {ncomp}"
        )));
    }
    let count = ncomp * grid.npoints();
    let mut raw = vec![0u8; count * 16];
    input.read_exact(&mut raw)?;
    let coeffs = raw
        .chunks_exact(16)
        .map(|b| {
            let re = f64::from_le_bytes(b[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(b[8..].try_into().expect("8 bytes"));
            Complex64::new(re, im)
        })
        .collect();
    Ok((SpectralField::from_coeffs(&grid, ncomp, coeffs)?, time))
}

pub fn save(path: &Path, field: &SpectralField, time: f64) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_snapshot(&mut w, field, time)?;
    w.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(SpectralField, f64)> {
    read_snapshot(&mut BufReader::new(File::open(path)?))
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout_is_fixed() {
        let g = Grid::new(2, 8, 3.5).unwrap();
        let mut f = SpectralField::zeros(&g, 1);
        f.coeffs_mut()[1] = Complex64::new(1.5, -2.0);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, 0.25).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 4 + 4 + 8 + 8 + 4 + 64 * 16);
        assert_eq!(&buf[..4], b"ELSF");
        assert_eq!(u32::from_le_bytes(buf[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(buf[8..12].try_into().unwrap()), 2);
        assert_eq!(u32::from_le_bytes(buf[12..16].try_into().unwrap()), 8);
        assert_eq!(f64::from_le_bytes(buf[16..24].try_into().unwrap()), 3.5);
        assert_eq!(f64::from_le_bytes(buf[24..32].try_into().unwrap()), 0.25);
        assert_eq!(u32::from_le_bytes(buf[32..36].try_into().unwrap()), 1);
        // second coefficient, real then imaginary part
        assert_eq!(f64::from_le_bytes(buf[52..60].try_into().unwrap()), 1.5);
        assert_eq!(f64::from_le_bytes(buf[60..68].try_into().unwrap()), -2.0);
    }

    #[test]
    fn rejects_corrupt_input() {
        let mut bad = b"ELSX".to_vec();
        bad.extend_from_slice(&[0u8; 40]);
        assert!(read_snapshot(&mut bad.as_slice()).is_err());

        let g = Grid::new(2, 8, 1.0).unwrap();
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &SpectralField::zeros(&g, 2), 0.0).unwrap();
        buf.truncate(buf.len() - 3);
        assert!(read_snapshot(&mut buf.as_slice()).is_err());
    }
}
