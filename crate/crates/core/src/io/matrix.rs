//! Binary matrix container.
//!
//! Layout: 16-byte header (`b"HMAT"`, rows: u32, cols: u32, reserved: u32 = 0),
//! then `rows * cols` row-major little-endian `f32` values.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

pub const MATRIX_MAGIC: [u8; 4] = *b"HMAT";

pub fn write_matrix_to<W: Write>(mut w: W, m: &Array2<f64>) -> Result<()> {
    let (rows, cols) = m.dim();
    let rows32 = u32::try_from(rows).map_err(|_| Error::invalid("too many rows"))?;
    let cols32 = u32::try_from(cols).map_err(|_| Error::invalid("too many columns"))?;
    let mut buf = Vec::with_capacity(16 + 4 * rows * cols);
    buf.extend_from_slice(&MATRIX_MAGIC);
    buf.extend_from_slice(&rows32.to_le_bytes());
    buf.extend_from_slice(&cols32.to_le_bytes());
    buf.extend_from_slice(&0u32.to_le_bytes());
    for &v in m.iter() {
        buf.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_matrix_from<R: Read>(mut r: R) -> Result<Array2<f64>> {
    let mut header = [0u8; 16];
    r.read_exact(&mut header)
        .map_err(|_| Error::MatrixFormat("truncated header".into()))?;
    if header[..4] != MATRIX_MAGIC {
        return Err(Error::MatrixFormat(format!("bad magic {:?}", &header[..4])));
    }
    let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().unwrap()) as usize;
    let (rows, cols) = (word(4), word(8));
    let mut body = Vec::new();
    r.read_to_end(&mut body)?;
    if body.len() != 4 * rows * cols {
        return Err(Error::MatrixFormat(format!(
            "expected {} data bytes for {rows}x{cols}, found {}",
            4 * rows * cols,
            body.len()
        )));
    }
    let values = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), values).expect("length checked"))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<()> {
    let mut buf = Vec::new();
    write_matrix_to(&mut buf, m)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    read_matrix_from(fs::File::open(path)?)
}
