//! Binary dump of `(M, b, v)` triples for offline solver debugging.
//!
//! Layout, all little endian: the 8-byte magic `R1SDUMP1`, `u64` rows,
//! `u64` cols, `rows·cols` `f64` entries of `M` in row-major order, `rows`
//! `f64` entries of `b`, `u64` length of `v`, then `v`.

use std::io::{Read, Write};

use crate::numerics::DenseMatrix;
use crate::{Error, Result, Scalar};

pub const MAGIC: &[u8; 8] = b"R1SDUMP1";

#[derive(Clone, Debug, PartialEq)]
pub struct RegressionDump<T> {
    pub design: DenseMatrix<T>,
    pub b: Vec<T>,
    pub v: Vec<T>,
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_values<T: Scalar>(w: &mut impl Write, values: &[T]) -> Result<()> {
    for v in values {
        w.write_all(&v.as_f64().to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_values<T: Scalar>(r: &mut impl Read, n: usize) -> Result<Vec<T>> {
    let mut buf = [0u8; 8];
    (0..n)
        .map(|_| {
            r.read_exact(&mut buf)?;
            Ok(T::of(f64::from_le_bytes(buf)))
        })
        .collect()
}

impl<T: Scalar> RegressionDump<T> {
    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        if self.b.len() != self.design.rows() {
            return Err(Error::dims("b length does not match design rows"));
        }
        w.write_all(MAGIC)?;
        write_u64(&mut w, self.design.rows() as u64)?;
        write_u64(&mut w, self.design.cols() as u64)?;
        write_values(&mut w, self.design.as_slice())?;
        write_values(&mut w, &self.b)?;
        write_u64(&mut w, self.v.len() as u64)?;
        write_values(&mut w, &self.v)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::Format("bad magic".into()));
        }
        let rows = read_u64(&mut r)? as usize;
        let cols = read_u64(&mut r)? as usize;
        let design = DenseMatrix::new(rows, cols, read_values(&mut r, rows * cols)?)?;
        let b = read_values(&mut r, rows)?;
        let n = read_u64(&mut r)? as usize;
        let v = read_values(&mut r, n)?;
        Ok(RegressionDump { design, b, v })
    }
}
