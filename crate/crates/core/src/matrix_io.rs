//! Plain-text and binary matrix files.
//!
//! Both formats start with the header `(n, d, radius)` followed by the `n²` entries in
//! row-major order. The window is rebuilt from the header as the box of that radius on a
//! lattice supplied by the reader; a header that does not match that box is rejected.
//!
//! CSV: the first line is `n,d,radius`, then one `re,im` line per entry.
//! Binary: the magic bytes, three little-endian `u64`, then little-endian `f64` pairs.

use std::io::{BufRead, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{make_window, Lattice};
use crate::operator::OperatorMatrix;

pub const BINARY_MAGIC: &[u8; 8] = b"ODMATRX1";

fn header_window(lattice: &Lattice, n: u64, d: u64, radius: u64) -> Result<Arc<crate::lattice::IndexWindow>> {
    if d as usize != lattice.dim() {
        return Err(Error::Parse(format!(
            "file dimension {d} does not match lattice dimension {}",
            lattice.dim()
        )));
    }
    let window = make_window(lattice, radius as usize)?;
    if window.len() as u64 != n {
        return Err(Error::Parse(format!(
            "header n = {n} but a radius {radius} box in dimension {d} has {} points",
            window.len()
        )));
    }
    Ok(Arc::new(window))
}

pub fn write_csv(a: &OperatorMatrix, mut out: impl Write) -> Result<()> {
    let w = a.window();
    writeln!(out, "{},{},{}", a.n(), w.dim(), w.radius())?;
    for z in a.entries() {
        // `{:?}` keeps enough digits to round-trip
        writeln!(out, "{:?},{:?}", z.re, z.im)?;
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(s: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: cannot parse {s:?}")))
}

pub fn read_csv(lattice: &Lattice, input: impl BufRead) -> Result<OperatorMatrix> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty file".into()))??;
    let fields: Vec<&str> = header.split(',').collect();
    if fields.len() != 3 {
        return Err(Error::Parse(format!("header must be n,d,radius, got {header:?}")));
    }
    let n: u64 = parse_field(fields[0], 1)?;
    let d: u64 = parse_field(fields[1], 1)?;
    let radius: u64 = parse_field(fields[2], 1)?;
    let window = header_window(lattice, n, d, radius)?;
    let count = window.len() * window.len();
    let mut entries = Vec::with_capacity(count);
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (re, im) = line
            .split_once(',')
            .ok_or_else(|| Error::Parse(format!("line {}: expected re,im", k + 2)))?;
        entries.push(Complex64::new(parse_field(re, k + 2)?, parse_field(im, k + 2)?));
    }
    if entries.len() != count {
        return Err(Error::Parse(format!("expected {count} entries, found {}", entries.len())));
    }
    OperatorMatrix::new(window, entries)
}

pub fn write_binary(a: &OperatorMatrix, mut out: impl Write) -> Result<()> {
    let w = a.window();
    out.write_all(BINARY_MAGIC)?;
    for v in [a.n() as u64, w.dim() as u64, w.radius() as u64] {
        out.write_all(&v.to_le_bytes())?;
    }
    for z in a.entries() {
        out.write_all(&z.re.to_le_bytes())?;
        out.write_all(&z.im.to_le_bytes())?;
    }
    Ok(())
}

fn read_u64(input: &mut impl Read) -> Result<u64> {
    let mut buf = [0u8; 8];
    input.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

fn read_f64(input: &mut impl Read) -> Result<f64> {
    Ok(f64::from_bits(read_u64(input)?))
}

pub fn read_binary(lattice: &Lattice, mut input: impl Read) -> Result<OperatorMatrix> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != BINARY_MAGIC {
        return Err(Error::Parse("not an offdecay matrix file".into()));
    }
    let n = read_u64(&mut input)?;
    let d = read_u64(&mut input)?;
    let radius = read_u64(&mut input)?;
    let window = header_window(lattice, n, d, radius)?;
    let count = window.len() * window.len();
    let mut entries = Vec::with_capacity(count);
    for _ in 0..count {
        let re = read_f64(&mut input)?;
        let im = read_f64(&mut input)?;
        entries.push(Complex64::new(re, im));
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Parse(format!("{} trailing bytes", rest.len())));
    }
    OperatorMatrix::new(window, entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> OperatorMatrix {
        let w = Arc::new(make_window(&Lattice::integer(2), 1).unwrap());
        OperatorMatrix::from_fn(w, |i, j| Complex64::new(1.0 / (1 + i + 2 * j) as f64, i as f64 - 0.1 * j as f64))
            .unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let a = sample();
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("9,2,1\n"));
        let b = read_csv(&Lattice::integer(2), buf.as_slice()).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn binary_round_trip() {
        let a = sample();
        let mut buf = Vec::new();
        write_binary(&a, &mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 24 + 81 * 16);
        let b = read_binary(&Lattice::integer(2), buf.as_slice()).unwrap();
        assert_eq!(a.entries(), b.entries());
    }

    #[test]
    fn rejects_mismatches() {
        let a = sample();
        let mut buf = Vec::new();
        write_csv(&a, &mut buf).unwrap();
        assert!(read_csv(&Lattice::integer(1), buf.as_slice()).is_err());
        assert!(read_csv(&Lattice::integer(2), &b"10,2,1\n"[..]).is_err());
        assert!(read_csv(&Lattice::integer(2), &b"9,2,1\n1,0\n"[..]).is_err());
        let mut bin = Vec::new();
        write_binary(&a, &mut bin).unwrap();
        bin.push(0);
        assert!(read_binary(&Lattice::integer(2), bin.as_slice()).is_err());
        bin[0] = b'X';
        assert!(read_binary(&Lattice::integer(2), bin.as_slice()).is_err());
    }
}
