//! File formats: PSDM matrices, LRKF factors, CSV matrices and vectors.
//!
//! Binary formats are little-endian throughout. CSV floats use Rust's
//! shortest round-trip representation, so CSV round trips are exact too.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lowrank::LowRankFactor;
use crate::matrix::PsdMatrix;

pub const PSDM_MAGIC: &[u8; 4] = b"PSDM";
pub const LRKF_MAGIC: &[u8; 4] = b"LRKF";
pub const FORMAT_VERSION: u32 = 1;

fn format_err(format: &'static str, reason: impl Into<String>) -> Error {
    Error::Format { format, reason: reason.into() }
}

struct Cursor<'b> {
    bytes: &'b [u8],
    pos: usize,
    format: &'static str,
}

impl<'b> Cursor<'b> {
    fn take(&mut self, len: usize) -> Result<&'b [u8]> {
        let end = self.pos.checked_add(len).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| format_err(self.format, "unexpected end of data"))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn size(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v).map_err(|_| format_err(self.format, format!("size {v} does not fit in memory")))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>> {
        let len = count.checked_mul(8).ok_or_else(|| format_err(self.format, "size overflow"))?;
        let raw = self.take(len)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(format_err(self.format, "bad magic bytes"));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(format_err(self.format, format!("unsupported version {version}")));
        }
        Ok(())
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(format_err(self.format, format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

fn push_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

fn push_row_major(out: &mut Vec<u8>, m: &DMatrix<f64>) {
    for i in 0..m.nrows() {
        push_f64s(out, m.row(i).iter().copied());
    }
}

pub fn psdm_to_bytes(a: &PsdMatrix) -> Vec<u8> {
    let n = a.n();
    let mut out = Vec::with_capacity(16 + 8 * n * n);
    out.extend_from_slice(PSDM_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    push_row_major(&mut out, a.as_dmatrix());
    out
}

/// Parses a PSDM image. An asymmetric payload is canonicalised from its lower
/// triangle; PSD-ness is not checked here.
pub fn psdm_from_bytes(bytes: &[u8]) -> Result<PsdMatrix> {
    let mut c = Cursor { bytes, pos: 0, format: "PSDM" };
    c.header(PSDM_MAGIC)?;
    let n = c.size()?;
    let count = n.checked_mul(n).ok_or_else(|| format_err("PSDM", "size overflow"))?;
    let values = c.f64s(count)?;
    c.finish()?;
    PsdMatrix::from_row_major(n, values)
}

pub fn write_psdm(path: &Path, a: &PsdMatrix) -> Result<()> {
    Ok(fs::write(path, psdm_to_bytes(a))?)
}

pub fn read_psdm(path: &Path) -> Result<PsdMatrix> {
    psdm_from_bytes(&fs::read(path)?)
}

pub fn lrkf_to_bytes(f: &LowRankFactor) -> Vec<u8> {
    let (n, k) = (f.n(), f.width());
    let mut out = Vec::with_capacity(25 + 16 * n * k);
    out.extend_from_slice(LRKF_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u64).to_le_bytes());
    out.extend_from_slice(&(k as u64).to_le_bytes());
    out.push(u8::from(f.symmetric_psd));
    push_row_major(&mut out, &f.left);
    push_row_major(&mut out, &f.right);
    out
}

pub fn lrkf_from_bytes(bytes: &[u8]) -> Result<LowRankFactor> {
    let mut c = Cursor { bytes, pos: 0, format: "LRKF" };
    c.header(LRKF_MAGIC)?;
    let n = c.size()?;
    let k = c.size()?;
    let flag = c.u8()?;
    if flag > 1 {
        return Err(format_err("LRKF", format!("flag byte {flag} is not 0 or 1")));
    }
    let count = n.checked_mul(k).ok_or_else(|| format_err("LRKF", "size overflow"))?;
    let left = DMatrix::from_row_slice(n, k, &c.f64s(count)?);
    let right = DMatrix::from_row_slice(n, k, &c.f64s(count)?);
    c.finish()?;
    if flag == 1 {
        if left != right {
            return Err(format_err("LRKF", "symmetric flag set but factors differ"));
        }
        Ok(LowRankFactor::symmetric(left))
    } else {
        LowRankFactor::new(left, right)
    }
}

pub fn write_lrkf(path: &Path, f: &LowRankFactor) -> Result<()> {
    Ok(fs::write(path, lrkf_to_bytes(f))?)
}

pub fn read_lrkf(path: &Path) -> Result<LowRankFactor> {
    lrkf_from_bytes(&fs::read(path)?)
}

/// One row per line, comma separated, no header.
pub fn matrix_to_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

fn parse_float(s: &str, line: usize) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| format_err("CSV", format!("line {line}: cannot parse {s:?}")))
}

pub fn matrix_from_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row = line.split(',').map(|s| parse_float(s, ln + 1)).collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(format_err("CSV", format!("line {}: {} fields, expected {}", ln + 1, row.len(), first.len())));
            }
        }
        rows.push(row);
    }
    let ncols = rows.first().map_or(0, Vec::len);
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(rows.len(), ncols, &flat))
}

pub fn psd_from_csv(text: &str) -> Result<PsdMatrix> {
    let m = matrix_from_csv(text)?;
    if m.nrows() != m.ncols() {
        return Err(format_err("CSV", format!("matrix is {}x{}, expected square", m.nrows(), m.ncols())));
    }
    PsdMatrix::from_row_major(m.nrows(), m.transpose().as_slice().to_vec())
}

/// Reads a matrix as CSV when the extension is `.csv`, PSDM otherwise.
pub fn read_matrix(path: &Path) -> Result<PsdMatrix> {
    if is_csv(path) {
        psd_from_csv(&fs::read_to_string(path)?)
    } else {
        read_psdm(path)
    }
}

pub fn write_matrix(path: &Path, a: &PsdMatrix) -> Result<()> {
    if is_csv(path) {
        Ok(fs::write(path, matrix_to_csv(a.as_dmatrix()))?)
    } else {
        write_psdm(path, a)
    }
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

pub fn vector_to_csv(v: &DVector<f64>) -> String {
    v.iter().map(|x| format!("{x}\n")).collect()
}

pub fn vector_from_csv(text: &str) -> Result<DVector<f64>> {
    let values = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(ln, l)| parse_float(l, ln + 1))
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(values))
}

/// `u64` length followed by the values.
pub fn vector_to_bytes(v: &DVector<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + 8 * v.len());
    out.extend_from_slice(&(v.len() as u64).to_le_bytes());
    push_f64s(&mut out, v.iter().copied());
    out
}

pub fn vector_from_bytes(bytes: &[u8]) -> Result<DVector<f64>> {
    let mut c = Cursor { bytes, pos: 0, format: "vector" };
    let len = c.size()?;
    let values = c.f64s(len)?;
    c.finish()?;
    Ok(DVector::from_vec(values))
}

pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    if is_csv(path) {
        vector_from_csv(&fs::read_to_string(path)?)
    } else {
        let mut bytes = Vec::new();
        fs::File::open(path)?.read_to_end(&mut bytes)?;
        vector_from_bytes(&bytes)
    }
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    let mut file = fs::File::create(path)?;
    if is_csv(path) {
        file.write_all(vector_to_csv(v).as_bytes())?;
    } else {
        file.write_all(&vector_to_bytes(v))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> PsdMatrix {
        PsdMatrix::from_row_major(2, vec![2.0, 0.1, 0.1, 1.0 / 3.0]).unwrap()
    }

    #[test]
    fn psdm_header_layout() {
        let b = psdm_to_bytes(&sample());
        assert_eq!(&b[..4], b"PSDM");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..16], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(b.len(), 16 + 32);
        assert_eq!(&b[16..24], &2.0f64.to_le_bytes());
    }

    #[test]
    fn psdm_round_trip_is_bit_exact() {
        let a = sample();
        let back = psdm_from_bytes(&psdm_to_bytes(&a)).unwrap();
        assert_eq!(back.row_major(), a.row_major());
    }

    #[test]
    fn psdm_rejects_damage() {
        let mut b = psdm_to_bytes(&sample());
        assert!(psdm_from_bytes(&b[..b.len() - 1]).is_err());
        b.push(0);
        assert!(psdm_from_bytes(&b).is_err());
        b.pop();
        b[4] = 2;
        assert!(psdm_from_bytes(&b).is_err());
        b[4] = 1;
        b[0] = b'X';
        assert!(psdm_from_bytes(&b).is_err());
    }

    #[test]
    fn lrkf_round_trip() {
        let l = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let r = DMatrix::from_row_slice(3, 2, &[0.5, 0.0, -1.0, 2.0, 0.25, 1e-300]);
        let f = LowRankFactor::new(l, r).unwrap();
        let b = lrkf_to_bytes(&f);
        assert_eq!(b[24], 0);
        assert_eq!(&b[25..33], &1.0f64.to_le_bytes());
        assert_eq!(&b[33..41], &2.0f64.to_le_bytes());
        assert_eq!(lrkf_from_bytes(&b).unwrap(), f);
        let s = LowRankFactor::symmetric(DMatrix::from_row_slice(2, 1, &[1.0, -1.0]));
        let bs = lrkf_to_bytes(&s);
        assert_eq!(bs[24], 1);
        assert_eq!(lrkf_from_bytes(&bs).unwrap(), s);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let a = sample();
        let text = matrix_to_csv(a.as_dmatrix());
        assert_eq!(text.lines().count(), 2);
        assert_eq!(psd_from_csv(&text).unwrap().row_major(), a.row_major());
    }

    #[test]
    fn csv_rejects_ragged_and_garbage() {
        assert!(matrix_from_csv("1,2\n3\n").is_err());
        assert!(matrix_from_csv("1,x\n").is_err());
        assert!(psd_from_csv("1,2\n").is_err());
    }

    #[test]
    fn vector_formats_round_trip() {
        let v = DVector::from_vec(vec![0.1, -2.5, 1e10]);
        assert_eq!(vector_from_csv(&vector_to_csv(&v)).unwrap(), v);
        let b = vector_to_bytes(&v);
        assert_eq!(&b[..8], &3u64.to_le_bytes());
        assert_eq!(vector_from_bytes(&b).unwrap(), v);
    }
}
