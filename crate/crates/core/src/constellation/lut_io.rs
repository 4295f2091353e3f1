//! LUT interchange formats.
//!
//! Binary layout, all fields little-endian:
//!
//! | offset | size | field                                   |
//! |--------|------|-----------------------------------------|
//! | 0      | 8    | magic `b"ANLUT\0\0\x01"`                |
//! | 8      | 4    | `k` (u32)                               |
//! | 12     | 4    | `M` (u32)                               |
//! | 16     | 8    | `beta` (f64)                            |
//! | 24     | 4    | `bits` (u32, 0 = unquantized)           |
//! | 28     | 4    | kind (u32, 0 = Fourier, 1 = flat)       |
//! | 32     | ...  | `M` rows of `2k` f64 means, then `M` rows of `2k` f64 tangents |
//!
//! The CSV form carries the same header as a `k,M,beta,bits,kind` line plus
//! one value line, then `2M` rows of `2k` comma-separated values printed
//! with Rust's shortest round-trip float formatting.

use std::io::{BufRead, Read, Write};

use super::{Codebook, CodebookKind};
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"ANLUT\0\0\x01";

fn kind_code(kind: CodebookKind) -> u32 {
    match kind {
        CodebookKind::Fourier => 0,
        CodebookKind::Flat => 1,
    }
}

fn kind_from_code(code: u32) -> Result<CodebookKind> {
    match code {
        0 => Ok(CodebookKind::Fourier),
        1 => Ok(CodebookKind::Flat),
        c => Err(Error::Format(format!("unknown codebook kind {c}"))),
    }
}

pub fn write_lut_binary<W: Write>(cb: &Codebook, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&(cb.k() as u32).to_le_bytes())?;
    w.write_all(&(cb.size() as u32).to_le_bytes())?;
    w.write_all(&cb.beta().to_le_bytes())?;
    w.write_all(&cb.bits().unwrap_or(0).to_le_bytes())?;
    w.write_all(&kind_code(cb.kind()).to_le_bytes())?;
    for v in cb.means().iter().chain(cb.tangents()) {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_lut_binary<R: Read>(mut r: R) -> Result<Codebook> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format("bad LUT magic".into()));
    }
    let mut u4 = [0u8; 4];
    let mut u8b = [0u8; 8];
    let mut read_u32 = |r: &mut R| -> Result<u32> {
        r.read_exact(&mut u4)?;
        Ok(u32::from_le_bytes(u4))
    };
    let k = read_u32(&mut r)? as usize;
    let m = read_u32(&mut r)? as usize;
    r.read_exact(&mut u8b)?;
    let beta = f64::from_le_bytes(u8b);
    let bits = read_u32(&mut r)?;
    let kind = kind_from_code(read_u32(&mut r)?)?;
    let n = m * 2 * k;
    let mut values = Vec::with_capacity(2 * n);
    for _ in 0..2 * n {
        r.read_exact(&mut u8b)?;
        values.push(f64::from_le_bytes(u8b));
    }
    let tangents = values.split_off(n);
    Codebook::from_parts(k, m, beta, kind, (bits != 0).then_some(bits), values, tangents)
}

pub fn write_lut_csv<W: Write>(cb: &Codebook, mut w: W) -> Result<()> {
    writeln!(w, "k,M,beta,bits,kind")?;
    writeln!(w, "{},{},{},{},{}", cb.k(), cb.size(), cb.beta(), cb.bits().unwrap_or(0), kind_code(cb.kind()))?;
    let d = cb.dim();
    for row in cb.means().chunks(d).chain(cb.tangents().chunks(d)) {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_lut_csv<R: BufRead>(r: R) -> Result<Codebook> {
    let mut lines = r.lines();
    let mut next = || -> Result<String> {
        lines.next().ok_or_else(|| Error::Format("truncated LUT csv".into()))?.map_err(Error::from)
    };
    if next()?.trim() != "k,M,beta,bits,kind" {
        return Err(Error::Format("bad LUT csv header".into()));
    }
    let head = next()?;
    let f: Vec<&str> = head.trim().split(',').collect();
    if f.len() != 5 {
        return Err(Error::Format("LUT csv header needs 5 fields".into()));
    }
    let bad = |s: &str| Error::Format(format!("bad header field {s:?}"));
    let k: usize = f[0].parse().map_err(|_| bad(f[0]))?;
    let m: usize = f[1].parse().map_err(|_| bad(f[1]))?;
    let beta: f64 = f[2].parse().map_err(|_| bad(f[2]))?;
    let bits: u32 = f[3].parse().map_err(|_| bad(f[3]))?;
    let kind = kind_from_code(f[4].parse().map_err(|_| bad(f[4]))?)?;
    let mut values = Vec::with_capacity(4 * k * m);
    for _ in 0..2 * m {
        let line = next()?;
        let row: Vec<f64> = line
            .trim()
            .split(',')
            .map(|s| s.parse::<f64>().map_err(|_| Error::Format(format!("bad value {s:?}"))))
            .collect::<Result<_>>()?;
        if row.len() != 2 * k {
            return Err(Error::Dimension { expected: 2 * k, actual: row.len() });
        }
        values.extend(row);
    }
    let tangents = values.split_off(2 * k * m);
    Codebook::from_parts(k, m, beta, kind, (bits != 0).then_some(bits), values, tangents)
}
