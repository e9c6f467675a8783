//! Binary file formats. Everything is little-endian with no padding.
//!
//! Tensor file (`TTED`):
//!
//! | field   | type            |
//! |---------|-----------------|
//! | magic   | `b"TTED"`       |
//! | version | u32 = 1         |
//! | dtype   | u8 (0 f64, 1 f32) |
//! | ndim    | u32             |
//! | dims    | u64 x ndim      |
//! | data    | row-major elements |
//!
//! Core archive (`TTEA`): magic, version u32 = 1, dtype u8, `N` u32, ranks
//! u64 x (N+1), mode sizes u64 x N, then the N core payloads, each
//! row-major `[r_{k-1}, n_k, r_k]`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{Precision, Tensor};
use crate::tt::TtCores;

pub const TENSOR_MAGIC: &[u8; 4] = b"TTED";
pub const ARCHIVE_MAGIC: &[u8; 4] = b"TTEA";
pub const FORMAT_VERSION: u32 = 1;

fn dtype_code(p: Precision) -> u8 {
    match p {
        Precision::F64 => 0,
        Precision::F32 => 1,
    }
}

fn precision_of(code: u8) -> Result<Precision> {
    match code {
        0 => Ok(Precision::F64),
        1 => Ok(Precision::F32),
        c => Err(Error::Format(format!("unknown dtype code {c}"))),
    }
}

fn put_elements(out: &mut Vec<u8>, data: &[f64], p: Precision) {
    match p {
        Precision::F64 => data.iter().for_each(|x| out.extend_from_slice(&x.to_le_bytes())),
        Precision::F32 => data
            .iter()
            .for_each(|x| out.extend_from_slice(&(*x as f32).to_le_bytes())),
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::Format(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64_as_usize(&mut self) -> Result<usize> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().unwrap());
        usize::try_from(v).map_err(|_| Error::Format(format!("extent {v} does not fit in memory")))
    }

    fn header(&mut self, magic: &[u8; 4]) -> Result<Precision> {
        if self.take(4).map_err(|_| Error::Format("missing magic".into()))? != magic {
            return Err(Error::Format(format!(
                "bad magic, expected {:?}",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        precision_of(self.u8()?)
    }

    fn elements(&mut self, count: usize, p: Precision) -> Result<Vec<f64>> {
        let width = match p {
            Precision::F64 => 8,
            Precision::F32 => 4,
        };
        let bytes = self.take(
            count
                .checked_mul(width)
                .ok_or_else(|| Error::Format("payload size overflows".into()))?,
        )?;
        Ok(match p {
            Precision::F64 => bytes
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                .collect(),
            Precision::F32 => bytes
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
                .collect(),
        })
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

fn checked_numel(dims: &[usize]) -> Result<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::Format(format!("dims {dims:?} overflow")))
}

pub fn encode_tensor(t: &Tensor) -> Vec<u8> {
    let p = t.precision();
    let mut out = Vec::with_capacity(13 + 8 * t.ndim() + 8 * t.numel());
    out.extend_from_slice(TENSOR_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(dtype_code(p));
    out.extend_from_slice(&(t.ndim() as u32).to_le_bytes());
    for &d in t.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    put_elements(&mut out, t.data(), p);
    out
}

pub fn decode_tensor(buf: &[u8]) -> Result<Tensor> {
    let mut r = Reader::new(buf);
    let p = r.header(TENSOR_MAGIC)?;
    let ndim = r.u32()? as usize;
    if ndim == 0 {
        return Err(Error::Format("ndim must be >= 1".into()));
    }
    let dims = (0..ndim).map(|_| r.u64_as_usize()).collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(Error::Format(format!("zero extent in dims {dims:?}")));
    }
    let data = r.elements(checked_numel(&dims)?, p)?;
    r.finish()?;
    Tensor::with_precision(dims, data, p)
}

pub fn encode_archive(cores: &TtCores) -> Vec<u8> {
    let p = cores.cores()[0].precision();
    let n = cores.cores().len();
    let mut out = Vec::new();
    out.extend_from_slice(ARCHIVE_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.push(dtype_code(p));
    out.extend_from_slice(&(n as u32).to_le_bytes());
    for &r in cores.ranks() {
        out.extend_from_slice(&(r as u64).to_le_bytes());
    }
    for d in cores.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for core in cores.cores() {
        put_elements(&mut out, core.data(), p);
    }
    out
}

/// Structural problems are [`Error::Format`]; well-formed archives whose
/// ranks violate the boundary conditions are [`Error::RankChainBroken`].
pub fn decode_archive(buf: &[u8]) -> Result<TtCores> {
    let mut r = Reader::new(buf);
    let p = r.header(ARCHIVE_MAGIC)?;
    let n = r.u32()? as usize;
    if n == 0 {
        return Err(Error::Format("archive holds no cores".into()));
    }
    let ranks = (0..=n).map(|_| r.u64_as_usize()).collect::<Result<Vec<_>>>()?;
    let dims = (0..n).map(|_| r.u64_as_usize()).collect::<Result<Vec<_>>>()?;
    if dims.contains(&0) {
        return Err(Error::Format(format!("zero mode size in {dims:?}")));
    }
    if let Some(k) = ranks.iter().position(|&x| x == 0) {
        return Err(Error::RankChainBroken {
            core: k.min(n - 1),
            detail: format!("zero rank in {ranks:?}"),
        });
    }
    let mut cores = Vec::with_capacity(n);
    for k in 0..n {
        let shape = vec![ranks[k], dims[k], ranks[k + 1]];
        let data = r.elements(checked_numel(&shape)?, p)?;
        cores.push(Tensor::with_precision(shape, data, p)?);
    }
    r.finish()?;
    TtCores::new(cores)
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_tensor(path: &Path) -> Result<Tensor> {
    decode_tensor(&std::fs::read(path)?)
}

pub fn write_tensor(path: &Path, t: &Tensor) -> Result<()> {
    write_atomic(path, &encode_tensor(t))
}

pub fn read_archive(path: &Path) -> Result<TtCores> {
    decode_archive(&std::fs::read(path)?)
}

pub fn write_archive(path: &Path, cores: &TtCores) -> Result<()> {
    write_atomic(path, &encode_archive(cores))
}
