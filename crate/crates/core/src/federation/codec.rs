//! Wire records and byte accounting, all little-endian.
//!
//! Sparse: `"FHIL" | version u32 | total_len u32 | count u32`, then `count`
//! u32 indices, then `count` f64 values.
//!
//! Dense: `"FDNS" | version u32 | length u64`, then `length` f64 values.

use super::SparseUpdate;
use crate::error::{Error, Result};

pub const SPARSE_HEADER_BYTES: usize = 16;
pub const DENSE_HEADER_BYTES: usize = 16;
pub const INDEX_BYTES: usize = 4;
pub const VALUE_BYTES: usize = 8;

const SPARSE_MAGIC: &[u8; 4] = b"FHIL";
const DENSE_MAGIC: &[u8; 4] = b"FDNS";
const VERSION: u32 = 1;

pub fn sparse_encoded_len(count: usize) -> usize {
    SPARSE_HEADER_BYTES + count * (INDEX_BYTES + VALUE_BYTES)
}

pub fn dense_encoded_len(len: usize) -> usize {
    DENSE_HEADER_BYTES + len * VALUE_BYTES
}

/// Transfer time of `bytes` over a link of `bandwidth_bytes_per_s`.
pub fn simulated_latency_s(bytes: usize, bandwidth_bytes_per_s: f64) -> f64 {
    bytes as f64 / bandwidth_bytes_per_s
}

pub fn encode_sparse(update: &SparseUpdate) -> Result<Vec<u8>> {
    update.validate()?;
    let total = u32::try_from(update.total_len)
        .map_err(|_| Error::Codec("total_len exceeds u32".into()))?;
    let count = update.indices.len() as u32;
    let mut out = Vec::with_capacity(sparse_encoded_len(update.indices.len()));
    out.extend_from_slice(SPARSE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&total.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for i in &update.indices {
        out.extend_from_slice(&i.to_le_bytes());
    }
    for v in &update.values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_sparse(bytes: &[u8]) -> Result<SparseUpdate> {
    let mut r = Reader::new(bytes);
    r.magic(SPARSE_MAGIC)?;
    r.version()?;
    let total_len = r.u32()? as usize;
    let count = r.u32()? as usize;
    if bytes.len() != sparse_encoded_len(count) {
        return Err(Error::Codec(format!(
            "sparse record of {} bytes, header declares {count} entries",
            bytes.len()
        )));
    }
    let indices = (0..count).map(|_| r.u32()).collect::<Result<Vec<_>>>()?;
    let values = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    SparseUpdate::new(indices, values, total_len)
}

pub fn encode_dense(values: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(dense_encoded_len(values.len()));
    out.extend_from_slice(DENSE_MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(values.len() as u64).to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_dense(bytes: &[u8]) -> Result<Vec<f64>> {
    let mut r = Reader::new(bytes);
    r.magic(DENSE_MAGIC)?;
    r.version()?;
    let len = r.u64()? as usize;
    if bytes.len() != dense_encoded_len(len) {
        return Err(Error::Codec(format!(
            "dense record of {} bytes, header declares {len} values",
            bytes.len()
        )));
    }
    (0..len).map(|_| r.f64()).collect()
}

struct Reader<'a> {
    buf: &'a [u8],
}

impl<'a> Reader<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Self { buf }
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        if self.buf.len() < N {
            return Err(Error::Codec("truncated record".into()));
        }
        let (head, tail) = self.buf.split_at(N);
        self.buf = tail;
        Ok(head.try_into().expect("length checked"))
    }

    fn magic(&mut self, want: &[u8; 4]) -> Result<()> {
        if &self.take::<4>()? != want {
            return Err(Error::Codec("bad magic".into()));
        }
        Ok(())
    }

    fn version(&mut self) -> Result<()> {
        match self.u32()? {
            VERSION => Ok(()),
            v => Err(Error::Codec(format!("unsupported version {v}"))),
        }
    }

    fn u32(&mut self) -> Result<u32> {
        self.take::<4>().map(u32::from_le_bytes)
    }

    fn u64(&mut self) -> Result<u64> {
        self.take::<8>().map(u64::from_le_bytes)
    }

    fn f64(&mut self) -> Result<f64> {
        self.take::<8>().map(f64::from_le_bytes)
    }
}
