//! Little-endian helpers shared by the index and model containers.

use std::io::Write;

use crate::error::{Error, Result};

pub(crate) struct Writer<W: Write> {
    inner: W,
}

impl<W: Write> Writer<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.inner.write_all(bytes)
    }

    pub fn bytes(&mut self, b: &[u8]) -> std::io::Result<()> {
        self.put(b)
    }

    pub fn u8(&mut self, v: u8) -> std::io::Result<()> {
        self.put(&[v])
    }

    pub fn u32(&mut self, v: u32) -> std::io::Result<()> {
        self.put(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> std::io::Result<()> {
        self.put(&v.to_le_bytes())
    }

    pub fn f32(&mut self, v: f32) -> std::io::Result<()> {
        self.put(&v.to_le_bytes())
    }

    pub fn f64(&mut self, v: f64) -> std::io::Result<()> {
        self.put(&v.to_le_bytes())
    }

    pub fn len(&mut self, n: usize) -> std::io::Result<()> {
        self.u64(n as u64)
    }

    pub fn f32s(&mut self, vs: &[f32]) -> std::io::Result<()> {
        self.len(vs.len())?;
        let mut buf = Vec::with_capacity(vs.len() * 4);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.put(&buf)
    }

    pub fn u32s(&mut self, vs: &[u32]) -> std::io::Result<()> {
        self.len(vs.len())?;
        let mut buf = Vec::with_capacity(vs.len() * 4);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.put(&buf)
    }

    pub fn u64s(&mut self, vs: &[u64]) -> std::io::Result<()> {
        self.len(vs.len())?;
        let mut buf = Vec::with_capacity(vs.len() * 8);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.put(&buf)
    }

    pub fn u8s(&mut self, vs: &[u8]) -> std::io::Result<()> {
        self.len(vs.len())?;
        self.put(vs)
    }

    pub fn into_inner(self) -> W {
        self.inner
    }
}

/// Cursor over an in-memory container. Every read is bounds checked and
/// reports truncation as a format error.
pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    format: &'static str,
}

impl<'a> Reader<'a> {
    pub fn new(buf: &'a [u8], format: &'static str) -> Self {
        Self {
            buf,
            pos: 0,
            format,
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::Format {
                format: self.format,
                reason: format!("truncated at byte {} (wanted {n} more)", self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    pub fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        self.take(n)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn f32(&mut self) -> Result<f32> {
        Ok(f32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    pub fn len(&mut self) -> Result<usize> {
        let n = self.u64()?;
        usize::try_from(n).map_err(|_| self.bad(format!("length {n} overflows")))
    }

    fn sized(&mut self, elem: usize) -> Result<&'a [u8]> {
        let n = self.len()?;
        let bytes = n
            .checked_mul(elem)
            .ok_or_else(|| self.bad(format!("length {n} overflows")))?;
        self.take(bytes)
    }

    pub fn f32s(&mut self) -> Result<Vec<f32>> {
        Ok(self
            .sized(4)?
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u32s(&mut self) -> Result<Vec<u32>> {
        Ok(self
            .sized(4)?
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u64s(&mut self) -> Result<Vec<u64>> {
        Ok(self
            .sized(8)?
            .chunks_exact(8)
            .map(|c| u64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }

    pub fn u8s(&mut self) -> Result<Vec<u8>> {
        Ok(self.sized(1)?.to_vec())
    }

    pub fn bad(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            format: self.format,
            reason: reason.into(),
        }
    }

    pub fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(self.bad(format!("{} trailing bytes", self.buf.len() - self.pos)));
        }
        Ok(())
    }
}

/// FNV-1a style hash over whole 32-bit words; used to tie auxiliary artifacts to the
/// exact dataset they were derived from.
pub fn fingerprint_f32(values: &[f32], dim: usize) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut h = OFFSET;
    for b in (dim as u64).to_le_bytes() {
        h = (h ^ b as u64).wrapping_mul(PRIME);
    }
    for v in values {
        h = (h ^ v.to_bits() as u64).wrapping_mul(PRIME);
    }
    h
}
