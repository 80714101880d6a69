//! Little-endian primitives shared by the binary formats.

use crate::error::{Error, Result};

pub(crate) struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    pub(crate) fn new(buf: &'a [u8], what: &'static str) -> Self {
        Reader { buf, pos: 0, what }
    }

    pub(crate) fn bytes(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let Some(end) = end else {
            return Err(Error::Format(format!("truncated {} at byte {}", self.what, self.pos)));
        };
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    pub(crate) fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes(1)?[0])
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        let b = self.bytes(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    pub(crate) fn u32s(&mut self, n: usize) -> Result<Vec<u32>> {
        let b = self.bytes(n.checked_mul(4).ok_or_else(|| self.overflow())?)?;
        Ok(b.chunks_exact(4).map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }

    pub(crate) fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let b = self.bytes(n.checked_mul(4).ok_or_else(|| self.overflow())?)?;
        Ok(b.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]])).collect())
    }

    fn overflow(&self) -> Error {
        Error::Format(format!("oversized {} record", self.what))
    }

    pub(crate) fn expect_magic(&mut self, magic: &[u8; 4], version: u32) -> Result<()> {
        if self.buf.len() < 4 || &self.buf[..4] != magic {
            return Err(Error::Format(format!(
                "not a {} file (bad magic)",
                self.what
            )));
        }
        self.pos = 4;
        let v = self.u32()?;
        if v != version {
            return Err(Error::Format(format!(
                "unsupported {} version {v} (expected {version})",
                self.what
            )));
        }
        Ok(())
    }

    pub(crate) fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::Format(format!(
                "{} trailing bytes after {}",
                self.buf.len() - self.pos,
                self.what
            )));
        }
        Ok(())
    }
}

pub(crate) fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub(crate) fn put_len(out: &mut Vec<u8>, n: usize) -> Result<()> {
    let v = u32::try_from(n).map_err(|_| Error::Format(format!("length {n} exceeds u32")))?;
    put_u32(out, v);
    Ok(())
}
