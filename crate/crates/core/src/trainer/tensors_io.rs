//! `tensors.bin`: preprocessed patches in fixed shape.
//!
//! Layout: magic `PNTD`, u32 version, u32 count, five u32 extents
//! (msg_len, files, hunks, lines, words), then per patch a u32 id length,
//! the id bytes, a label byte (0 non-stable, 1 stable, 255 unknown) and the
//! message, removed and added index arrays as little-endian u32.

use super::binio::{put_len, put_u32, Reader};
use crate::error::{Error, Result};
use crate::preprocess::{PatchShape, PreprocessedPatch};
use crate::types::Label;
use std::path::Path;

pub const TENSORS_MAGIC: &[u8; 4] = b"PNTD";
pub const TENSORS_VERSION: u32 = 1;

pub fn encode_tensors(shape: PatchShape, patches: &[PreprocessedPatch]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    out.extend_from_slice(TENSORS_MAGIC);
    put_u32(&mut out, TENSORS_VERSION);
    put_len(&mut out, patches.len())?;
    for d in [shape.msg_len, shape.files, shape.hunks, shape.lines, shape.words] {
        put_len(&mut out, d)?;
    }
    for p in patches {
        if p.shape != shape {
            return Err(Error::Shape(format!("patch {} has a different shape", p.commit_id)));
        }
        put_len(&mut out, p.commit_id.len())?;
        out.extend_from_slice(p.commit_id.as_bytes());
        out.push(match p.label {
            Some(Label::NonStable) => 0,
            Some(Label::Stable) => 1,
            None => 255,
        });
        for arr in [&p.message, &p.removed, &p.added] {
            for &x in arr.iter() {
                put_u32(&mut out, x);
            }
        }
    }
    Ok(out)
}

pub fn decode_tensors(buf: &[u8]) -> Result<(PatchShape, Vec<PreprocessedPatch>)> {
    let mut r = Reader::new(buf, "tensors");
    r.expect_magic(TENSORS_MAGIC, TENSORS_VERSION)?;
    let count = r.u32()? as usize;
    let mut dims = [0usize; 5];
    for d in &mut dims {
        *d = r.u32()? as usize;
    }
    let shape = PatchShape {
        msg_len: dims[0],
        files: dims[1],
        hunks: dims[2],
        lines: dims[3],
        words: dims[4],
    };
    let mut patches = Vec::with_capacity(count.min(1 << 16));
    for _ in 0..count {
        let n = r.u32()? as usize;
        let id = std::str::from_utf8(r.bytes(n)?)
            .map_err(|_| Error::Format("commit id is not UTF-8".into()))?
            .to_string();
        let label = match r.u8()? {
            0 => Some(Label::NonStable),
            1 => Some(Label::Stable),
            255 => None,
            b => return Err(Error::Format(format!("invalid label byte {b} for {id}"))),
        };
        patches.push(PreprocessedPatch {
            commit_id: id,
            label,
            shape,
            message: r.u32s(shape.msg_len)?,
            removed: r.u32s(shape.code_len())?,
            added: r.u32s(shape.code_len())?,
        });
    }
    r.finish()?;
    Ok((shape, patches))
}

pub fn write_tensors(path: &Path, shape: PatchShape, patches: &[PreprocessedPatch]) -> Result<()> {
    std::fs::write(path, encode_tensors(shape, patches)?)?;
    Ok(())
}

pub fn read_tensors(path: &Path) -> Result<(PatchShape, Vec<PreprocessedPatch>)> {
    decode_tensors(&std::fs::read(path)?)
}
