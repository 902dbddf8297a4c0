//! Binary logits interchange, little-endian:
//!
//! ```text
//! magic "WSEG" | version u32 | num_frames u32 | num_classes u32 |
//! frame_duration_us u32 | utterance_id_len u16 | utterance_id UTF-8 |
//! num_frames x 3 f32, row-major (Begin, Inside, Outside)
//! ```

use std::path::Path;

use super::model::{LogitsMatrix, NUM_CLASSES};
use crate::error::{Error, Result};

pub const INTERCHANGE_MAGIC: [u8; 4] = *b"WSEG";
pub const INTERCHANGE_VERSION: u32 = 1;

const FIXED_HEADER: usize = 4 + 4 * 4 + 2;

pub fn encode_logits(l: &LogitsMatrix) -> Result<Vec<u8>> {
    let id = l.utterance_id.as_bytes();
    let id_len = u16::try_from(id.len())
        .map_err(|_| Error::InvalidArgument(format!("utterance id longer than {} bytes", u16::MAX)))?;
    let frames = u32::try_from(l.rows.len()).map_err(|_| Error::InvalidArgument("too many frames".into()))?;
    let mut out = Vec::with_capacity(FIXED_HEADER + id.len() + l.rows.len() * NUM_CLASSES * 4);
    out.extend_from_slice(&INTERCHANGE_MAGIC);
    out.extend_from_slice(&INTERCHANGE_VERSION.to_le_bytes());
    out.extend_from_slice(&frames.to_le_bytes());
    out.extend_from_slice(&(NUM_CLASSES as u32).to_le_bytes());
    out.extend_from_slice(&l.frame_duration_us.to_le_bytes());
    out.extend_from_slice(&id_len.to_le_bytes());
    out.extend_from_slice(id);
    for row in &l.rows {
        for v in row {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

fn u32_at(bytes: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4-byte slice"))
}

pub fn decode_logits(bytes: &[u8]) -> Result<LogitsMatrix> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            expected: FIXED_HEADER,
            got: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4-byte slice");
    if magic != INTERCHANGE_MAGIC {
        return Err(Error::BadMagic(magic));
    }
    if bytes.len() < FIXED_HEADER {
        return Err(Error::Truncated {
            expected: FIXED_HEADER,
            got: bytes.len(),
        });
    }
    let version = u32_at(bytes, 4);
    if version != INTERCHANGE_VERSION {
        return Err(Error::VersionMismatch(version));
    }
    let num_frames = u32_at(bytes, 8) as usize;
    let num_classes = u32_at(bytes, 12);
    if num_classes as usize != NUM_CLASSES {
        return Err(Error::ClassCount(num_classes));
    }
    let frame_duration_us = u32_at(bytes, 16);
    let id_len = u16::from_le_bytes([bytes[20], bytes[21]]) as usize;
    let payload_at = FIXED_HEADER + id_len;
    let expected = payload_at + num_frames * NUM_CLASSES * 4;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            got: bytes.len(),
        });
    }
    let utterance_id = std::str::from_utf8(&bytes[FIXED_HEADER..payload_at])
        .map_err(|_| Error::InvalidArgument("utterance id is not UTF-8".into()))?
        .to_string();
    let rows = bytes[payload_at..]
        .chunks_exact(NUM_CLASSES * 4)
        .map(|c| {
            let f = |k: usize| f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().expect("4-byte slice"));
            [f(0), f(1), f(2)]
        })
        .collect();
    LogitsMatrix::new(utterance_id, frame_duration_us, rows)
}

pub fn write_logits(l: &LogitsMatrix, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_logits(l)?)?;
    Ok(())
}

pub fn read_logits(path: impl AsRef<Path>) -> Result<LogitsMatrix> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::UnreadableFile {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    decode_logits(&bytes)
}
