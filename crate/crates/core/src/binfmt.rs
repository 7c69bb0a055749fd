//! Container shared by checkpoints and sigpack files:
//! 8-byte magic, `u32` little-endian manifest length `L`, `L` bytes of UTF-8
//! JSON, then a raw payload addressed by offsets relative to its start.

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

const HEADER_LEN: usize = 12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FormatError {
    #[error("bad magic at byte offset 0: expected {expected:?}")]
    BadMagic { expected: String },
    #[error("truncated file: need {needed} bytes at byte offset {offset}, {available} available")]
    Truncated {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("invalid manifest at byte offset {offset}: {reason}")]
    Manifest { offset: usize, reason: String },
    #[error("manifest/offset mismatch at byte offset {offset}: {reason}")]
    OffsetMismatch { offset: usize, reason: String },
}

pub(crate) fn encode<M: Serialize>(magic: &[u8; 8], manifest: &M, payload: &[u8]) -> Vec<u8> {
    let json = serde_json::to_vec(manifest).expect("manifest types serialize infallibly");
    let mut out = Vec::with_capacity(HEADER_LEN + json.len() + payload.len());
    out.extend_from_slice(magic);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    out
}

/// Payload region with absolute-offset error reporting.
pub(crate) struct Payload<'a> {
    bytes: &'a [u8],
    base: usize,
}

impl<'a> Payload<'a> {
    pub fn len(&self) -> usize {
        self.bytes.len()
    }

    pub fn absolute(&self, offset: usize) -> usize {
        self.base + offset
    }

    pub fn slice(&self, offset: usize, len: usize) -> Result<&'a [u8], FormatError> {
        let end = offset.checked_add(len);
        match end {
            Some(end) if end <= self.bytes.len() => Ok(&self.bytes[offset..end]),
            _ => Err(FormatError::Truncated {
                offset: self.base + offset,
                needed: len,
                available: self.bytes.len().saturating_sub(offset),
            }),
        }
    }

    pub fn f64s(&self, offset: usize, count: usize) -> Result<Vec<f64>, FormatError> {
        let raw = self.slice(offset, count * 8)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

pub(crate) fn decode<'a, M: DeserializeOwned>(
    magic: &[u8; 8],
    bytes: &'a [u8],
) -> Result<(M, Payload<'a>), FormatError> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(FormatError::BadMagic {
            expected: String::from_utf8_lossy(magic).into_owned(),
        });
    }
    if bytes.len() < HEADER_LEN {
        return Err(FormatError::Truncated {
            offset: 8,
            needed: 4,
            available: bytes.len() - 8,
        });
    }
    let len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let end = HEADER_LEN + len;
    if bytes.len() < end {
        return Err(FormatError::Truncated {
            offset: HEADER_LEN,
            needed: len,
            available: bytes.len() - HEADER_LEN,
        });
    }
    let manifest = serde_json::from_slice(&bytes[HEADER_LEN..end]).map_err(|e| FormatError::Manifest {
        offset: HEADER_LEN,
        reason: e.to_string(),
    })?;
    Ok((
        manifest,
        Payload {
            bytes: &bytes[end..],
            base: end,
        },
    ))
}

pub(crate) fn push_f64s(out: &mut Vec<u8>, values: impl IntoIterator<Item = f64>) {
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_roundtrip_and_errors() {
        let bytes = encode(b"TESTMAG1", &vec![1, 2, 3], &[9, 9]);
        let (m, payload): (Vec<i32>, _) = decode(b"TESTMAG1", &bytes).unwrap();
        assert_eq!(m, vec![1, 2, 3]);
        assert_eq!(payload.len(), 2);
        assert!(matches!(
            decode::<Vec<i32>>(b"OTHERMG1", &bytes),
            Err(FormatError::BadMagic { .. })
        ));
        assert!(matches!(
            decode::<Vec<i32>>(b"TESTMAG1", &bytes[..14]),
            Err(FormatError::Truncated { offset: 12, .. })
        ));
        let err = payload.slice(1, 4).unwrap_err();
        assert_eq!(
            err,
            FormatError::Truncated {
                offset: bytes.len() - 1,
                needed: 4,
                available: 1
            }
        );
    }
}
