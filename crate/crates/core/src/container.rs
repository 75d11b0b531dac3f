//! Binary container shared by dataset and checkpoint files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                                   |
//! |--------------|-------------------------------------------|
//! | 8            | magic                                     |
//! | 4            | format version (u32)                      |
//! | 8            | header length in bytes (u64)              |
//! | 8            | payload length in f64 values (u64)        |
//! | header len   | UTF-8 JSON header                         |
//! | 8 × payload  | f64 values                                |
//! | 4            | CRC32 (IEEE) of every preceding byte      |

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("not a {expected} file (bad magic bytes)")]
    BadMagic { expected: &'static str },
    #[error("unsupported format version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },
    #[error("file is truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("header is not valid UTF-8")]
    HeaderEncoding,
}

const PREAMBLE: usize = 8 + 4 + 8 + 8;

pub fn encode(magic: &[u8; 8], version: u32, header: &str, payload: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(PREAMBLE + header.len() + payload.len() * 8 + 4);
    out.extend_from_slice(magic);
    out.extend_from_slice(&version.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(header.as_bytes());
    for v in payload {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

/// Returns the JSON header and the payload values.
pub fn decode(
    bytes: &[u8],
    magic: &[u8; 8],
    kind: &'static str,
    version: u32,
) -> Result<(String, Vec<f64>), ContainerError> {
    if bytes.len() < 8 || &bytes[..8] != magic {
        return Err(ContainerError::BadMagic { expected: kind });
    }
    if bytes.len() < PREAMBLE {
        return Err(ContainerError::Truncated {
            expected: PREAMBLE as u64,
            found: bytes.len() as u64,
        });
    }
    let found = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if found != version {
        return Err(ContainerError::Version {
            found,
            expected: version,
        });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    let payload_len = u64::from_le_bytes(bytes[20..28].try_into().unwrap());
    let expected = (PREAMBLE as u64)
        .saturating_add(header_len)
        .saturating_add(payload_len.saturating_mul(8))
        .saturating_add(4);
    if (bytes.len() as u64) < expected {
        return Err(ContainerError::Truncated {
            expected,
            found: bytes.len() as u64,
        });
    }
    let body_end = expected as usize - 4;
    let stored = u32::from_le_bytes(bytes[body_end..body_end + 4].try_into().unwrap());
    let computed = crc32fast::hash(&bytes[..body_end]);
    if stored != computed {
        return Err(ContainerError::Checksum { stored, computed });
    }
    let header_end = PREAMBLE + header_len as usize;
    let header = std::str::from_utf8(&bytes[PREAMBLE..header_end])
        .map_err(|_| ContainerError::HeaderEncoding)?
        .to_owned();
    let payload = bytes[header_end..body_end]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok((header, payload))
}
