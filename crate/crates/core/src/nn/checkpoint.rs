//! Versioned parameter checkpoints: a JSON header describing the model plus
//! the raw `f64` parameter blobs, in the shared binary container.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{DenseMatrix, NnError, ParamStore};
use crate::container;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"LFCKPT\0\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ParamShape {
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header<M> {
    meta: M,
    params: Vec<ParamShape>,
}

pub fn encode_checkpoint<M: Serialize>(meta: &M, params: &ParamStore) -> Result<Vec<u8>, NnError> {
    let header = Header {
        meta,
        params: params
            .iter()
            .map(|p| ParamShape {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
            })
            .collect(),
    };
    let header = serde_json::to_string(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let payload: Vec<f64> = params.iter().flat_map(|p| p.value.as_slice().iter().copied()).collect();
    Ok(container::encode(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        &header,
        &payload,
    ))
}

pub fn decode_checkpoint<M: DeserializeOwned>(bytes: &[u8]) -> Result<(M, ParamStore), NnError> {
    let (header, payload) = container::decode(bytes, CHECKPOINT_MAGIC, "checkpoint", CHECKPOINT_VERSION)?;
    let header: Header<M> = serde_json::from_str(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    let expected: usize = header.params.iter().map(|p| p.rows * p.cols).sum();
    if expected != payload.len() {
        return Err(NnError::Checkpoint(format!(
            "header describes {expected} values, payload has {}",
            payload.len()
        )));
    }
    let mut store = ParamStore::new();
    let mut offset = 0;
    for p in header.params {
        let len = p.rows * p.cols;
        let value = DenseMatrix::from_vec(p.rows, p.cols, payload[offset..offset + len].to_vec())?;
        store.add(p.name, value)?;
        offset += len;
    }
    Ok((header.meta, store))
}

pub fn write_checkpoint<M: Serialize>(path: impl AsRef<Path>, meta: &M, params: &ParamStore) -> Result<(), NnError> {
    std::fs::write(path, encode_checkpoint(meta, params)?)?;
    Ok(())
}

pub fn read_checkpoint<M: DeserializeOwned>(path: impl AsRef<Path>) -> Result<(M, ParamStore), NnError> {
    decode_checkpoint(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut store = ParamStore::new();
        store
            .add("a", DenseMatrix::from_fn(2, 3, |i, j| (i + j) as f64 / 7.0))
            .unwrap();
        store.add("b", DenseMatrix::from_fn(1, 3, |_, j| -(j as f64))).unwrap();
        let bytes = encode_checkpoint(&"mlp".to_string(), &store).unwrap();
        let (meta, back): (String, ParamStore) = decode_checkpoint(&bytes).unwrap();
        assert_eq!(meta, "mlp");
        assert_eq!(back, store);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        write_checkpoint(&path, &42u32, &store).unwrap();
        let (meta, back): (u32, ParamStore) = read_checkpoint(&path).unwrap();
        assert_eq!((meta, back), (42, store));
    }

    #[test]
    fn wrong_magic() {
        let bytes = crate::container::encode(b"LFDATA\0\0", 1, "{}", &[]);
        assert!(matches!(
            decode_checkpoint::<u32>(&bytes),
            Err(NnError::Container(crate::container::ContainerError::BadMagic { .. }))
        ));
    }
}
