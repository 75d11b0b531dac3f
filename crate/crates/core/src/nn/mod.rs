//! Dense neural-network substrate: matrices, affine/tanh/MSE kernels with
//! hand-written gradients, Adam and feature standardization.

mod checkpoint;
mod layers;
mod matrix;
mod params;
mod standardize;
mod tanh;

use thiserror::Error;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub(crate) use layers::accumulate_affine_grads;
pub use layers::{affine_backward, affine_forward, mse, mse_loss, tanh_backward, tanh_forward};
pub use matrix::{gemm, DenseMatrix};
pub use params::{adam_step, AdamConfig, AdamState, Param, ParamId, ParamStore};
pub use standardize::{Standardizer, STD_CLAMP};
pub use tanh::{tanh, tanh_in_place};

#[derive(Debug, Error)]
pub enum NnError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("empty data: {0}")]
    EmptyData(String),
    #[error("duplicate parameter name {0:?}")]
    DuplicateParam(String),
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Container(#[from] crate::container::ContainerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
