//! Learned load-flow surrogates: the MLP baseline and the two graph models.

mod features;
pub mod gnn;
pub mod mlp;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridCase, GridError};
use crate::nn::{decode_checkpoint, encode_checkpoint, DenseMatrix, NnError, ParamStore, Standardizer};
use crate::powerflow::InjectionSet;

pub use features::{
    encode_features, extract_targets, feature_matrix, sample_matrices, FeatureLayout, TargetLayout, FEATURES_PER_BUS,
    TARGETS_PER_BUS,
};
pub use gnn::{decode_bus_specific, decode_global, embed, pool, propagate, Affine, Decoder, Gnn, GnnConfig};
pub use mlp::{mlp_forward, Mlp, MlpConfig};

/// Rows evaluated per chunk by the predict path; small chunks keep the
/// intermediates in cache.
pub const PREDICT_CHUNK: usize = 128;

#[derive(Debug, Error)]
pub enum SurrogateError {
    #[error("feature/target layout: {0}")]
    Layout(String),
    #[error("model configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Gnn1,
    Gnn2,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Mlp, ModelKind::Gnn1, ModelKind::Gnn2];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Gnn1 => "gnn1",
            ModelKind::Gnn2 => "gnn2",
        }
    }

    /// Label used in result tables.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::Mlp => "MLP",
            ModelKind::Gnn1 => "GNN1",
            ModelKind::Gnn2 => "GNN2",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = SurrogateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mlp" => Ok(ModelKind::Mlp),
            "gnn1" => Ok(ModelKind::Gnn1),
            "gnn2" => Ok(ModelKind::Gnn2),
            other => Err(SurrogateError::Config(format!(
                "unknown model {other:?} (mlp, gnn1, gnn2)"
            ))),
        }
    }
}

/// Model family plus its size hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Architecture {
    Mlp(MlpConfig),
    Gnn1(GnnConfig),
    Gnn2(GnnConfig),
}

impl Architecture {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Mlp => Architecture::Mlp(MlpConfig::default()),
            ModelKind::Gnn1 => Architecture::Gnn1(GnnConfig::default()),
            ModelKind::Gnn2 => Architecture::Gnn2(GnnConfig::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Architecture::Mlp(_) => ModelKind::Mlp,
            Architecture::Gnn1(_) => ModelKind::Gnn1,
            Architecture::Gnn2(_) => ModelKind::Gnn2,
        }
    }
}

/// A model of any of the three families behind one interface.
#[derive(Clone, Debug)]
#[allow(clippy::large_enum_variant)]
pub enum Surrogate {
    Mlp(Mlp),
    Gnn(Gnn),
}

impl Surrogate {
    pub fn new(grid: &GridCase, arch: Architecture, seed: u64) -> Result<Self, SurrogateError> {
        Ok(match arch {
            Architecture::Mlp(c) => Surrogate::Mlp(Mlp::new(grid.n_buses(), c, seed)?),
            Architecture::Gnn1(c) => Surrogate::Gnn(Gnn::new(grid, c, Decoder::Global, seed)?),
            Architecture::Gnn2(c) => Surrogate::Gnn(Gnn::new(grid, c, Decoder::BusSpecific, seed)?),
        })
    }

    pub fn from_params(grid: &GridCase, arch: Architecture, params: ParamStore) -> Result<Self, SurrogateError> {
        Ok(match arch {
            Architecture::Mlp(c) => Surrogate::Mlp(Mlp::from_params(grid.n_buses(), c, params)?),
            Architecture::Gnn1(c) => Surrogate::Gnn(Gnn::from_params(grid, c, Decoder::Global, params)?),
            Architecture::Gnn2(c) => Surrogate::Gnn(Gnn::from_params(grid, c, Decoder::BusSpecific, params)?),
        })
    }

    pub fn architecture(&self) -> Architecture {
        match self {
            Surrogate::Mlp(m) => Architecture::Mlp(m.config()),
            Surrogate::Gnn(g) => match g.decoder() {
                Decoder::Global => Architecture::Gnn1(g.config()),
                Decoder::BusSpecific => Architecture::Gnn2(g.config()),
            },
        }
    }

    pub fn kind(&self) -> ModelKind {
        self.architecture().kind()
    }

    pub fn params(&self) -> &ParamStore {
        match self {
            Surrogate::Mlp(m) => m.params(),
            Surrogate::Gnn(g) => g.params(),
        }
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            Surrogate::Mlp(m) => m.params_mut(),
            Surrogate::Gnn(g) => g.params_mut(),
        }
    }

    /// Training forward pass; records what [`Surrogate::backward`] needs.
    pub fn forward(&mut self, x: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        match self {
            Surrogate::Mlp(m) => m.forward(x),
            Surrogate::Gnn(g) => g.forward(x),
        }
    }

    /// Accumulates parameter gradients for the last forward pass.
    pub fn backward(&mut self, grad_y: &DenseMatrix) -> Result<(), NnError> {
        match self {
            Surrogate::Mlp(m) => m.backward(grad_y),
            Surrogate::Gnn(g) => g.backward(grad_y),
        }
    }

    /// Inference without recording intermediates, evaluated in row chunks.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        let run = |x: &DenseMatrix| match self {
            Surrogate::Mlp(m) => m.predict(x),
            Surrogate::Gnn(g) => g.predict(x),
        };
        if x.rows() <= PREDICT_CHUNK {
            return run(x);
        }
        let mut out: Option<DenseMatrix> = None;
        for start in (0..x.rows()).step_by(PREDICT_CHUNK) {
            let end = (start + PREDICT_CHUNK).min(x.rows());
            let part = run(&x.slice_rows(start, end))?;
            let out = out.get_or_insert_with(|| DenseMatrix::zeros(x.rows(), part.cols()));
            for r in 0..part.rows() {
                out.row_mut(start + r).copy_from_slice(part.row(r));
            }
        }
        Ok(out.expect("at least one chunk"))
    }
}

/// Header stored alongside the parameters in a surrogate checkpoint.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct SurrogateMeta {
    architecture: Architecture,
    grid: GridCase,
    feature_scaler: Standardizer,
    target_scaler: Standardizer,
    #[serde(default)]
    info: serde_json::Value,
}

/// A model together with the grid it was built for and the scalers fitted
/// on its training split; maps raw per-unit features to raw targets.
#[derive(Clone, Debug)]
pub struct TrainedSurrogate {
    pub model: Surrogate,
    pub grid: GridCase,
    pub feature_scaler: Standardizer,
    pub target_scaler: Standardizer,
    /// Free-form training metadata kept in the checkpoint header.
    pub info: serde_json::Value,
}

impl TrainedSurrogate {
    pub fn kind(&self) -> ModelKind {
        self.model.kind()
    }

    /// Raw targets (`B × 3N`) from raw features (`B × 2N`), in row chunks.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix, SurrogateError> {
        self.feature_scaler.check(x)?;
        let mut out = DenseMatrix::zeros(x.rows(), self.target_scaler.dims());
        for start in (0..x.rows()).step_by(PREDICT_CHUNK) {
            let end = (start + PREDICT_CHUNK).min(x.rows());
            let mut z = x.slice_rows(start, end);
            self.feature_scaler.apply_in_place(&mut z);
            let mut y = self.model.predict(&z)?;
            self.target_scaler.invert_in_place(&mut y);
            let cols = out.cols();
            out.as_mut_slice()[start * cols..end * cols].copy_from_slice(y.as_slice());
        }
        Ok(out)
    }

    pub fn predict_injections(&self, inputs: &[InjectionSet]) -> Result<DenseMatrix, SurrogateError> {
        let x = feature_matrix(inputs.iter(), &self.grid)?;
        self.predict(&x)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, SurrogateError> {
        let meta = SurrogateMeta {
            architecture: self.model.architecture(),
            grid: self.grid.clone(),
            feature_scaler: self.feature_scaler.clone(),
            target_scaler: self.target_scaler.clone(),
            info: self.info.clone(),
        };
        Ok(encode_checkpoint(&meta, self.model.params())?)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SurrogateError> {
        let (meta, params): (SurrogateMeta, ParamStore) = decode_checkpoint(bytes)?;
        meta.grid.validate()?;
        let n = meta.grid.n_buses();
        if meta.feature_scaler.dims() != FEATURES_PER_BUS * n || meta.target_scaler.dims() != TARGETS_PER_BUS * n {
            return Err(SurrogateError::Config("scaler widths do not match the grid".into()));
        }
        Ok(Self {
            model: Surrogate::from_params(&meta.grid, meta.architecture, params)?,
            grid: meta.grid,
            feature_scaler: meta.feature_scaler,
            target_scaler: meta.target_scaler,
            info: meta.info,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), SurrogateError> {
        std::fs::write(path, self.to_bytes()?).map_err(NnError::from)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SurrogateError> {
        Self::from_bytes(&std::fs::read(path).map_err(NnError::from)?)
    }
}
