//! Fully connected baseline on the flattened `2N` features: tanh hidden
//! layers and a linear `3N` head.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::nn::{
    accumulate_affine_grads, affine_forward, gemm, tanh_in_place, DenseMatrix, NnError, ParamId, ParamStore,
};

use super::features::{FEATURES_PER_BUS, TARGETS_PER_BUS};
use super::SurrogateError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub hidden_width: usize,
    pub hidden_layers: usize,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_width: 64,
            hidden_layers: 1,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.hidden_layers > 0 && self.hidden_width == 0 {
            return Err(SurrogateError::Config("hidden width must be positive".into()));
        }
        Ok(())
    }

    fn layer_shapes(&self, n_buses: usize) -> Vec<(String, usize, usize)> {
        let mut shapes = Vec::with_capacity(self.hidden_layers + 1);
        let mut width = FEATURES_PER_BUS * n_buses;
        for l in 0..self.hidden_layers {
            shapes.push((format!("mlp.hidden{l}"), width, self.hidden_width));
            width = self.hidden_width;
        }
        shapes.push(("mlp.out".to_string(), width, TARGETS_PER_BUS * n_buses));
        shapes
    }
}

/// Single-sample pass through `(W, b)` layers, tanh after all but the last.
pub fn mlp_forward(x: &[f64], layers: &[(&DenseMatrix, &DenseMatrix)]) -> Result<Vec<f64>, NnError> {
    let mut a = DenseMatrix::from_vec(1, x.len(), x.to_vec())?;
    for (l, (w, b)) in layers.iter().enumerate() {
        a = affine_forward(&a, w, b)?;
        if l + 1 < layers.len() {
            tanh_in_place(a.as_mut_slice());
        }
    }
    Ok(a.into_vec())
}

#[derive(Clone, Debug)]
pub struct Mlp {
    config: MlpConfig,
    n_buses: usize,
    params: ParamStore,
    layers: Vec<(ParamId, ParamId)>,
    /// Inputs of every layer from the last `forward`.
    trace: Option<Vec<DenseMatrix>>,
}

impl Mlp {
    pub fn new(n_buses: usize, config: MlpConfig, seed: u64) -> Result<Self, SurrogateError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        for (name, rows, cols) in config.layer_shapes(n_buses) {
            params.add(format!("{name}.w"), DenseMatrix::glorot_uniform(rows, cols, &mut rng))?;
            params.add(format!("{name}.b"), DenseMatrix::zeros(1, cols))?;
        }
        Self::from_params(n_buses, config, params)
    }

    pub fn from_params(n_buses: usize, config: MlpConfig, params: ParamStore) -> Result<Self, SurrogateError> {
        config.validate()?;
        let shapes = config.layer_shapes(n_buses);
        if params.len() != 2 * shapes.len() {
            return Err(SurrogateError::Config(format!(
                "{} parameters stored, architecture has {}",
                params.len(),
                2 * shapes.len()
            )));
        }
        let mut layers = Vec::with_capacity(shapes.len());
        for (name, rows, cols) in shapes {
            let get = |suffix: &str, shape: (usize, usize)| {
                let full = format!("{name}.{suffix}");
                match params.id(&full) {
                    Some(id) if params.value(id).shape() == shape => Ok(id),
                    Some(id) => Err(SurrogateError::Config(format!(
                        "parameter {full} has shape {:?}, expected {shape:?}",
                        params.value(id).shape()
                    ))),
                    None => Err(SurrogateError::Config(format!("missing parameter {full}"))),
                }
            };
            layers.push((get("w", (rows, cols))?, get("b", (1, cols))?));
        }
        Ok(Self {
            config,
            n_buses,
            params,
            layers,
            trace: None,
        })
    }

    pub fn config(&self) -> MlpConfig {
        self.config
    }

    pub fn n_buses(&self) -> usize {
        self.n_buses
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    /// `(W, b)` of every layer, input first.
    pub fn layers(&self) -> Vec<(&DenseMatrix, &DenseMatrix)> {
        self.layers
            .iter()
            .map(|&(w, b)| (self.params.value(w), self.params.value(b)))
            .collect()
    }

    fn run(&self, x: &DenseMatrix, mut trace: Option<&mut Vec<DenseMatrix>>) -> Result<DenseMatrix, NnError> {
        if x.cols() != FEATURES_PER_BUS * self.n_buses {
            return Err(NnError::DimensionMismatch(format!(
                "{} feature columns for {} buses",
                x.cols(),
                self.n_buses
            )));
        }
        let last = self.layers.len() - 1;
        let mut a = x.clone();
        for (l, &(w, b)) in self.layers.iter().enumerate() {
            let mut z = affine_forward(&a, self.params.value(w), self.params.value(b))?;
            if l < last {
                tanh_in_place(z.as_mut_slice());
            }
            let input = std::mem::replace(&mut a, z);
            if let Some(t) = trace.as_deref_mut() {
                t.push(input);
            }
        }
        Ok(a)
    }

    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        self.run(x, None)
    }

    pub fn forward(&mut self, x: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        let mut inputs = Vec::with_capacity(self.layers.len());
        let y = self.run(x, Some(&mut inputs))?;
        self.trace = Some(inputs);
        Ok(y)
    }

    pub fn backward(&mut self, grad_y: &DenseMatrix) -> Result<(), NnError> {
        let inputs = self.trace.take().ok_or(NnError::BackwardBeforeForward)?;
        let batch = inputs[0].rows();
        if grad_y.shape() != (batch, TARGETS_PER_BUS * self.n_buses) {
            return Err(NnError::DimensionMismatch(format!(
                "output gradient {:?}, expected {:?}",
                grad_y.shape(),
                (batch, TARGETS_PER_BUS * self.n_buses)
            )));
        }
        let mut g = grad_y.clone();
        for (l, &(w, b)) in self.layers.iter().enumerate().rev() {
            let input = &inputs[l];
            {
                let (dw, db) = self.params.grad_pair_mut(w, b);
                accumulate_affine_grads(input, &g, dw, db)?;
            }
            if l == 0 {
                break;
            }
            let mut g_in = DenseMatrix::zeros(batch, input.cols());
            gemm(1.0, &g, false, self.params.value(w), true, 0.0, &mut g_in)?;
            // `input` is the tanh output of the previous layer.
            for (gi, a) in g_in.as_mut_slice().iter_mut().zip(input.as_slice()) {
                *gi *= 1.0 - a * a;
            }
            g = g_in;
        }
        Ok(())
    }
}
