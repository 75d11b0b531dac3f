use serde::{Deserialize, Serialize};

use super::matrix::DenseMatrix;
use super::NnError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: DenseMatrix,
    pub grad: DenseMatrix,
}

/// Named trainable tensors, each with a gradient buffer of the same shape.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Param>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: DenseMatrix) -> Result<ParamId, NnError> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(NnError::DuplicateParam(name));
        }
        let grad = DenseMatrix::zeros(value.rows(), value.cols());
        self.params.push(Param { name, value, grad });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn num_values(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn value(&self, id: ParamId) -> &DenseMatrix {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &DenseMatrix {
        &self.params[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut DenseMatrix {
        &mut self.params[id.0].grad
    }

    /// Value and gradient of the same parameter, the latter mutable.
    pub fn value_and_grad_mut(&mut self, id: ParamId) -> (&DenseMatrix, &mut DenseMatrix) {
        let p = &mut self.params[id.0];
        (&p.value, &mut p.grad)
    }

    /// Gradients of two distinct parameters, both mutable.
    pub fn grad_pair_mut(&mut self, a: ParamId, b: ParamId) -> (&mut DenseMatrix, &mut DenseMatrix) {
        assert_ne!(a, b, "grad_pair_mut needs two distinct parameters");
        if a.0 < b.0 {
            let (lo, hi) = self.params.split_at_mut(b.0);
            (&mut lo[a.0].grad, &mut hi[0].grad)
        } else {
            let (lo, hi) = self.params.split_at_mut(a.0);
            (&mut hi[0].grad, &mut lo[b.0].grad)
        }
    }

    /// Handles of all parameters in insertion order.
    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    pub fn by_name(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Param> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Param> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment estimates for every parameter of one store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore, config: AdamConfig) -> Self {
        let zeros = || store.iter().map(|p| vec![0.0; p.value.len()]).collect();
        Self {
            config,
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }
}

/// One bias-corrected Adam update; gradients are zeroed afterwards.
pub fn adam_step(store: &mut ParamStore, state: &mut AdamState) -> Result<(), NnError> {
    if state.first.len() != store.len()
        || state
            .first
            .iter()
            .zip(store.iter())
            .any(|(m, p)| m.len() != p.value.len())
    {
        return Err(NnError::DimensionMismatch(
            "Adam state does not match parameter store".into(),
        ));
    }
    state.step += 1;
    let AdamConfig {
        learning_rate,
        beta1,
        beta2,
        epsilon,
    } = state.config;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((p, m), v) in store.iter_mut().zip(&mut state.first).zip(&mut state.second) {
        let values = p.value.as_mut_slice();
        for (k, g) in p.grad.as_mut_slice().iter_mut().enumerate() {
            m[k] = beta1 * m[k] + (1.0 - beta1) * *g;
            v[k] = beta2 * v[k] + (1.0 - beta2) * *g * *g;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            values[k] -= learning_rate * m_hat / (v_hat.sqrt() + epsilon);
            *g = 0.0;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.add("w", DenseMatrix::from_rows(&[&[1.0, -2.0], &[0.5, 3.0]]).unwrap())
            .unwrap();
        s.add("b", DenseMatrix::from_rows(&[&[0.1, 0.2]]).unwrap()).unwrap();
        s
    }

    #[test]
    fn names_are_unique() {
        let mut s = store();
        assert!(matches!(
            s.add("w", DenseMatrix::zeros(1, 1)),
            Err(NnError::DuplicateParam(_))
        ));
        assert_eq!(s.num_values(), 6);
        assert_eq!(s.id("b"), Some(ParamId(1)));
    }

    #[test]
    fn zero_gradient_leaves_parameters() {
        let mut s = store();
        let before = s.clone();
        let mut st = AdamState::new(&s, AdamConfig::with_learning_rate(0.1));
        adam_step(&mut s, &mut st).unwrap();
        assert_eq!(s, before);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate_times_sign() {
        let mut s = store();
        let before = s.clone();
        let lr = 1e-3;
        let mut st = AdamState::new(&s, AdamConfig::with_learning_rate(lr));
        let grads = [[0.5, -3.0, 2e-3, 40.0], [-1.0, 7.0, 0.0, 0.0]];
        for (p, g) in s.iter_mut().zip(grads) {
            let len = p.grad.len();
            p.grad.as_mut_slice().copy_from_slice(&g[..len]);
        }
        adam_step(&mut s, &mut st).unwrap();
        for ((p, q), g) in s.iter().zip(before.iter()).zip(grads) {
            for (k, &gk) in g.iter().enumerate().take(p.value.len()) {
                // m̂ = g, v̂ = g², so Δ = −lr·g/(|g| + ε).
                let expected = -lr * gk / (gk.abs() + 1e-8);
                assert!((p.value.as_slice()[k] - q.value.as_slice()[k] - expected).abs() < 1e-15);
            }
            assert!(p.grad.as_slice().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn zero_learning_rate_is_identity() {
        let mut s = store();
        let before = s.clone();
        let mut st = AdamState::new(&s, AdamConfig::with_learning_rate(0.0));
        for _ in 0..5 {
            for p in s.iter_mut() {
                p.grad.fill(1.7);
            }
            adam_step(&mut s, &mut st).unwrap();
        }
        for (p, q) in s.iter().zip(before.iter()) {
            assert_eq!(p.value, q.value);
        }
    }

    #[test]
    fn mismatched_state_rejected() {
        let mut s = store();
        let mut st = AdamState::new(&ParamStore::new(), AdamConfig::with_learning_rate(0.1));
        assert!(adam_step(&mut s, &mut st).is_err());
    }

    #[test]
    fn deterministic_updates() {
        let run = || {
            let mut s = store();
            let mut st = AdamState::new(&s, AdamConfig::with_learning_rate(0.01));
            for step in 0..10 {
                for p in s.iter_mut() {
                    for (k, g) in p.grad.as_mut_slice().iter_mut().enumerate() {
                        *g = ((step * 7 + k) as f64).sin();
                    }
                }
                adam_step(&mut s, &mut st).unwrap();
            }
            s
        };
        assert_eq!(run(), run());
    }
}
