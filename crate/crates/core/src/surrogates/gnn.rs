//! Graph surrogate: type-specific encoders, `K` residual propagation steps
//! with one shared weight matrix, and either a pooled (GNN1) or a per-bus
//! (GNN2) decoder.
//!
//! Batches are stored bus-major: row `i·B + b` of an embedding matrix is bus
//! `i` of sample `b`, so every bus owns a contiguous `B × d` block and the
//! shared propagation weight is applied to all `N·B` rows by one product.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{grid_adjacency, AdjacencyMatrix, BusType, GridCase};
use crate::nn::{
    accumulate_affine_grads, affine_forward, gemm, tanh_in_place, DenseMatrix, NnError, ParamId, ParamStore,
};

use super::features::{FEATURES_PER_BUS, TARGETS_PER_BUS};
use super::SurrogateError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decoder {
    /// Mean-pool the bus embeddings and map to all `3N` targets (GNN1).
    Global,
    /// One affine map per bus type, applied to each bus's own embedding (GNN2).
    BusSpecific,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GnnConfig {
    pub d: usize,
    pub k_steps: usize,
}

impl Default for GnnConfig {
    fn default() -> Self {
        Self { d: 100, k_steps: 5 }
    }
}

impl GnnConfig {
    pub fn validate(&self) -> Result<(), SurrogateError> {
        if self.d == 0 {
            return Err(SurrogateError::Config("embedding width d must be positive".into()));
        }
        Ok(())
    }
}

/// Borrowed weight `in × out` and bias `1 × out` of one affine map.
#[derive(Clone, Copy, Debug)]
pub struct Affine<'a> {
    pub w: &'a DenseMatrix,
    pub b: &'a DenseMatrix,
}

/// Copies rows `[i·B, (i+1)·B)`.
fn block(h: &DenseMatrix, i: usize, batch: usize) -> DenseMatrix {
    h.slice_rows(i * batch, (i + 1) * batch)
}

fn block_mut(h: &mut DenseMatrix, i: usize, batch: usize) -> &mut [f64] {
    let d = h.cols();
    &mut h.as_mut_slice()[i * batch * d..(i + 1) * batch * d]
}

/// `out_i = Σ_j a_ij h_j` over bus blocks, or with `aᵀ` when `transpose`.
fn aggregate(a: &AdjacencyMatrix, h: &DenseMatrix, batch: usize, transpose: bool) -> DenseMatrix {
    let n = a.size();
    let width = batch * h.cols();
    let mut out = DenseMatrix::zeros(h.rows(), h.cols());
    let src = h.as_slice();
    let dst = out.as_mut_slice();
    for i in 0..n {
        for j in 0..n {
            let w = if transpose { a.get(j, i) } else { a.get(i, j) };
            if w == 0.0 {
                continue;
            }
            let (s, t) = (&src[j * width..(j + 1) * width], &mut dst[i * width..(i + 1) * width]);
            for (o, v) in t.iter_mut().zip(s) {
                *o += w * v;
            }
        }
    }
    out
}

fn check_features(x: &DenseMatrix, n: usize) -> Result<(), NnError> {
    if x.cols() != FEATURES_PER_BUS * n {
        return Err(NnError::DimensionMismatch(format!(
            "{} feature columns for {n} buses",
            x.cols()
        )));
    }
    Ok(())
}

fn embed_batch(x: &DenseMatrix, bus_types: &[BusType], encoders: &[Affine; 3]) -> Result<DenseMatrix, NnError> {
    let n = bus_types.len();
    check_features(x, n)?;
    let batch = x.rows();
    let d = encoders[0].w.cols();
    let mut h = DenseMatrix::zeros(n * batch, d);
    for (i, t) in bus_types.iter().enumerate() {
        let enc = encoders[t.index()];
        let f = x.slice_cols(FEATURES_PER_BUS * i, FEATURES_PER_BUS * (i + 1));
        let mut z = affine_forward(&f, enc.w, enc.b)?;
        tanh_in_place(z.as_mut_slice());
        block_mut(&mut h, i, batch).copy_from_slice(z.as_slice());
    }
    Ok(h)
}

/// Residual steps `H ← H + tanh((Â H) W)`; the per-step `(ÂH, tanh(·))`
/// pairs are pushed into `trace` when given.
fn propagate_batch(
    h0: &DenseMatrix,
    a: &AdjacencyMatrix,
    w: &DenseMatrix,
    k_steps: usize,
    batch: usize,
    mut trace: Option<&mut Vec<(DenseMatrix, DenseMatrix)>>,
) -> Result<DenseMatrix, NnError> {
    if h0.rows() != a.size() * batch || w.rows() != h0.cols() || w.cols() != h0.cols() {
        return Err(NnError::DimensionMismatch(format!(
            "propagation of {}x{} embeddings with {}x{} weight on {} buses",
            h0.rows(),
            h0.cols(),
            w.rows(),
            w.cols(),
            a.size()
        )));
    }
    let mut h = h0.clone();
    for _ in 0..k_steps {
        let m = aggregate(a, &h, batch, false);
        let mut t = DenseMatrix::zeros(h.rows(), h.cols());
        gemm(1.0, &m, false, w, false, 0.0, &mut t)?;
        tanh_in_place(t.as_mut_slice());
        h.add_assign(&t);
        if let Some(trace) = trace.as_deref_mut() {
            trace.push((m, t));
        }
    }
    Ok(h)
}

fn mean_pool(h: &DenseMatrix, n: usize, batch: usize) -> DenseMatrix {
    let mut pooled = DenseMatrix::zeros(batch, h.cols());
    for i in 0..n {
        for (o, v) in pooled
            .as_mut_slice()
            .iter_mut()
            .zip(&h.as_slice()[i * batch * h.cols()..])
        {
            *o += v;
        }
    }
    pooled.scale(1.0 / n as f64);
    pooled
}

fn decode_bus_batch(
    h: &DenseMatrix,
    bus_types: &[BusType],
    batch: usize,
    decoders: &[Affine; 3],
) -> Result<DenseMatrix, NnError> {
    let n = bus_types.len();
    let mut y = DenseMatrix::zeros(batch, TARGETS_PER_BUS * n);
    for (i, t) in bus_types.iter().enumerate() {
        let dec = decoders[t.index()];
        let yi = affine_forward(&block(h, i, batch), dec.w, dec.b)?;
        for b in 0..batch {
            y.row_mut(b)[TARGETS_PER_BUS * i..TARGETS_PER_BUS * (i + 1)].copy_from_slice(yi.row(b));
        }
    }
    Ok(y)
}

/// Initial embeddings `H⁰` (`N × d`) of one sample from its `N × 2` features.
pub fn embed(features: &DenseMatrix, bus_types: &[BusType], encoders: &[Affine; 3]) -> Result<DenseMatrix, NnError> {
    if features.rows() != bus_types.len() || features.cols() != FEATURES_PER_BUS {
        return Err(NnError::DimensionMismatch("features must be N x 2".into()));
    }
    let flat = DenseMatrix::from_vec(1, features.len(), features.as_slice().to_vec())?;
    embed_batch(&flat, bus_types, encoders)
}

/// `K` propagation steps over the normalized adjacency for one sample.
pub fn propagate(
    h0: &DenseMatrix,
    adjacency: &AdjacencyMatrix,
    w: &DenseMatrix,
    k_steps: usize,
) -> Result<DenseMatrix, NnError> {
    propagate_batch(h0, adjacency, w, k_steps, 1, None)
}

/// Mean of the bus embeddings, the input of the global decoder.
pub fn pool(h: &DenseMatrix) -> DenseMatrix {
    mean_pool(h, h.rows(), 1)
}

/// GNN1 read-out: all `3N` targets from the pooled embedding.
pub fn decode_global(h: &DenseMatrix, psi: Affine<'_>) -> Result<Vec<f64>, NnError> {
    Ok(affine_forward(&pool(h), psi.w, psi.b)?.into_vec())
}

/// GNN2 read-out: three targets per bus from its own embedding.
pub fn decode_bus_specific(
    h: &DenseMatrix,
    bus_types: &[BusType],
    decoders: &[Affine; 3],
) -> Result<Vec<f64>, NnError> {
    if h.rows() != bus_types.len() {
        return Err(NnError::DimensionMismatch("one embedding row per bus required".into()));
    }
    Ok(decode_bus_batch(h, bus_types, 1, decoders)?.into_vec())
}

#[derive(Clone, Copy, Debug)]
struct AffineIds {
    w: ParamId,
    b: ParamId,
}

impl AffineIds {
    fn view(self, store: &ParamStore) -> Affine<'_> {
        Affine {
            w: store.value(self.w),
            b: store.value(self.b),
        }
    }

    fn accumulate(self, store: &mut ParamStore, x: &DenseMatrix, grad_out: &DenseMatrix) -> Result<(), NnError> {
        let (dw, db) = store.grad_pair_mut(self.w, self.b);
        accumulate_affine_grads(x, grad_out, dw, db)
    }
}

#[derive(Clone, Debug)]
struct Trace {
    x: DenseMatrix,
    h0: DenseMatrix,
    steps: Vec<(DenseMatrix, DenseMatrix)>,
    h_k: DenseMatrix,
    pooled: Option<DenseMatrix>,
}

#[derive(Clone, Debug)]
pub struct Gnn {
    config: GnnConfig,
    decoder: Decoder,
    bus_types: Vec<BusType>,
    adjacency: AdjacencyMatrix,
    params: ParamStore,
    phi: [AffineIds; 3],
    prop: ParamId,
    psi: Vec<AffineIds>,
    trace: Option<Trace>,
}

impl Gnn {
    /// Glorot-initialized model for `grid`; biases start at zero.
    pub fn new(grid: &GridCase, config: GnnConfig, decoder: Decoder, seed: u64) -> Result<Self, SurrogateError> {
        config.validate()?;
        let n = grid.n_buses();
        let d = config.d;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamStore::new();
        fn affine(
            params: &mut ParamStore,
            rng: &mut ChaCha8Rng,
            name: &str,
            rows: usize,
            cols: usize,
        ) -> Result<(), NnError> {
            params.add(format!("{name}.w"), DenseMatrix::glorot_uniform(rows, cols, rng))?;
            params.add(format!("{name}.b"), DenseMatrix::zeros(1, cols))?;
            Ok(())
        }
        for t in BusType::ALL {
            affine(&mut params, &mut rng, &format!("phi.{}", t.name()), FEATURES_PER_BUS, d)?;
        }
        params.add("prop.w", DenseMatrix::glorot_uniform(d, d, &mut rng))?;
        match decoder {
            Decoder::Global => affine(&mut params, &mut rng, "psi", d, TARGETS_PER_BUS * n)?,
            Decoder::BusSpecific => {
                for t in BusType::ALL {
                    affine(&mut params, &mut rng, &format!("psi.{}", t.name()), d, TARGETS_PER_BUS)?;
                }
            }
        }
        Self::from_params(grid, config, decoder, params)
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_params(
        grid: &GridCase,
        config: GnnConfig,
        decoder: Decoder,
        params: ParamStore,
    ) -> Result<Self, SurrogateError> {
        config.validate()?;
        let n = grid.n_buses();
        let d = config.d;
        let lookup = |name: &str, shape: (usize, usize)| -> Result<ParamId, SurrogateError> {
            let id = params
                .id(name)
                .ok_or_else(|| SurrogateError::Config(format!("missing parameter {name}")))?;
            if params.value(id).shape() != shape {
                return Err(SurrogateError::Config(format!(
                    "parameter {name} has shape {:?}, expected {shape:?}",
                    params.value(id).shape()
                )));
            }
            Ok(id)
        };
        let pair = |name: String, rows: usize, cols: usize| -> Result<AffineIds, SurrogateError> {
            Ok(AffineIds {
                w: lookup(&format!("{name}.w"), (rows, cols))?,
                b: lookup(&format!("{name}.b"), (1, cols))?,
            })
        };
        let phi = [
            pair("phi.slack".into(), FEATURES_PER_BUS, d)?,
            pair("phi.pv".into(), FEATURES_PER_BUS, d)?,
            pair("phi.pq".into(), FEATURES_PER_BUS, d)?,
        ];
        let prop = lookup("prop.w", (d, d))?;
        let psi = match decoder {
            Decoder::Global => vec![pair("psi".into(), d, TARGETS_PER_BUS * n)?],
            Decoder::BusSpecific => BusType::ALL
                .iter()
                .map(|t| pair(format!("psi.{}", t.name()), d, TARGETS_PER_BUS))
                .collect::<Result<_, _>>()?,
        };
        let expected = 7 + 2 * psi.len();
        if params.len() != expected {
            return Err(SurrogateError::Config(format!(
                "{} parameters stored, architecture has {expected}",
                params.len()
            )));
        }
        Ok(Self {
            config,
            decoder,
            bus_types: grid.bus_types(),
            adjacency: grid_adjacency(grid),
            params,
            phi,
            prop,
            psi,
            trace: None,
        })
    }

    pub fn config(&self) -> GnnConfig {
        self.config
    }

    pub fn decoder(&self) -> Decoder {
        self.decoder
    }

    pub fn adjacency(&self) -> &AdjacencyMatrix {
        &self.adjacency
    }

    pub fn bus_types(&self) -> &[BusType] {
        &self.bus_types
    }

    pub fn params(&self) -> &ParamStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    pub fn encoders(&self) -> [Affine<'_>; 3] {
        self.phi.map(|ids| ids.view(&self.params))
    }

    pub fn propagation_weight(&self) -> &DenseMatrix {
        self.params.value(self.prop)
    }

    /// Per-type decoders of GNN2, `None` for GNN1.
    pub fn bus_decoders(&self) -> Option<[Affine<'_>; 3]> {
        match self.decoder {
            Decoder::Global => None,
            Decoder::BusSpecific => Some([0, 1, 2].map(|k| self.psi[k].view(&self.params))),
        }
    }

    /// Pooled decoder of GNN1, `None` for GNN2.
    pub fn global_decoder(&self) -> Option<Affine<'_>> {
        match self.decoder {
            Decoder::Global => Some(self.psi[0].view(&self.params)),
            Decoder::BusSpecific => None,
        }
    }

    fn run(
        &self,
        x: &DenseMatrix,
        trace: Option<&mut Vec<(DenseMatrix, DenseMatrix)>>,
    ) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix, Option<DenseMatrix>), NnError> {
        let batch = x.rows();
        let n = self.bus_types.len();
        let h0 = embed_batch(x, &self.bus_types, &self.encoders())?;
        let h_k = propagate_batch(
            &h0,
            &self.adjacency,
            self.propagation_weight(),
            self.config.k_steps,
            batch,
            trace,
        )?;
        let (y, pooled) = match self.decoder {
            Decoder::Global => {
                let pooled = mean_pool(&h_k, n, batch);
                let psi = self.psi[0].view(&self.params);
                (affine_forward(&pooled, psi.w, psi.b)?, Some(pooled))
            }
            Decoder::BusSpecific => {
                let decs = [0, 1, 2].map(|k| self.psi[k].view(&self.params));
                (decode_bus_batch(&h_k, &self.bus_types, batch, &decs)?, None)
            }
        };
        Ok((y, h0, h_k, pooled))
    }

    /// Batched forward pass (`B × 2N` to `B × 3N`) without recording a trace.
    pub fn predict(&self, x: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        Ok(self.run(x, None)?.0)
    }

    /// Forward pass that keeps the intermediates needed by [`Gnn::backward`].
    pub fn forward(&mut self, x: &DenseMatrix) -> Result<DenseMatrix, NnError> {
        let mut steps = Vec::with_capacity(self.config.k_steps);
        let (y, h0, h_k, pooled) = self.run(x, Some(&mut steps))?;
        self.trace = Some(Trace {
            x: x.clone(),
            h0,
            steps,
            h_k,
            pooled,
        });
        Ok(y)
    }

    /// Accumulates `∂L/∂θ` into the parameter gradients given `∂L/∂ŷ`.
    pub fn backward(&mut self, grad_y: &DenseMatrix) -> Result<(), NnError> {
        let trace = self.trace.take().ok_or(NnError::BackwardBeforeForward)?;
        let n = self.bus_types.len();
        let batch = trace.x.rows();
        let d = self.config.d;
        if grad_y.shape() != (batch, TARGETS_PER_BUS * n) {
            return Err(NnError::DimensionMismatch(format!(
                "output gradient {:?}, expected {:?}",
                grad_y.shape(),
                (batch, TARGETS_PER_BUS * n)
            )));
        }

        let mut g_h = DenseMatrix::zeros(n * batch, d);
        match self.decoder {
            Decoder::Global => {
                let ids = self.psi[0];
                let pooled = trace
                    .pooled
                    .as_ref()
                    .expect("global decoder records the pooled embedding");
                ids.accumulate(&mut self.params, pooled, grad_y)?;
                let mut g_pooled = DenseMatrix::zeros(batch, d);
                gemm(
                    1.0 / n as f64,
                    grad_y,
                    false,
                    self.params.value(ids.w),
                    true,
                    0.0,
                    &mut g_pooled,
                )?;
                for i in 0..n {
                    block_mut(&mut g_h, i, batch).copy_from_slice(g_pooled.as_slice());
                }
            }
            Decoder::BusSpecific => {
                for (i, t) in self.bus_types.iter().enumerate() {
                    let ids = self.psi[t.index()];
                    let g_yi = grad_y.slice_cols(TARGETS_PER_BUS * i, TARGETS_PER_BUS * (i + 1));
                    let h_i = block(&trace.h_k, i, batch);
                    ids.accumulate(&mut self.params, &h_i, &g_yi)?;
                    let mut g_hi = DenseMatrix::zeros(batch, d);
                    gemm(1.0, &g_yi, false, self.params.value(ids.w), true, 0.0, &mut g_hi)?;
                    block_mut(&mut g_h, i, batch).copy_from_slice(g_hi.as_slice());
                }
            }
        }

        let mut g_m = DenseMatrix::zeros(n * batch, d);
        for (m, t) in trace.steps.iter().rev() {
            let mut g_p = g_h.clone();
            for (g, y) in g_p.as_mut_slice().iter_mut().zip(t.as_slice()) {
                *g *= 1.0 - y * y;
            }
            let (w, dw) = self.params.value_and_grad_mut(self.prop);
            gemm(1.0, m, true, &g_p, false, 1.0, dw)?;
            gemm(1.0, &g_p, false, w, true, 0.0, &mut g_m)?;
            g_h.add_assign(&aggregate(&self.adjacency, &g_m, batch, true));
        }

        for (g, y) in g_h.as_mut_slice().iter_mut().zip(trace.h0.as_slice()) {
            *g *= 1.0 - y * y;
        }
        for (i, t) in self.bus_types.iter().enumerate() {
            let ids = self.phi[t.index()];
            let f = trace.x.slice_cols(FEATURES_PER_BUS * i, FEATURES_PER_BUS * (i + 1));
            let g_zi = block(&g_h, i, batch);
            ids.accumulate(&mut self.params, &f, &g_zi)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mse_loss;

    fn rand_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
    }

    fn small(decoder: Decoder) -> Gnn {
        Gnn::new(&GridCase::ieee5_modified(), GnnConfig { d: 8, k_steps: 2 }, decoder, 3).unwrap()
    }

    #[test]
    fn parameter_names_and_shapes() {
        let g = small(Decoder::Global);
        let names: Vec<_> = g.params().iter().map(|p| p.name.as_str()).collect();
        assert_eq!(
            names,
            [
                "phi.slack.w",
                "phi.slack.b",
                "phi.pv.w",
                "phi.pv.b",
                "phi.pq.w",
                "phi.pq.b",
                "prop.w",
                "psi.w",
                "psi.b"
            ]
        );
        assert_eq!(g.params().by_name("psi.w").unwrap().value.shape(), (8, 15));
        let g2 = small(Decoder::BusSpecific);
        assert_eq!(g2.params().by_name("psi.pv.w").unwrap().value.shape(), (8, 3));
        assert!(g2
            .params()
            .by_name("psi.pq.b")
            .unwrap()
            .value
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
        assert_eq!(g2.params().len(), 13);
    }

    #[test]
    fn batched_forward_matches_single_sample_ops() {
        let grid = GridCase::ieee5_modified();
        let x = rand_matrix(4, 10, 9);
        for decoder in [Decoder::Global, Decoder::BusSpecific] {
            let g = small(decoder);
            let y = g.predict(&x).unwrap();
            for b in 0..4 {
                let f = DenseMatrix::from_vec(5, 2, x.row(b).to_vec()).unwrap();
                let h0 = embed(&f, &grid.bus_types(), &g.encoders()).unwrap();
                let h = propagate(&h0, g.adjacency(), g.propagation_weight(), 2).unwrap();
                let single = match decoder {
                    Decoder::Global => decode_global(&h, g.global_decoder().unwrap()).unwrap(),
                    Decoder::BusSpecific => {
                        decode_bus_specific(&h, &grid.bus_types(), &g.bus_decoders().unwrap()).unwrap()
                    }
                };
                for (a, e) in y.row(b).iter().zip(&single) {
                    assert!((a - e).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn zero_propagation_weight_is_identity() {
        let grid = GridCase::ieee5_modified();
        let h0 = rand_matrix(5, 6, 1);
        let w = DenseMatrix::zeros(6, 6);
        let h = propagate(&h0, &grid_adjacency(&grid), &w, 7).unwrap();
        assert_eq!(h, h0);
    }

    #[test]
    fn one_step_by_hand() {
        // Path 1-2-3: normalized rows are [0,1,0], [.5,0,.5], [0,1,0].
        let a = AdjacencyMatrix::from_dense(3, vec![0.0, 1.0, 0.0, 0.5, 0.0, 0.5, 0.0, 1.0, 0.0], true);
        let h0 = DenseMatrix::from_rows(&[&[1.0], &[2.0], &[4.0]]).unwrap();
        let w = DenseMatrix::from_rows(&[&[0.5]]).unwrap();
        let h = propagate(&h0, &a, &w, 1).unwrap();
        let t = crate::nn::tanh;
        let expected = [1.0 + t(2.0 * 0.5), 2.0 + t(2.5 * 0.5), 4.0 + t(2.0 * 0.5)];
        for (k, e) in expected.iter().enumerate() {
            assert!((h.get(k, 0) - e).abs() < 1e-15);
        }
    }

    #[test]
    fn backward_requires_forward() {
        let mut g = small(Decoder::Global);
        assert!(matches!(
            g.backward(&DenseMatrix::zeros(1, 15)),
            Err(NnError::BackwardBeforeForward)
        ));
        g.forward(&rand_matrix(2, 10, 2)).unwrap();
        assert!(g.backward(&DenseMatrix::zeros(3, 15)).is_err());
        g.forward(&rand_matrix(2, 10, 2)).unwrap();
        g.backward(&DenseMatrix::zeros(2, 15)).unwrap();
        assert!(matches!(
            g.backward(&DenseMatrix::zeros(2, 15)),
            Err(NnError::BackwardBeforeForward)
        ));
    }

    #[test]
    fn rebuild_from_params_checks_shapes() {
        let grid = GridCase::ieee5_modified();
        let g = small(Decoder::Global);
        let back = Gnn::from_params(&grid, g.config(), Decoder::Global, g.params().clone()).unwrap();
        let x = rand_matrix(3, 10, 4);
        assert_eq!(back.predict(&x).unwrap(), g.predict(&x).unwrap());
        assert!(Gnn::from_params(&grid, g.config(), Decoder::BusSpecific, g.params().clone()).is_err());
        assert!(Gnn::from_params(
            &grid,
            GnnConfig { d: 9, k_steps: 2 },
            Decoder::Global,
            g.params().clone()
        )
        .is_err());
    }

    fn finite_difference_check(decoder: Decoder) {
        let mut g = small(decoder);
        // Non-zero biases so their gradients are exercised away from init.
        for p in g.params_mut().iter_mut() {
            if p.name.ends_with(".b") {
                let cols = p.value.cols();
                p.value = rand_matrix(1, cols, p.name.len() as u64);
            }
        }
        let x = rand_matrix(3, 10, 5);
        let target = rand_matrix(3, 15, 6);
        let y = g.forward(&x).unwrap();
        let (_, grad) = mse_loss(&y, &target).unwrap();
        g.backward(&grad).unwrap();
        let analytic: Vec<DenseMatrix> = g.params().iter().map(|p| p.grad.clone()).collect();
        let h = 1e-6;
        let names: Vec<String> = g.params().iter().map(|p| p.name.clone()).collect();
        for (k, name) in names.iter().enumerate() {
            let id = g.params().id(name).unwrap();
            let mut numeric = DenseMatrix::zeros(analytic[k].rows(), analytic[k].cols());
            for e in 0..numeric.len() {
                let orig = g.params().value(id).as_slice()[e];
                g.params_mut().value_mut(id).as_mut_slice()[e] = orig + h;
                let up = crate::nn::mse(&g.predict(&x).unwrap(), &target).unwrap();
                g.params_mut().value_mut(id).as_mut_slice()[e] = orig - h;
                let down = crate::nn::mse(&g.predict(&x).unwrap(), &target).unwrap();
                g.params_mut().value_mut(id).as_mut_slice()[e] = orig;
                numeric.as_mut_slice()[e] = (up - down) / (2.0 * h);
            }
            let scale = analytic[k]
                .max_abs_diff(&DenseMatrix::zeros(numeric.rows(), numeric.cols()))
                .max(1e-8);
            let err = analytic[k].max_abs_diff(&numeric) / scale;
            assert!(err < 1e-5, "{name}: relative error {err:e}");
        }
    }

    #[test]
    fn gnn1_gradients_match_finite_differences() {
        finite_difference_check(Decoder::Global);
    }

    #[test]
    fn gnn2_gradients_match_finite_differences() {
        finite_difference_check(Decoder::BusSpecific);
    }

    #[test]
    fn relabeling_buses_permutes_gnn2_outputs_and_fixes_the_pool() {
        let grid = GridCase::ieee5_modified();
        // Swap the two PQ buses 3 and 5 (different degrees, same type).
        let perm = [0usize, 1, 4, 3, 2];
        let relabeled = grid.relabeled(&perm).unwrap();
        let x = rand_matrix(2, 10, 8);
        let mut xp = DenseMatrix::zeros(2, 10);
        for b in 0..2 {
            for (i, &pi) in perm.iter().enumerate() {
                for c in 0..2 {
                    xp.set(b, 2 * pi + c, x.get(b, 2 * i + c));
                }
            }
        }
        let g = small(Decoder::BusSpecific);
        let gp = Gnn::from_params(&relabeled, g.config(), Decoder::BusSpecific, g.params().clone()).unwrap();
        let (y, yp) = (g.predict(&x).unwrap(), gp.predict(&xp).unwrap());
        for b in 0..2 {
            for (i, &pi) in perm.iter().enumerate() {
                for c in 0..3 {
                    assert!((y.get(b, 3 * i + c) - yp.get(b, 3 * pi + c)).abs() < 1e-12);
                }
            }
        }

        let g1 = small(Decoder::Global);
        let enc = g1.encoders();
        let f = DenseMatrix::from_vec(5, 2, x.row(0).to_vec()).unwrap();
        let fp = DenseMatrix::from_vec(5, 2, xp.row(0).to_vec()).unwrap();
        let h = propagate(
            &embed(&f, &grid.bus_types(), &enc).unwrap(),
            g1.adjacency(),
            g1.propagation_weight(),
            2,
        )
        .unwrap();
        let hp = propagate(
            &embed(&fp, &relabeled.bus_types(), &enc).unwrap(),
            &grid_adjacency(&relabeled),
            g1.propagation_weight(),
            2,
        )
        .unwrap();
        assert!(pool(&h).max_abs_diff(&pool(&hp)) < 1e-12);
    }
}
