//! Train/val/test splitting, the mini-batch Adam loop and evaluation.
//!
//! All losses are mean squared errors in standardized target space, with the
//! scalers fitted on the (sub-sampled) training rows only.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use web_time::Instant;

use crate::datagen::{Dataset, LoadFlowSample};
use crate::grid::GridCase;
use crate::nn::{adam_step, mse, mse_loss, AdamConfig, AdamState, DenseMatrix, NnError, ParamStore, Standardizer};
use crate::surrogates::{sample_matrices, Architecture, Surrogate, SurrogateError, TrainedSurrogate};

pub const MIN_SPLIT_SIZE: usize = 10;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training setup: {0}")]
    Argument(String),
    /// `history` holds the epochs completed before the non-finite loss.
    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged {
        epoch: usize,
        initial_val_mse: f64,
        history: Vec<EpochRecord>,
    },
    #[error(transparent)]
    Surrogate(#[from] SurrogateError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.70,
            val_fraction: 0.15,
            seed: 0,
        }
    }
}

/// Disjoint index sets into the dataset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// `⌊f·n⌋` for fractions given to six decimals, without float rounding surprises.
fn floor_fraction(fraction: f64, n: usize) -> usize {
    let micros = (fraction * 1e6).round() as u128;
    (n as u128 * micros / 1_000_000) as usize
}

/// Seeded permutation cut into `⌊0.70n⌋ / ⌊0.15n⌋ / remainder`.
pub fn split_indices(n: usize, spec: &SplitSpec) -> Result<Split, TrainError> {
    let (ft, fv) = (spec.train_fraction, spec.val_fraction);
    if !(ft > 0.0 && fv > 0.0 && ft + fv < 1.0) {
        return Err(TrainError::Argument(format!(
            "split fractions train {ft} and val {fv} must be positive with a positive test remainder"
        )));
    }
    if n < MIN_SPLIT_SIZE {
        return Err(TrainError::Argument(format!(
            "dataset of {n} samples is too small to split (need {MIN_SPLIT_SIZE})"
        )));
    }
    let n_train = floor_fraction(ft, n);
    let n_val = floor_fraction(fv, n);
    if n_train == 0 || n_val == 0 || n_train + n_val >= n {
        return Err(TrainError::Argument(format!(
            "split of {n} samples leaves an empty part"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));
    let test = perm.split_off(n_train + n_val);
    let val = perm.split_off(n_train);
    Ok(Split { train: perm, val, test })
}

/// Raw (unstandardized) feature/target matrices of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelData {
    pub x: DenseMatrix,
    pub y: DenseMatrix,
}

impl ModelData {
    pub fn from_samples(grid: &GridCase, samples: &[LoadFlowSample]) -> Result<Self, TrainError> {
        let (x, y) = sample_matrices(samples, grid)?;
        Ok(Self { x, y })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }

    /// The first `k` rows.
    pub fn head(&self, k: usize) -> Self {
        Self {
            x: self.x.slice_rows(0, k),
            y: self.y.slice_rows(0, k),
        }
    }
}

/// Feature/target matrices for the three parts of a split dataset.
#[derive(Clone, Debug)]
pub struct SplitData {
    pub train: ModelData,
    pub val: ModelData,
    pub test: ModelData,
}

pub fn split_dataset(ds: &Dataset, spec: &SplitSpec) -> Result<SplitData, TrainError> {
    let split = split_indices(ds.len(), spec)?;
    let part = |idx: &[usize]| {
        let samples: Vec<LoadFlowSample> = idx.iter().map(|&i| ds.samples[i].clone()).collect();
        ModelData::from_samples(&ds.grid, &samples)
    };
    Ok(SplitData {
        train: part(&split.train)?,
        val: part(&split.val)?,
        test: part(&split.test)?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Use only the first `k` training rows; `None` keeps them all.
    pub training_subset_size: Option<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            training_subset_size: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, train_rows: usize) -> Result<(), TrainError> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Argument(format!("learning rate {}", self.learning_rate)));
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return Err(TrainError::Argument(
                "batch size and epoch count must be positive".into(),
            ));
        }
        match self.training_subset_size {
            Some(0) => Err(TrainError::Argument("training subset must be non-empty".into())),
            Some(k) if k > train_rows => Err(TrainError::Argument(format!(
                "training subset {k} exceeds the {train_rows} training rows"
            ))),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Sample-weighted running mean of the mini-batch losses.
    pub train_mse: f64,
    pub val_mse: f64,
    pub seconds: f64,
}

impl EpochRecord {
    /// Equality of everything except the wall-clock time.
    pub fn same_losses(&self, other: &EpochRecord) -> bool {
        self.epoch == other.epoch
            && self.train_mse.to_bits() == other.train_mse.to_bits()
            && self.val_mse.to_bits() == other.val_mse.to_bits()
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation MSE.
    pub model: TrainedSurrogate,
    pub history: Vec<EpochRecord>,
    pub initial_val_mse: f64,
    pub best_epoch: usize,
}

impl TrainOutcome {
    pub fn best_val_mse(&self) -> f64 {
        self.history[self.best_epoch - 1].val_mse
    }

    pub fn final_record(&self) -> &EpochRecord {
        self.history.last().expect("at least one epoch")
    }
}

/// Per-epoch sample order, derived from `(seed, epoch)` only.
pub fn epoch_order(n: usize, seed: u64, epoch: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Stream 0 is left to parameter initialization.
    rng.set_stream(epoch as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

pub fn train_model(
    arch: Architecture,
    grid: &GridCase,
    train: &ModelData,
    val: &ModelData,
    cfg: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    train_model_with(arch, grid, train, val, cfg, |_| {})
}

/// [`train_model`] with a callback invoked after every epoch.
pub fn train_model_with(
    arch: Architecture,
    grid: &GridCase,
    train: &ModelData,
    val: &ModelData,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome, TrainError> {
    let mut trainer = Trainer::new(arch, grid, train, val, cfg)?;
    while let Some(record) = trainer.step_epoch()? {
        on_epoch(&record);
    }
    trainer.finish()
}

/// Epoch-at-a-time training loop behind [`train_model`].
pub struct Trainer {
    arch: Architecture,
    grid: GridCase,
    cfg: TrainConfig,
    feature_scaler: Standardizer,
    target_scaler: Standardizer,
    x: DenseMatrix,
    y: DenseMatrix,
    val_x: DenseMatrix,
    val_y: DenseMatrix,
    model: Surrogate,
    adam: AdamState,
    initial_val_mse: f64,
    history: Vec<EpochRecord>,
    best: Option<(usize, f64, ParamStore)>,
}

impl Trainer {
    /// Fits the scalers on the (possibly truncated) training rows and
    /// initializes the model from `cfg.seed`.
    pub fn new(
        arch: Architecture,
        grid: &GridCase,
        train: &ModelData,
        val: &ModelData,
        cfg: &TrainConfig,
    ) -> Result<Self, TrainError> {
        cfg.validate(train.len())?;
        if val.is_empty() {
            return Err(TrainError::Argument("validation split is empty".into()));
        }
        let train = match cfg.training_subset_size {
            Some(k) => train.head(k),
            None => train.clone(),
        };
        let feature_scaler = Standardizer::fit(&train.x)?;
        let target_scaler = Standardizer::fit(&train.y)?;
        let x = feature_scaler.apply(&train.x)?;
        let y = target_scaler.apply(&train.y)?;
        let val_x = feature_scaler.apply(&val.x)?;
        let val_y = target_scaler.apply(&val.y)?;

        let model = Surrogate::new(grid, arch, cfg.seed)?;
        let adam = AdamState::new(model.params(), AdamConfig::with_learning_rate(cfg.learning_rate));
        let initial_val_mse = mse(&model.predict(&val_x)?, &val_y)?;
        Ok(Self {
            arch,
            grid: grid.clone(),
            cfg: *cfg,
            feature_scaler,
            target_scaler,
            x,
            y,
            val_x,
            val_y,
            model,
            adam,
            initial_val_mse,
            history: Vec::with_capacity(cfg.max_epochs.min(1024)),
            best: None,
        })
    }

    pub fn initial_val_mse(&self) -> f64 {
        self.initial_val_mse
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    pub fn is_done(&self) -> bool {
        self.history.len() >= self.cfg.max_epochs
    }

    fn diverged(&self, epoch: usize) -> TrainError {
        TrainError::Diverged {
            epoch,
            initial_val_mse: self.initial_val_mse,
            history: self.history.clone(),
        }
    }

    /// Runs one epoch; `None` once `max_epochs` epochs have completed.
    pub fn step_epoch(&mut self) -> Result<Option<EpochRecord>, TrainError> {
        if self.is_done() {
            return Ok(None);
        }
        let epoch = self.history.len() + 1;
        let started = Instant::now();
        let order = epoch_order(self.x.rows(), self.cfg.seed, epoch);
        let mut loss_sum = 0.0;
        for batch in order.chunks(self.cfg.batch_size) {
            let bx = self.x.select_rows(batch);
            let by = self.y.select_rows(batch);
            let pred = self.model.forward(&bx)?;
            let (loss, grad) = mse_loss(&pred, &by)?;
            if !loss.is_finite() {
                return Err(self.diverged(epoch));
            }
            self.model.backward(&grad)?;
            adam_step(self.model.params_mut(), &mut self.adam)?;
            loss_sum += loss * batch.len() as f64;
        }
        let train_mse = loss_sum / self.x.rows() as f64;
        let val_mse = mse(&self.model.predict(&self.val_x)?, &self.val_y)?;
        if !(train_mse.is_finite() && val_mse.is_finite()) {
            return Err(self.diverged(epoch));
        }
        let record = EpochRecord {
            epoch,
            train_mse,
            val_mse,
            seconds: started.elapsed().as_secs_f64(),
        };
        self.history.push(record);
        if self.best.as_ref().is_none_or(|(_, v, _)| val_mse < *v) {
            self.best = Some((epoch, val_mse, self.model.params().clone()));
        }
        Ok(Some(record))
    }

    /// The model with the parameters of the lowest-validation epoch so far.
    pub fn best_model(&self) -> Result<Option<TrainedSurrogate>, TrainError> {
        let Some((best_epoch, _, params)) = &self.best else {
            return Ok(None);
        };
        Ok(Some(TrainedSurrogate {
            model: Surrogate::from_params(&self.grid, self.arch, params.clone())?,
            grid: self.grid.clone(),
            feature_scaler: self.feature_scaler.clone(),
            target_scaler: self.target_scaler.clone(),
            info: serde_json::json!({ "config": self.cfg, "best_epoch": best_epoch }),
        }))
    }

    pub fn finish(self) -> Result<TrainOutcome, TrainError> {
        let model = self
            .best_model()?
            .ok_or_else(|| TrainError::Argument("no epoch has completed".into()))?;
        let best_epoch = self.best.as_ref().map(|b| b.0).expect("best_model returned a model");
        Ok(TrainOutcome {
            model,
            history: self.history,
            initial_val_mse: self.initial_val_mse,
            best_epoch,
        })
    }
}

/// MSE over all samples and target dimensions, in the model's standardized
/// target space.
pub fn evaluate(model: &TrainedSurrogate, data: &ModelData) -> Result<f64, TrainError> {
    let x = model.feature_scaler.apply(&data.x)?;
    let y = model.target_scaler.apply(&data.y)?;
    Ok(mse(&model.model.predict(&x)?, &y)?)
}
