use std::collections::HashMap;
use std::fs::{self, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use web_time::Instant;

use super::ExperimentError;
use crate::datagen::{encode_dataset, Dataset};
use crate::surrogates::{Architecture, GnnConfig, MlpConfig, ModelKind};
use crate::training::{evaluate, split_dataset, EpochRecord, SplitData, SplitSpec, TrainConfig, TrainError};

/// Append-only record file inside a sweep directory.
pub const RUNS_FILE: &str = "runs.jsonl";

/// Axes of the study. Every combination times every seed is one run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub training_sizes: Vec<usize>,
    pub batch_sizes: Vec<usize>,
    pub learning_rates: Vec<f64>,
    pub architectures: Vec<ModelKind>,
    pub seeds: Vec<u64>,
    #[serde(default = "default_epochs")]
    pub max_epochs: usize,
    #[serde(default)]
    pub mlp: MlpConfig,
    #[serde(default)]
    pub gnn: GnnConfig,
}

fn default_epochs() -> usize {
    50
}

impl SweepGrid {
    /// Every value of the reference grid, including 100k and 500k cases.
    pub fn full() -> Self {
        Self {
            training_sizes: vec![500, 1_000, 5_000, 10_000, 50_000, 100_000, 500_000],
            ..Self::desk()
        }
    }

    /// The reference grid with training sizes capped at 50k and 3 seeds.
    pub fn desk() -> Self {
        Self {
            training_sizes: vec![500, 1_000, 5_000, 10_000, 50_000],
            batch_sizes: vec![16, 32, 64, 128],
            learning_rates: vec![1e-4, 1e-3, 1e-2, 1e-1],
            architectures: ModelKind::ALL.to_vec(),
            seeds: vec![0, 1, 2],
            max_epochs: default_epochs(),
            mlp: MlpConfig::default(),
            gnn: GnnConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let empty = self.training_sizes.is_empty()
            || self.batch_sizes.is_empty()
            || self.learning_rates.is_empty()
            || self.architectures.is_empty()
            || self.seeds.is_empty();
        if empty {
            return Err(ExperimentError::Argument(
                "every sweep axis needs at least one value".into(),
            ));
        }
        if self.training_sizes.contains(&0) || self.batch_sizes.contains(&0) || self.max_epochs == 0 {
            return Err(ExperimentError::Argument(
                "sizes, batch sizes and epochs must be positive".into(),
            ));
        }
        if self.learning_rates.iter().any(|&lr| !(lr > 0.0 && lr.is_finite())) {
            return Err(ExperimentError::Argument("learning rates must be positive".into()));
        }
        Ok(())
    }

    pub fn architecture(&self, kind: ModelKind) -> Architecture {
        match kind {
            ModelKind::Mlp => Architecture::Mlp(self.mlp),
            ModelKind::Gnn1 => Architecture::Gnn1(self.gnn),
            ModelKind::Gnn2 => Architecture::Gnn2(self.gnn),
        }
    }

    /// Cells in a fixed nesting order: architecture, size, batch, rate, seed.
    pub fn cells(&self) -> Vec<SweepCell> {
        let mut cells = Vec::new();
        for &kind in &self.architectures {
            for &training_size in &self.training_sizes {
                for &batch_size in &self.batch_sizes {
                    for &learning_rate in &self.learning_rates {
                        for &seed in &self.seeds {
                            cells.push(SweepCell {
                                architecture: self.architecture(kind),
                                training_size,
                                batch_size,
                                learning_rate,
                                seed,
                                max_epochs: self.max_epochs,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub architecture: Architecture,
    pub training_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub max_epochs: usize,
}

impl SweepCell {
    pub fn kind(&self) -> ModelKind {
        self.architecture.kind()
    }

    /// Content hash of everything that determines the run's result.
    pub fn key(&self, dataset_fingerprint: &str, split: &SplitSpec) -> String {
        let material = serde_json::json!({
            "cell": self,
            "dataset": dataset_fingerprint,
            "split": split,
        });
        let digest = Sha256::digest(material.to_string().as_bytes());
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            training_subset_size: Some(self.training_size),
            seed: self.seed,
        }
    }
}

/// Outcome of one sweep cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub key: String,
    pub cell: SweepCell,
    pub history: Vec<EpochRecord>,
    pub initial_val_mse: f64,
    pub diverged: bool,
    /// Epoch whose parameters were kept (lowest validation MSE).
    pub best_epoch: Option<usize>,
    pub final_train_mse: Option<f64>,
    pub final_val_mse: Option<f64>,
    /// Test MSE of the kept parameters; absent exactly when diverged.
    pub test_mse: Option<f64>,
    pub wall_seconds: f64,
}

impl RunRecord {
    pub fn kind(&self) -> ModelKind {
        self.cell.kind()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedCell {
    pub cell: SweepCell,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct SweepOutcome {
    /// One record per runnable cell, in grid order.
    pub records: Vec<RunRecord>,
    pub skipped: Vec<SkippedCell>,
    /// How many of `records` were loaded from an earlier, interrupted sweep.
    pub resumed: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepOptions {
    pub split: SplitSpec,
    /// Write `checkpoints/<key>.ckpt` for every finished run.
    pub save_checkpoints: bool,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            split: SplitSpec::default(),
            save_checkpoints: true,
        }
    }
}

/// SHA-256 of the encoded dataset file.
pub fn dataset_fingerprint(ds: &Dataset) -> String {
    Sha256::digest(encode_dataset(ds))
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Reads `runs.jsonl`; a torn final line from an interrupted write is ignored.
pub fn load_runs(path: impl AsRef<Path>) -> Result<Vec<RunRecord>, ExperimentError> {
    let path = path.as_ref();
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(fs::File::open(path)?)
        .lines()
        .collect::<Result<_, _>>()?;
    let mut records = Vec::with_capacity(lines.len());
    for (k, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(r) => records.push(r),
            Err(_) if k + 1 == lines.len() => log::warn!("{}: ignoring incomplete last line", path.display()),
            Err(e) => {
                return Err(ExperimentError::Records {
                    path: path.display().to_string(),
                    message: format!("line {}: {e}", k + 1),
                })
            }
        }
    }
    Ok(records)
}

/// Cuts an unterminated last line so new records start on a fresh line.
fn drop_torn_tail(path: &Path) -> Result<(), ExperimentError> {
    let Ok(bytes) = fs::read(path) else {
        return Ok(());
    };
    if bytes.last().is_some_and(|&b| b != b'\n') {
        let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    Ok(())
}

fn run_cell(
    cell: &SweepCell,
    key: String,
    ds: &Dataset,
    data: &SplitData,
    checkpoints: Option<&Path>,
) -> Result<RunRecord, ExperimentError> {
    let started = Instant::now();
    let result = crate::training::train_model(
        cell.architecture,
        &ds.grid,
        &data.train,
        &data.val,
        &cell.train_config(),
    );
    let record = match result {
        Ok(out) => {
            let test = evaluate(&out.model, &data.test)?;
            if let Some(dir) = checkpoints {
                out.model.save(dir.join(format!("{key}.ckpt")))?;
            }
            let last = *out.final_record();
            RunRecord {
                key,
                cell: *cell,
                initial_val_mse: out.initial_val_mse,
                diverged: false,
                best_epoch: Some(out.best_epoch),
                final_train_mse: Some(last.train_mse),
                final_val_mse: Some(last.val_mse),
                test_mse: Some(test),
                history: out.history,
                wall_seconds: started.elapsed().as_secs_f64(),
            }
        }
        Err(TrainError::Diverged {
            initial_val_mse,
            history,
            epoch,
        }) => {
            log::info!("run {key} diverged at epoch {epoch}");
            RunRecord {
                key,
                cell: *cell,
                history,
                initial_val_mse,
                diverged: true,
                best_epoch: None,
                final_train_mse: None,
                final_val_mse: None,
                test_mse: None,
                wall_seconds: started.elapsed().as_secs_f64(),
            }
        }
        Err(e) => return Err(e.into()),
    };
    Ok(record)
}

fn append(file: &mut fs::File, record: &RunRecord) -> Result<(), ExperimentError> {
    let mut line = serde_json::to_string(record).expect("run records serialize");
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.flush()?;
    Ok(())
}

/// Runs every cell of `grid` not already present in `out_dir/runs.jsonl`.
///
/// Records are appended as cells finish, so a killed sweep resumes where it
/// stopped. Cells whose training size exceeds the train split are skipped.
pub fn run_sweep(
    grid: &SweepGrid,
    ds: &Dataset,
    options: &SweepOptions,
    out_dir: impl AsRef<Path>,
) -> Result<SweepOutcome, ExperimentError> {
    grid.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    let checkpoints = out_dir.join("checkpoints");
    if options.save_checkpoints {
        fs::create_dir_all(&checkpoints)?;
    }
    let data = split_dataset(ds, &options.split)?;
    let fingerprint = dataset_fingerprint(ds);
    let runs_path = out_dir.join(RUNS_FILE);
    let mut done: HashMap<String, RunRecord> = load_runs(&runs_path)?.into_iter().map(|r| (r.key.clone(), r)).collect();

    let mut outcome = SweepOutcome::default();
    let mut planned = Vec::new();
    for cell in grid.cells() {
        if cell.training_size > data.train.len() {
            let reason = format!(
                "training size {} exceeds the {} rows of the train split",
                cell.training_size,
                data.train.len()
            );
            log::warn!("skipping cell: {reason}");
            outcome.skipped.push(SkippedCell { cell, reason });
            continue;
        }
        planned.push((cell.key(&fingerprint, &options.split), cell));
    }
    let pending: Vec<&(String, SweepCell)> = planned.iter().filter(|(k, _)| !done.contains_key(k)).collect();
    outcome.resumed = planned.len() - pending.len();
    log::info!("{} cells planned, {} already complete", planned.len(), outcome.resumed);

    drop_torn_tail(&runs_path)?;
    let mut file = OpenOptions::new().create(true).append(true).open(&runs_path)?;
    let ckpt_dir = options.save_checkpoints.then_some(checkpoints.as_path());
    let finished = execute(&pending, ds, &data, ckpt_dir, &mut file)?;
    for r in finished {
        done.insert(r.key.clone(), r);
    }
    outcome.records = planned
        .iter()
        .map(|(k, _)| done.remove(k).expect("every planned cell has a record"))
        .collect();
    Ok(outcome)
}

#[cfg(feature = "parallel")]
fn execute(
    pending: &[&(String, SweepCell)],
    ds: &Dataset,
    data: &SplitData,
    checkpoints: Option<&Path>,
    file: &mut fs::File,
) -> Result<Vec<RunRecord>, ExperimentError> {
    use rayon::prelude::*;
    use std::sync::mpsc;

    let (tx, rx) = mpsc::channel::<RunRecord>();
    std::thread::scope(|scope| {
        // Single writer: workers only send finished records.
        let writer = scope.spawn(move || -> Result<Vec<RunRecord>, ExperimentError> {
            let mut written = Vec::new();
            for record in rx {
                append(file, &record)?;
                written.push(record);
            }
            Ok(written)
        });
        let results: Result<(), ExperimentError> = pending.par_iter().try_for_each_with(tx, |tx, (key, cell)| {
            let record = run_cell(cell, key.clone(), ds, data, checkpoints)?;
            tx.send(record)
                .map_err(|_| ExperimentError::Argument("record writer stopped".into()))
        });
        let written = writer.join().expect("writer thread panicked")?;
        results.map(|_| written)
    })
}

#[cfg(not(feature = "parallel"))]
fn execute(
    pending: &[&(String, SweepCell)],
    ds: &Dataset,
    data: &SplitData,
    checkpoints: Option<&Path>,
    file: &mut fs::File,
) -> Result<Vec<RunRecord>, ExperimentError> {
    let mut written = Vec::with_capacity(pending.len());
    for (key, cell) in pending {
        let record = run_cell(cell, key.clone(), ds, data, checkpoints)?;
        append(file, &record)?;
        written.push(record);
    }
    Ok(written)
}
