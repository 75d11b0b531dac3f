use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::RunRecord;
use crate::surrogates::ModelKind;

/// One row of the per-architecture ranking table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedRun {
    pub rank: usize,
    pub key: String,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub training_size: usize,
    pub seed: u64,
    pub train_mse: f64,
    pub val_mse: f64,
    pub test_mse: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureRanking {
    pub kind: ModelKind,
    pub runs: Vec<RankedRun>,
    /// Records of this architecture that were excluded because they diverged.
    pub diverged: usize,
}

fn ranking_order(a: &RunRecord, b: &RunRecord) -> Ordering {
    let f = |r: &RunRecord| (r.final_val_mse.unwrap_or(f64::NAN), r.test_mse.unwrap_or(f64::NAN));
    let (va, ta) = f(a);
    let (vb, tb) = f(b);
    va.total_cmp(&vb)
        .then(ta.total_cmp(&tb))
        .then(a.cell.learning_rate.total_cmp(&b.cell.learning_rate))
        .then(a.cell.batch_size.cmp(&b.cell.batch_size))
        .then(a.cell.training_size.cmp(&b.cell.training_size))
        .then(a.cell.seed.cmp(&b.cell.seed))
}

/// Per architecture (MLP, GNN1, GNN2), the `top_k` non-diverged runs with
/// the lowest final validation MSE. Ties go to the lower test MSE, then to
/// the smaller learning rate, batch size, training size and seed.
pub fn rank_runs(records: &[RunRecord], top_k: usize) -> Vec<ArchitectureRanking> {
    ModelKind::ALL
        .iter()
        .map(|&kind| {
            let (ok, diverged): (Vec<&RunRecord>, Vec<&RunRecord>) = records
                .iter()
                .filter(|r| r.kind() == kind)
                .partition(|r| !r.diverged && r.final_val_mse.is_some() && r.test_mse.is_some());
            if ok.is_empty() && !diverged.is_empty() {
                log::warn!("every {kind} run diverged; its ranking is empty");
            }
            let mut ok = ok;
            ok.sort_by(|a, b| ranking_order(a, b));
            let runs = ok
                .into_iter()
                .take(top_k)
                .enumerate()
                .map(|(i, r)| RankedRun {
                    rank: i + 1,
                    key: r.key.clone(),
                    learning_rate: r.cell.learning_rate,
                    batch_size: r.cell.batch_size,
                    training_size: r.cell.training_size,
                    seed: r.cell.seed,
                    train_mse: r.final_train_mse.unwrap_or(f64::NAN),
                    val_mse: r.final_val_mse.unwrap_or(f64::NAN),
                    test_mse: r.test_mse.unwrap_or(f64::NAN),
                })
                .collect();
            ArchitectureRanking {
                kind,
                runs,
                diverged: diverged.len(),
            }
        })
        .collect()
}

pub fn table2_csv(rankings: &[ArchitectureRanking]) -> String {
    let mut out =
        String::from("model,rank,learning_rate,batch_size,training_size,seed,train_mse,val_mse,test_mse,key\n");
    for table in rankings {
        for r in &table.runs {
            writeln!(
                out,
                "{},{},{},{},{},{},{:e},{:e},{:e},{}",
                table.kind.name(),
                r.rank,
                r.learning_rate,
                r.batch_size,
                r.training_size,
                r.seed,
                r.train_mse,
                r.val_mse,
                r.test_mse,
                r.key
            )
            .unwrap();
        }
    }
    out
}

/// Fixed-width rendering with one block per architecture.
pub fn table2_text(rankings: &[ArchitectureRanking]) -> String {
    let mut out = String::new();
    for table in rankings {
        writeln!(out, "{} ({} diverged)", table.kind.display_name(), table.diverged).unwrap();
        writeln!(
            out,
            "  {:>4} {:>8} {:>5} {:>8} {:>11} {:>11} {:>11}",
            "run", "lr", "bs", "cases", "train", "val", "test"
        )
        .unwrap();
        if table.runs.is_empty() {
            writeln!(out, "  (no completed runs)").unwrap();
        }
        for r in &table.runs {
            writeln!(
                out,
                "  {:>4} {:>8.0e} {:>5} {:>8} {:>11.3e} {:>11.3e} {:>11.3e}",
                r.rank, r.learning_rate, r.batch_size, r.training_size, r.train_mse, r.val_mse, r.test_mse
            )
            .unwrap();
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hyperparameter {
    TrainingSize,
    BatchSize,
    LearningRate,
}

impl Hyperparameter {
    pub const ALL: [Hyperparameter; 3] = [
        Hyperparameter::TrainingSize,
        Hyperparameter::BatchSize,
        Hyperparameter::LearningRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Hyperparameter::TrainingSize => "training_size",
            Hyperparameter::BatchSize => "batch_size",
            Hyperparameter::LearningRate => "learning_rate",
        }
    }

    fn value(self, r: &RunRecord) -> f64 {
        match self {
            Hyperparameter::TrainingSize => r.cell.training_size as f64,
            Hyperparameter::BatchSize => r.cell.batch_size as f64,
            Hyperparameter::LearningRate => r.cell.learning_rate,
        }
    }
}

/// Test-MSE distribution of all runs sharing one hyperparameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub kind: ModelKind,
    pub hyperparameter: Hyperparameter,
    pub value: f64,
    /// Completed runs in the group.
    pub n: usize,
    pub diverged: usize,
    /// `[min, q1, median, q3, max]`; absent when every run diverged.
    pub quartiles: Option<[f64; 5]>,
}

impl BoxStats {
    pub fn median(&self) -> Option<f64> {
        self.quartiles.map(|q| q[2])
    }

    pub fn divergence_rate(&self) -> f64 {
        self.diverged as f64 / (self.n + self.diverged) as f64
    }

    pub const CSV_HEADER: &'static str = "model,hyperparameter,value,n,diverged,min,q1,median,q3,max";

    pub fn csv_row(&self) -> String {
        let q = self.quartiles.map_or_else(
            || ",,,,".to_string(),
            |q| q.iter().map(|v| format!("{v:e}")).collect::<Vec<_>>().join(","),
        );
        format!(
            "{},{},{},{},{},{}",
            self.kind.name(),
            self.hyperparameter.name(),
            self.value,
            self.n,
            self.diverged,
            q
        )
    }
}

/// Quantile of sorted data with linear interpolation at position `q·(n−1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Marginal test-MSE statistics per (architecture, hyperparameter, value),
/// ordered by architecture, hyperparameter and ascending value.
pub fn aggregate_boxplots(records: &[RunRecord]) -> Vec<BoxStats> {
    let mut out = Vec::new();
    for kind in ModelKind::ALL {
        let runs: Vec<&RunRecord> = records.iter().filter(|r| r.kind() == kind).collect();
        for hp in Hyperparameter::ALL {
            let mut values: Vec<f64> = runs.iter().map(|r| hp.value(r)).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for value in values {
                let group = runs.iter().filter(|r| hp.value(r) == value);
                let mut mse = Vec::new();
                let mut diverged = 0;
                for r in group {
                    match r.test_mse {
                        Some(m) if !r.diverged => mse.push(m),
                        _ => diverged += 1,
                    }
                }
                mse.sort_by(f64::total_cmp);
                let quartiles = (!mse.is_empty()).then(|| [0.0, 0.25, 0.5, 0.75, 1.0].map(|q| quantile(&mse, q)));
                out.push(BoxStats {
                    kind,
                    hyperparameter: hp,
                    value,
                    n: mse.len(),
                    diverged,
                    quartiles,
                });
            }
        }
    }
    out
}
