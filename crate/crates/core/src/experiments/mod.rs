//! The hyperparameter study: sweep execution, result ranking, boxplot
//! statistics, loss-curve export and the inference timing benchmark.

mod analysis;
mod bench;
mod curves;
mod sweep;

use thiserror::Error;

pub use analysis::{
    aggregate_boxplots, quantile, rank_runs, table2_csv, table2_text, ArchitectureRanking, BoxStats, Hyperparameter,
    RankedRun,
};
pub use bench::{benchmark_inference, BenchConfig, BenchPoint, BenchReport, MethodTiming, NEWTON_RAPHSON};
pub use curves::{export_curves, read_curve, CurveIndexEntry, CURVE_INDEX};
pub use sweep::{
    dataset_fingerprint, load_runs, run_sweep, RunRecord, SkippedCell, SweepCell, SweepGrid, SweepOptions,
    SweepOutcome, RUNS_FILE,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{path}: {message}")]
    Records { path: String, message: String },
    #[error(transparent)]
    Train(#[from] crate::training::TrainError),
    #[error(transparent)]
    Surrogate(#[from] crate::surrogates::SurrogateError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
