//! Randomized injection sampling, labelled dataset generation and the
//! dataset file format.
//!
//! Every sample `i` draws from its own ChaCha8 stream (`seed`, stream `i`), so
//! the output does not depend on how many worker threads generated it.
//! Draws for which Newton-Raphson fails are discarded and redrawn from the
//! same stream.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::container::{self, ContainerError};
use crate::grid::{BusType, GridCase};
use crate::powerflow::{
    self, max_abs_mismatch, BusInjection, BusState, InjectionSet, PowerFlowError, PowerFlowSolution, SolverSettings,
};

pub const DATASET_MAGIC: &[u8; 8] = b"LFDATA\0\0";
pub const DATASET_VERSION: u32 = 1;
pub const RNG_ALGORITHM: &str = "chacha8-seed_from_u64-stream_per_sample";

/// Abort when more than this fraction of all draws fails to converge.
pub const MAX_DISCARD_RATE: f64 = 0.5;
/// Consecutive failed draws tolerated for a single sample slot.
const MAX_ATTEMPTS_PER_SAMPLE: usize = 100;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("discard rate {rate:.1}% exceeds the limit ({discarded} of {attempts} draws failed); check the case file and ranges")]
    TooManyDiscards {
        discarded: usize,
        attempts: usize,
        rate: f64,
    },
    #[error("sample {index}: {MAX_ATTEMPTS_PER_SAMPLE} consecutive draws failed, last error: {last}")]
    SampleExhausted { index: usize, last: PowerFlowError },
    #[error("dataset header: {0}")]
    Header(String),
    #[error(transparent)]
    Container(#[from] ContainerError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Inclusive integer interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub lo: i64,
    pub hi: i64,
}

impl IntRange {
    pub const fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> i64 {
        rng.random_range(self.lo..=self.hi)
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.hi < self.lo
    }
}

/// Integer MW/MVAr intervals for the varied injections.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplingRanges {
    pub pv_p: IntRange,
    pub pq_p: IntRange,
    pub pq_q: IntRange,
}

impl Default for SamplingRanges {
    fn default() -> Self {
        Self {
            pv_p: IntRange::new(0, 199),
            pq_p: IntRange::new(0, 99),
            pq_q: IntRange::new(0, 99),
        }
    }
}

impl SamplingRanges {
    pub fn validate(&self) -> Result<(), DatagenError> {
        for (name, r) in [("pv_p", self.pv_p), ("pq_p", self.pq_p), ("pq_q", self.pq_q)] {
            if r.lo < 0 || r.hi < r.lo {
                return Err(DatagenError::Argument(format!(
                    "range {name} = [{}, {}] must satisfy 0 <= lo <= hi",
                    r.lo, r.hi
                )));
            }
        }
        Ok(())
    }
}

/// Draws one injection set. Slack setpoints come from the case unchanged;
/// PV buses carry generation only, PQ buses carry load only.
pub fn sample_injections(rng: &mut impl Rng, grid: &GridCase, ranges: &SamplingRanges) -> InjectionSet {
    let buses = grid
        .buses
        .iter()
        .map(|b| match b.bus_type {
            BusType::Slack => BusInjection::Slack {
                v_set: b.voltage_setpoint(),
                angle_set: b.angle_setpoint(),
            },
            BusType::PV => BusInjection::Pv {
                p_gen_mw: ranges.pv_p.sample(rng) as f64,
                v_set: b.voltage_setpoint(),
            },
            BusType::PQ => {
                let p = ranges.pq_p.sample(rng) as f64;
                let q = ranges.pq_q.sample(rng) as f64;
                BusInjection::Pq {
                    p_load_mw: p,
                    q_load_mvar: q,
                }
            }
        })
        .collect();
    InjectionSet { buses }
}

/// The generator for sample slot `index`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadFlowSample {
    pub inputs: InjectionSet,
    pub outputs: PowerFlowSolution,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub grid: GridCase,
    pub samples: Vec<LoadFlowSample>,
    pub seed: u64,
    pub ranges: SamplingRanges,
    pub settings: SolverSettings,
    /// Non-convergent draws that were resampled.
    pub discarded: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Largest power mismatch over all stored samples, re-evaluated from the
    /// stored voltages.
    pub fn max_label_mismatch(&self) -> Result<f64, PowerFlowError> {
        let mut worst: f64 = 0.0;
        for s in &self.samples {
            let mis = powerflow::compute_mismatch(&self.grid, &s.inputs, &s.outputs.voltages())?;
            worst = worst.max(max_abs_mismatch(&mis));
        }
        Ok(worst)
    }

    /// Samples at the given positions, sharing the grid and metadata.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            grid: self.grid.clone(),
            samples: idx.iter().map(|&i| self.samples[i].clone()).collect(),
            seed: self.seed,
            ranges: self.ranges,
            settings: self.settings,
            discarded: self.discarded,
        }
    }
}

fn draw_sample(
    grid: &GridCase,
    seed: u64,
    index: usize,
    ranges: &SamplingRanges,
    settings: &SolverSettings,
) -> Result<(LoadFlowSample, usize), DatagenError> {
    let mut rng = sample_rng(seed, index as u64);
    let mut discarded = 0;
    loop {
        let inputs = sample_injections(&mut rng, grid, ranges);
        match powerflow::solve(grid, &inputs, settings) {
            Ok(outputs) => return Ok((LoadFlowSample { inputs, outputs }, discarded)),
            Err(e @ (PowerFlowError::NonConvergence { .. } | PowerFlowError::SingularJacobian { .. })) => {
                log::debug!("sample {index}: discarding draw ({e})");
                discarded += 1;
                if discarded >= MAX_ATTEMPTS_PER_SAMPLE {
                    return Err(DatagenError::SampleExhausted { index, last: e });
                }
            }
            Err(e) => return Err(DatagenError::Argument(e.to_string())),
        }
    }
}

/// Generates exactly `n` converged samples.
pub fn generate_dataset(
    grid: &GridCase,
    n: usize,
    seed: u64,
    ranges: &SamplingRanges,
    settings: &SolverSettings,
) -> Result<Dataset, DatagenError> {
    if n == 0 {
        return Err(DatagenError::Argument("sample count must be >= 1".into()));
    }
    ranges.validate()?;
    settings.validate().map_err(|e| DatagenError::Argument(e.to_string()))?;

    let draw = |i: usize| draw_sample(grid, seed, i, ranges, settings);
    #[cfg(feature = "parallel")]
    let drawn: Vec<_> = {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(draw).collect::<Result<_, _>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let drawn: Vec<_> = (0..n).map(draw).collect::<Result<_, _>>()?;

    let discarded: usize = drawn.iter().map(|(_, d)| d).sum();
    let attempts = n + discarded;
    let rate = discarded as f64 / attempts as f64;
    if rate > MAX_DISCARD_RATE {
        return Err(DatagenError::TooManyDiscards {
            discarded,
            attempts,
            rate: rate * 100.0,
        });
    }
    if discarded > 0 {
        log::info!("discarded {discarded} non-convergent draws out of {attempts}");
    }
    Ok(Dataset {
        grid: grid.clone(),
        samples: drawn.into_iter().map(|(s, _)| s).collect(),
        seed,
        ranges: *ranges,
        settings: *settings,
        discarded,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct DatasetHeader {
    format: String,
    rng_algorithm: String,
    seed: u64,
    n_samples: usize,
    discarded: usize,
    ranges: SamplingRanges,
    settings: SolverSettings,
    grid_fingerprint: String,
    grid: GridCase,
    columns: Vec<String>,
}

/// Column names in file order for a grid: per-bus inputs, per-bus outputs,
/// then solver metadata.
pub fn dataset_columns(grid: &GridCase) -> Vec<String> {
    let mut cols = Vec::new();
    for b in &grid.buses {
        let names: [&str; 2] = match b.bus_type {
            BusType::Slack => ["v_set", "angle_set"],
            BusType::PV => ["p_gen_mw", "v_set"],
            BusType::PQ => ["p_load_mw", "q_load_mvar"],
        };
        cols.extend(names.iter().map(|n| format!("bus{}.in.{n}", b.id)));
    }
    for b in &grid.buses {
        for n in ["v_real", "v_imag", "v_mag", "p_mw", "q_mvar"] {
            cols.push(format!("bus{}.out.{n}", b.id));
        }
    }
    cols.push("iterations".into());
    cols.push("max_mismatch".into());
    cols
}

fn sample_row(s: &LoadFlowSample) -> Vec<f64> {
    let mut row = Vec::new();
    for inj in &s.inputs.buses {
        match *inj {
            BusInjection::Slack { v_set, angle_set } => row.extend([v_set, angle_set]),
            BusInjection::Pv { p_gen_mw, v_set } => row.extend([p_gen_mw, v_set]),
            BusInjection::Pq { p_load_mw, q_load_mvar } => row.extend([p_load_mw, q_load_mvar]),
        }
    }
    for b in &s.outputs.buses {
        row.extend([b.v_real, b.v_imag, b.v_mag, b.p_mw, b.q_mvar]);
    }
    row.push(s.outputs.iterations as f64);
    row.push(s.outputs.max_mismatch);
    row
}

fn sample_from_row(grid: &GridCase, row: &[f64]) -> LoadFlowSample {
    let n = grid.n_buses();
    let inputs = InjectionSet {
        buses: grid
            .buses
            .iter()
            .enumerate()
            .map(|(k, b)| {
                let (a, c) = (row[2 * k], row[2 * k + 1]);
                match b.bus_type {
                    BusType::Slack => BusInjection::Slack { v_set: a, angle_set: c },
                    BusType::PV => BusInjection::Pv { p_gen_mw: a, v_set: c },
                    BusType::PQ => BusInjection::Pq {
                        p_load_mw: a,
                        q_load_mvar: c,
                    },
                }
            })
            .collect(),
    };
    let out = &row[2 * n..];
    let buses = (0..n)
        .map(|k| BusState {
            v_real: out[5 * k],
            v_imag: out[5 * k + 1],
            v_mag: out[5 * k + 2],
            p_mw: out[5 * k + 3],
            q_mvar: out[5 * k + 4],
        })
        .collect();
    LoadFlowSample {
        inputs,
        outputs: PowerFlowSolution {
            buses,
            iterations: out[5 * n] as usize,
            max_mismatch: out[5 * n + 1],
        },
    }
}

/// Serializes a dataset: JSON header, column-major little-endian `f64`
/// columns, CRC32 footer.
pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let columns = dataset_columns(&ds.grid);
    let header = DatasetHeader {
        format: "loadflow-dataset".into(),
        rng_algorithm: RNG_ALGORITHM.into(),
        seed: ds.seed,
        n_samples: ds.samples.len(),
        discarded: ds.discarded,
        ranges: ds.ranges,
        settings: ds.settings,
        grid_fingerprint: ds.grid.fingerprint(),
        grid: ds.grid.clone(),
        columns: columns.clone(),
    };
    let header = serde_json::to_string(&header).expect("dataset header serializes");
    let rows: Vec<Vec<f64>> = ds.samples.iter().map(sample_row).collect();
    let mut payload = Vec::with_capacity(columns.len() * rows.len());
    for c in 0..columns.len() {
        payload.extend(rows.iter().map(|r| r[c]));
    }
    container::encode(DATASET_MAGIC, DATASET_VERSION, &header, &payload)
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset, DatagenError> {
    let (header, payload) = container::decode(bytes, DATASET_MAGIC, "dataset", DATASET_VERSION)?;
    let header: DatasetHeader = serde_json::from_str(&header).map_err(|e| DatagenError::Header(e.to_string()))?;
    header
        .grid
        .validate()
        .map_err(|e| DatagenError::Header(e.to_string()))?;
    if header.grid.fingerprint() != header.grid_fingerprint {
        return Err(DatagenError::Header(
            "grid fingerprint does not match the embedded grid".into(),
        ));
    }
    let columns = dataset_columns(&header.grid);
    if columns != header.columns {
        return Err(DatagenError::Header(
            "column list does not match the grid layout".into(),
        ));
    }
    let n = header.n_samples;
    if payload.len() != n * columns.len() {
        return Err(DatagenError::Header(format!(
            "header declares {n} samples but payload holds {} values",
            payload.len()
        )));
    }
    let mut row = vec![0.0; columns.len()];
    let samples = (0..n)
        .map(|i| {
            for (c, v) in row.iter_mut().enumerate() {
                *v = payload[c * n + i];
            }
            sample_from_row(&header.grid, &row)
        })
        .collect();
    Ok(Dataset {
        grid: header.grid,
        samples,
        seed: header.seed,
        ranges: header.ranges,
        settings: header.settings,
        discarded: header.discarded,
    })
}

pub fn write_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<(), DatagenError> {
    std::fs::write(path, encode_dataset(ds))?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Dataset, DatagenError> {
    decode_dataset(&std::fs::read(path)?)
}

/// Writes one CSV row per sample with the same columns as the binary file.
/// Floats use the shortest representation that parses back bit-exactly.
pub fn export_csv(ds: &Dataset, mut out: impl std::io::Write) -> std::io::Result<()> {
    writeln!(out, "{}", dataset_columns(&ds.grid).join(","))?;
    let mut line = String::new();
    for s in &ds.samples {
        line.clear();
        for (k, v) in sample_row(s).iter().enumerate() {
            if k > 0 {
                line.push(',');
            }
            write!(line, "{v}").expect("writing to a String cannot fail");
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}
