use serde::{Deserialize, Serialize};
use web_time::Instant;

use super::ExperimentError;
use crate::datagen::{sample_injections, sample_rng, SamplingRanges};
use crate::grid::GridCase;
use crate::powerflow::{solve, InjectionSet, SolverSettings};
use crate::surrogates::{feature_matrix, TrainedSurrogate};

/// Method label of the exact solver in a [`BenchReport`].
pub const NEWTON_RAPHSON: &str = "N-R";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub counts: Vec<usize>,
    /// Timed repetitions per point, after one discarded warm-up pass.
    pub repetitions: usize,
    pub seed: u64,
    pub ranges: SamplingRanges,
    pub settings: SolverSettings,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            counts: vec![10, 100, 1_000, 10_000],
            repetitions: 5,
            seed: 7,
            ranges: SamplingRanges::default(),
            settings: SolverSettings::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchPoint {
    pub samples: usize,
    pub median_seconds: f64,
    pub seconds_per_sample: f64,
    pub repetitions: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: String,
    pub points: Vec<BenchPoint>,
}

impl MethodTiming {
    pub fn at(&self, samples: usize) -> Option<&BenchPoint> {
        self.points.iter().find(|p| p.samples == samples)
    }

    /// Whether the median total time grows with the sample count.
    pub fn is_monotone(&self) -> bool {
        let mut pts: Vec<&BenchPoint> = self.points.iter().collect();
        pts.sort_by_key(|p| p.samples);
        pts.windows(2).all(|w| w[0].median_seconds <= w[1].median_seconds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub methods: Vec<MethodTiming>,
    /// Sampled cases for which N-R did not converge (still timed).
    pub solver_failures: usize,
    pub parallel_solver: bool,
}

impl BenchReport {
    pub fn method(&self, name: &str) -> Option<&MethodTiming> {
        self.methods.iter().find(|m| m.method == name)
    }

    pub const CSV_HEADER: &'static str = "method,samples,median_seconds,seconds_per_sample";

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::CSV_HEADER);
        for m in &self.methods {
            for p in &m.points {
                out.push_str(&format!(
                    "{},{},{:e},{:e}\n",
                    m.method, p.samples, p.median_seconds, p.seconds_per_sample
                ));
            }
        }
        out
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn time_point(
    samples: usize,
    reps: usize,
    mut run: impl FnMut() -> Result<(), ExperimentError>,
) -> Result<BenchPoint, ExperimentError> {
    run()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let t = Instant::now();
        run()?;
        times.push(t.elapsed().as_secs_f64());
    }
    let median_seconds = median(times.clone());
    Ok(BenchPoint {
        samples,
        median_seconds,
        seconds_per_sample: median_seconds / samples as f64,
        repetitions: times,
    })
}

#[cfg(feature = "parallel")]
fn solve_all(grid: &GridCase, cases: &[InjectionSet], settings: &SolverSettings) -> usize {
    use rayon::prelude::*;
    cases
        .par_iter()
        .filter(|inj| solve(grid, inj, settings).is_err())
        .count()
}

#[cfg(not(feature = "parallel"))]
fn solve_all(grid: &GridCase, cases: &[InjectionSet], settings: &SolverSettings) -> usize {
    cases.iter().filter(|inj| solve(grid, inj, settings).is_err()).count()
}

/// Times each model and the N-R solver on freshly sampled injection sets.
///
/// Model timings cover standardization, the forward pass and
/// de-standardization of a prebuilt feature matrix. N-R timings cover one
/// full solve per case, spread over all worker threads when available.
pub fn benchmark_inference(
    models: &[TrainedSurrogate],
    grid: &GridCase,
    cfg: &BenchConfig,
) -> Result<BenchReport, ExperimentError> {
    if cfg.counts.is_empty() || cfg.counts.contains(&0) {
        return Err(ExperimentError::Argument(
            "sample counts must be a non-empty list of positive numbers".into(),
        ));
    }
    if cfg.repetitions < 5 {
        return Err(ExperimentError::Argument(
            "at least 5 timed repetitions are required".into(),
        ));
    }
    cfg.settings
        .validate()
        .map_err(|e| ExperimentError::Argument(e.to_string()))?;
    for m in models {
        if m.grid.n_buses() != grid.n_buses() || m.grid.bus_types() != grid.bus_types() {
            return Err(ExperimentError::Argument(format!(
                "{} checkpoint was trained on a different grid",
                m.kind()
            )));
        }
    }
    let max = *cfg.counts.iter().max().expect("counts is non-empty");
    let cases: Vec<InjectionSet> = (0..max as u64)
        .map(|i| sample_injections(&mut sample_rng(cfg.seed, i), grid, &cfg.ranges))
        .collect();
    let features = feature_matrix(cases.iter(), grid)?;

    let mut methods = Vec::new();
    for model in models {
        let mut points = Vec::new();
        for &n in &cfg.counts {
            let x = features.slice_rows(0, n);
            points.push(time_point(n, cfg.repetitions, || {
                std::hint::black_box(model.predict(&x)?);
                Ok(())
            })?);
        }
        methods.push(MethodTiming {
            method: model.kind().display_name().to_string(),
            points,
        });
    }

    let mut solver_failures = 0;
    let mut points = Vec::new();
    for &n in &cfg.counts {
        let subset = &cases[..n];
        solver_failures = solver_failures.max(solve_all(grid, subset, &cfg.settings));
        points.push(time_point(n, cfg.repetitions, || {
            std::hint::black_box(solve_all(grid, subset, &cfg.settings));
            Ok(())
        })?);
    }
    methods.push(MethodTiming {
        method: NEWTON_RAPHSON.to_string(),
        points,
    });
    if solver_failures > 0 {
        log::warn!("{solver_failures} benchmark cases did not converge");
    }
    Ok(BenchReport {
        methods,
        solver_failures,
        parallel_solver: cfg!(feature = "parallel"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Standardizer;
    use crate::surrogates::{Architecture, GnnConfig, ModelKind, Surrogate};

    fn untrained(kind: ModelKind) -> TrainedSurrogate {
        let grid = GridCase::ieee5_modified();
        let arch = match kind {
            ModelKind::Mlp => Architecture::default_for(kind),
            ModelKind::Gnn1 => Architecture::Gnn1(GnnConfig { d: 8, k_steps: 2 }),
            ModelKind::Gnn2 => Architecture::Gnn2(GnnConfig { d: 8, k_steps: 2 }),
        };
        let model = Surrogate::new(&grid, arch, 0).unwrap();
        TrainedSurrogate {
            model,
            feature_scaler: Standardizer {
                mean: vec![0.0; 10],
                std: vec![1.0; 10],
            },
            target_scaler: Standardizer {
                mean: vec![0.0; 15],
                std: vec![1.0; 15],
            },
            grid,
            info: serde_json::Value::Null,
        }
    }

    #[test]
    fn empty_or_zero_counts_rejected() {
        let grid = GridCase::ieee5_modified();
        for counts in [vec![], vec![0], vec![10, 0]] {
            let cfg = BenchConfig {
                counts,
                ..BenchConfig::default()
            };
            assert!(matches!(
                benchmark_inference(&[], &grid, &cfg),
                Err(ExperimentError::Argument(_))
            ));
        }
        let cfg = BenchConfig {
            repetitions: 2,
            ..BenchConfig::default()
        };
        assert!(benchmark_inference(&[], &grid, &cfg).is_err());
    }

    #[test]
    fn report_covers_every_method_and_count() {
        let grid = GridCase::ieee5_modified();
        let models: Vec<_> = ModelKind::ALL.into_iter().map(untrained).collect();
        let cfg = BenchConfig {
            counts: vec![20, 400],
            ..BenchConfig::default()
        };
        let r = benchmark_inference(&models, &grid, &cfg).unwrap();
        let names: Vec<&str> = r.methods.iter().map(|m| m.method.as_str()).collect();
        assert_eq!(names, ["MLP", "GNN1", "GNN2", NEWTON_RAPHSON]);
        for m in &r.methods {
            assert_eq!(m.points.len(), 2);
            assert!(m
                .points
                .iter()
                .all(|p| p.repetitions.len() == 5 && p.median_seconds > 0.0));
            let p = m.at(400).unwrap();
            assert!((p.seconds_per_sample * 400.0 - p.median_seconds).abs() < 1e-15);
            // 20x more work must take longer for every method.
            assert!(m.is_monotone(), "{}", m.method);
        }
        assert_eq!(r.solver_failures, 0);
        assert_eq!(r.to_csv().lines().count(), 1 + 4 * 2);
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
