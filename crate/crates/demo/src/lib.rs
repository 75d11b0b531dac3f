//! WebAssembly bindings for the static page in `www/`.
//!
//! Every exported function exchanges JSON strings. The plain-Rust halves
//! (`*_json`, [`Lab`]) carry the logic so they can be tested natively.

use serde_json::json;
use wasm_bindgen::prelude::*;

use loadflow_core::datagen::{generate_dataset, sample_injections, sample_rng, SamplingRanges};
use loadflow_core::grid::GridCase;
use loadflow_core::powerflow::{solve, InjectionSet, SolverSettings};
use loadflow_core::surrogates::{extract_targets, Architecture, ModelKind, TargetLayout};
use loadflow_core::training::{evaluate, split_dataset, SplitData, SplitSpec, TrainConfig, Trainer};

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

pub fn random_injections_json(seed: u32) -> String {
    let grid = GridCase::ieee5_modified();
    let inj = sample_injections(&mut sample_rng(u64::from(seed), 0), &grid, &SamplingRanges::default());
    serde_json::to_string_pretty(&inj).expect("injections serialize")
}

pub fn solve_json(injections: &str) -> Result<String, String> {
    let grid = GridCase::ieee5_modified();
    let inj: InjectionSet = serde_json::from_str(injections).map_err(err)?;
    let sol = solve(&grid, &inj, &SolverSettings::default()).map_err(err)?;
    Ok(json!({
        "iterations": sol.iterations,
        "max_mismatch": sol.max_mismatch,
        "buses": sol.buses.iter().map(|b| json!({
            "v_mag": b.v_mag,
            "angle_deg": b.v_imag.atan2(b.v_real).to_degrees(),
            "p_mw": b.p_mw,
            "q_mvar": b.q_mvar,
        })).collect::<Vec<_>>(),
    })
    .to_string())
}

/// A dataset, its split and a model being trained one epoch per call.
pub struct Lab {
    grid: GridCase,
    data: SplitData,
    trainer: Trainer,
}

impl Lab {
    pub fn new(arch: &str, samples: usize, width: usize, seed: u32, learning_rate: f64) -> Result<Self, String> {
        let kind: ModelKind = arch.parse().map_err(err)?;
        let arch = match Architecture::default_for(kind) {
            Architecture::Mlp(mut c) => {
                c.hidden_width = width;
                Architecture::Mlp(c)
            }
            Architecture::Gnn1(mut c) => {
                c.d = width;
                Architecture::Gnn1(c)
            }
            Architecture::Gnn2(mut c) => {
                c.d = width;
                Architecture::Gnn2(c)
            }
        };
        let grid = GridCase::ieee5_modified();
        let settings = SolverSettings::default();
        let ds =
            generate_dataset(&grid, samples, u64::from(seed), &SamplingRanges::default(), &settings).map_err(err)?;
        let data = split_dataset(&ds, &SplitSpec::default()).map_err(err)?;
        let cfg = TrainConfig {
            learning_rate,
            max_epochs: usize::MAX,
            seed: u64::from(seed),
            ..TrainConfig::default()
        };
        let trainer = Trainer::new(arch, &grid, &data.train, &data.val, &cfg).map_err(err)?;
        Ok(Self { grid, data, trainer })
    }

    pub fn train_epoch(&mut self) -> Result<String, String> {
        let record = self.trainer.step_epoch().map_err(err)?.expect("epochs are unbounded");
        Ok(serde_json::to_string(&record).expect("records serialize"))
    }

    pub fn test_mse(&self) -> Result<f64, String> {
        let model = self
            .trainer
            .best_model()
            .map_err(err)?
            .ok_or("train at least one epoch first")?;
        evaluate(&model, &self.data.test).map_err(err)
    }

    /// Surrogate prediction next to the N-R solution, per target column.
    pub fn compare(&self, injections: &str) -> Result<String, String> {
        let model = self
            .trainer
            .best_model()
            .map_err(err)?
            .ok_or("train at least one epoch first")?;
        let inj: InjectionSet = serde_json::from_str(injections).map_err(err)?;
        let pred = model.predict_injections(std::slice::from_ref(&inj)).map_err(err)?;
        let sol = solve(&self.grid, &inj, &SolverSettings::default()).map_err(err)?;
        let exact = extract_targets(&sol, &self.grid).map_err(err)?;
        let rows: Vec<_> = TargetLayout::for_grid(&self.grid)
            .column_names()
            .into_iter()
            .zip(exact)
            .enumerate()
            .map(|(c, (name, exact))| json!({ "target": name, "surrogate": pred.get(0, c), "newton_raphson": exact }))
            .collect();
        Ok(serde_json::Value::from(rows).to_string())
    }
}

#[wasm_bindgen]
pub fn random_injections(seed: u32) -> String {
    random_injections_json(seed)
}

#[wasm_bindgen]
pub fn solve_case(injections: &str) -> Result<String, JsError> {
    solve_json(injections).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub struct SurrogateLab(Lab);

#[wasm_bindgen]
impl SurrogateLab {
    #[wasm_bindgen(constructor)]
    pub fn new(
        arch: &str,
        samples: usize,
        width: usize,
        seed: u32,
        learning_rate: f64,
    ) -> Result<SurrogateLab, JsError> {
        Lab::new(arch, samples, width, seed, learning_rate)
            .map(SurrogateLab)
            .map_err(|e| JsError::new(&e))
    }

    pub fn train_epoch(&mut self) -> Result<String, JsError> {
        self.0.train_epoch().map_err(|e| JsError::new(&e))
    }

    pub fn test_mse(&self) -> Result<f64, JsError> {
        self.0.test_mse().map_err(|e| JsError::new(&e))
    }

    pub fn compare(&self, injections: &str) -> Result<String, JsError> {
        self.0.compare(injections).map_err(|e| JsError::new(&e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_roundtrip() {
        let inj = random_injections_json(3);
        let out: serde_json::Value = serde_json::from_str(&solve_json(&inj).unwrap()).unwrap();
        assert!(out["max_mismatch"].as_f64().unwrap() <= 1e-8);
        assert_eq!(out["buses"][0]["angle_deg"], 0.0);
        assert!(solve_json("{}").is_err());
    }

    #[test]
    fn lab_trains_and_compares() {
        let mut lab = Lab::new("gnn2", 300, 8, 1, 1e-2).unwrap();
        assert!(lab.test_mse().is_err());
        let first: serde_json::Value = serde_json::from_str(&lab.train_epoch().unwrap()).unwrap();
        assert_eq!(first["epoch"], 1);
        lab.train_epoch().unwrap();
        assert!(lab.test_mse().unwrap().is_finite());
        let rows: serde_json::Value = serde_json::from_str(&lab.compare(&random_injections_json(9)).unwrap()).unwrap();
        assert_eq!(rows.as_array().unwrap().len(), 15);
        assert!(Lab::new("cnn", 300, 8, 1, 1e-2).is_err());
    }
}
