//! Per-bus input features and prediction targets shared by all three models.
//!
//! Features, two per bus in bus-id order:
//! slack `[V_real, V_imag]`, PV `[P, |V|]`, PQ `[P, Q]`.
//!
//! Targets, three per bus in bus-id order:
//! slack `[P, Q, |V|]`, PV `[Q, V_real, V_imag]`, PQ `[|V|, V_real, V_imag]`.
//!
//! Powers are per unit on the case base. PQ features carry the load as
//! consumed (positive numbers); slack/PV power targets are net injections.

use crate::datagen::LoadFlowSample;
use crate::grid::{BusType, GridCase};
use crate::nn::DenseMatrix;
use crate::powerflow::{BusInjection, InjectionSet, PowerFlowSolution};

use super::SurrogateError;

pub const FEATURES_PER_BUS: usize = 2;
pub const TARGETS_PER_BUS: usize = 3;

/// Column names and ordering of the flattened feature vector.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureLayout {
    pub bus_types: Vec<BusType>,
}

impl FeatureLayout {
    pub fn for_grid(grid: &GridCase) -> Self {
        Self {
            bus_types: grid.bus_types(),
        }
    }

    pub fn width(&self) -> usize {
        FEATURES_PER_BUS * self.bus_types.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.bus_types
            .iter()
            .enumerate()
            .flat_map(|(k, t)| {
                let names: [&str; 2] = match t {
                    BusType::Slack => ["v_real", "v_imag"],
                    BusType::PV => ["p", "v_mag"],
                    BusType::PQ => ["p", "q"],
                };
                names.map(|n| format!("bus{}.{n}", k + 1))
            })
            .collect()
    }
}

/// Column names and ordering of the flattened target vector.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetLayout {
    pub bus_types: Vec<BusType>,
}

impl TargetLayout {
    pub fn for_grid(grid: &GridCase) -> Self {
        Self {
            bus_types: grid.bus_types(),
        }
    }

    pub fn width(&self) -> usize {
        TARGETS_PER_BUS * self.bus_types.len()
    }

    pub fn column_names(&self) -> Vec<String> {
        self.bus_types
            .iter()
            .enumerate()
            .flat_map(|(k, t)| {
                let names: [&str; 3] = match t {
                    BusType::Slack => ["p", "q", "v_mag"],
                    BusType::PV => ["q", "v_real", "v_imag"],
                    BusType::PQ => ["v_mag", "v_real", "v_imag"],
                };
                names.map(|n| format!("bus{}.{n}", k + 1))
            })
            .collect()
    }
}

/// Per-bus feature rows (`N × 2`) for one injection set, in per unit.
pub fn encode_features(inputs: &InjectionSet, grid: &GridCase) -> Result<DenseMatrix, SurrogateError> {
    let mut out = DenseMatrix::zeros(grid.n_buses(), FEATURES_PER_BUS);
    write_features(inputs, grid, out.as_mut_slice())?;
    Ok(out)
}

fn write_features(inputs: &InjectionSet, grid: &GridCase, out: &mut [f64]) -> Result<(), SurrogateError> {
    if inputs.buses.len() != grid.n_buses() {
        return Err(SurrogateError::Layout(format!(
            "{} injections for {} buses",
            inputs.buses.len(),
            grid.n_buses()
        )));
    }
    let base = grid.s_base_mva;
    for (k, (inj, bus)) in inputs.buses.iter().zip(&grid.buses).enumerate() {
        if inj.bus_type() != bus.bus_type {
            return Err(SurrogateError::Layout(format!(
                "bus {} is {} but its injection is {}",
                k + 1,
                bus.bus_type,
                inj.bus_type()
            )));
        }
        let row = match *inj {
            BusInjection::Slack { v_set, angle_set } => [v_set * angle_set.cos(), v_set * angle_set.sin()],
            BusInjection::Pv { p_gen_mw, v_set } => [p_gen_mw / base, v_set],
            BusInjection::Pq { p_load_mw, q_load_mvar } => [p_load_mw / base, q_load_mvar / base],
        };
        out[FEATURES_PER_BUS * k..FEATURES_PER_BUS * (k + 1)].copy_from_slice(&row);
    }
    Ok(())
}

/// Flattened target vector (length `3N`) of one solved load flow.
pub fn extract_targets(solution: &PowerFlowSolution, grid: &GridCase) -> Result<Vec<f64>, SurrogateError> {
    if solution.buses.len() != grid.n_buses() {
        return Err(SurrogateError::Layout("solution size does not match grid".into()));
    }
    let base = grid.s_base_mva;
    let mut out = Vec::with_capacity(TARGETS_PER_BUS * grid.n_buses());
    for (s, bus) in solution.buses.iter().zip(&grid.buses) {
        match bus.bus_type {
            BusType::Slack => out.extend([s.p_mw / base, s.q_mvar / base, s.v_mag]),
            BusType::PV => out.extend([s.q_mvar / base, s.v_real, s.v_imag]),
            BusType::PQ => out.extend([s.v_mag, s.v_real, s.v_imag]),
        }
    }
    Ok(out)
}

/// Flattened features of many injection sets, one row each (`B × 2N`).
pub fn feature_matrix<'a>(
    inputs: impl ExactSizeIterator<Item = &'a InjectionSet>,
    grid: &GridCase,
) -> Result<DenseMatrix, SurrogateError> {
    let width = FEATURES_PER_BUS * grid.n_buses();
    let mut out = DenseMatrix::zeros(inputs.len(), width);
    for (r, inj) in inputs.enumerate() {
        write_features(inj, grid, out.row_mut(r))?;
    }
    Ok(out)
}

/// Feature and target matrices of labelled samples.
pub fn sample_matrices(
    samples: &[LoadFlowSample],
    grid: &GridCase,
) -> Result<(DenseMatrix, DenseMatrix), SurrogateError> {
    let x = feature_matrix(samples.iter().map(|s| &s.inputs), grid)?;
    let width = TARGETS_PER_BUS * grid.n_buses();
    let mut y = DenseMatrix::zeros(samples.len(), width);
    for (r, s) in samples.iter().enumerate() {
        y.row_mut(r).copy_from_slice(&extract_targets(&s.outputs, grid)?);
    }
    Ok((x, y))
}
