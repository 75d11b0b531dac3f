//! Grid case format, bus admittance matrix and the adjacency matrices consumed
//! by the graph surrogates.
//!
//! A case file is a JSON object:
//!
//! ```json
//! {
//!   "name": "optional free text",
//!   "s_base_mva": 100.0,
//!   "buses": [
//!     { "id": 1, "type": "slack", "v_set": 1.06, "angle_set": 0.0 },
//!     { "id": 2, "type": "pv", "v_set": 1.0 },
//!     { "id": 3, "type": "pq" }
//!   ],
//!   "branches": [
//!     { "from": 1, "to": 2, "r": 0.02, "x": 0.06, "b_shunt": 0.06 }
//!   ]
//! }
//! ```
//!
//! Branch parameters are per unit on `s_base_mva`; `b_shunt` is the total line
//! charging susceptance, split equally between both ends. Unknown keys are
//! rejected. Omitted `v_set` defaults to 1.0 p.u., omitted `angle_set` to 0 rad.

use std::collections::VecDeque;
use std::fmt;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

/// The modified IEEE 5-bus case shipped with the crate.
pub const IEEE5_MODIFIED: &str = include_str!("../cases/ieee5_modified.case");

/// Off-diagonal admittance entries with magnitude at or below this are treated as zero.
pub const ADMITTANCE_ZERO_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("failed to read case file {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("case parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid grid case: {0}")]
    Validation(String),
    #[error("isolated bus {0}: degree normalization needs every bus to have a neighbour")]
    IsolatedBus(usize),
    #[error("adjacency matrix is already normalized")]
    AlreadyNormalized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BusType {
    Slack,
    #[serde(rename = "pv")]
    PV,
    #[serde(rename = "pq")]
    PQ,
}

impl BusType {
    pub const ALL: [BusType; 3] = [BusType::Slack, BusType::PV, BusType::PQ];

    /// Dense index 0..3 used to pick per-type encoder/decoder parameters.
    pub fn index(self) -> usize {
        match self {
            BusType::Slack => 0,
            BusType::PV => 1,
            BusType::PQ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BusType::Slack => "slack",
            BusType::PV => "pv",
            BusType::PQ => "pq",
        }
    }
}

impl fmt::Display for BusType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BusSpec {
    pub id: usize,
    #[serde(rename = "type")]
    pub bus_type: BusType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_set: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub angle_set: Option<f64>,
}

impl BusSpec {
    /// Voltage magnitude setpoint in p.u., defaulting to 1.0.
    pub fn voltage_setpoint(&self) -> f64 {
        self.v_set.unwrap_or(1.0)
    }

    /// Angle setpoint in radians, defaulting to 0.
    pub fn angle_setpoint(&self) -> f64 {
        self.angle_set.unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    #[serde(rename = "from")]
    pub from_bus: usize,
    #[serde(rename = "to")]
    pub to_bus: usize,
    pub r: f64,
    pub x: f64,
    #[serde(default)]
    pub b_shunt: f64,
}

impl BranchSpec {
    pub fn series_admittance(&self) -> Complex64 {
        Complex64::new(self.r, self.x).inv()
    }
}

/// A validated grid: buses sorted by id, ids contiguous from 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCase {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub s_base_mva: f64,
    pub buses: Vec<BusSpec>,
    pub branches: Vec<BranchSpec>,
}

impl GridCase {
    /// Parses and validates a case from JSON text.
    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let mut case: GridCase = serde_json::from_str(text).map_err(|e| GridError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        case.buses.sort_by_key(|b| b.id);
        case.validate()?;
        Ok(case)
    }

    /// The default modified IEEE 5-bus case.
    pub fn ieee5_modified() -> Self {
        Self::from_json(IEEE5_MODIFIED).expect("bundled case is valid")
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn bus_types(&self) -> Vec<BusType> {
        self.buses.iter().map(|b| b.bus_type).collect()
    }

    /// Zero-based index of the slack bus.
    pub fn slack_index(&self) -> usize {
        self.buses
            .iter()
            .position(|b| b.bus_type == BusType::Slack)
            .expect("validated case has a slack bus")
    }

    pub fn indices_of(&self, kind: BusType) -> Vec<usize> {
        self.buses
            .iter()
            .enumerate()
            .filter(|(_, b)| b.bus_type == kind)
            .map(|(i, _)| i)
            .collect()
    }

    /// Checks every structural invariant of a case.
    pub fn validate(&self) -> Result<(), GridError> {
        let invalid = |msg: String| Err(GridError::Validation(msg));
        if !(self.s_base_mva.is_finite() && self.s_base_mva > 0.0) {
            return invalid(format!("s_base_mva must be > 0, got {}", self.s_base_mva));
        }
        if self.buses.is_empty() {
            return invalid("case has no buses".into());
        }
        for (k, bus) in self.buses.iter().enumerate() {
            if bus.id != k + 1 {
                return invalid(format!(
                    "bus ids must be contiguous 1..{}, found id {} at position {}",
                    self.buses.len(),
                    bus.id,
                    k + 1
                ));
            }
            if let Some(v) = bus.v_set {
                if bus.bus_type == BusType::PQ {
                    return invalid(format!("bus {}: v_set is only allowed on slack and pv buses", bus.id));
                }
                if !(v.is_finite() && v > 0.0) {
                    return invalid(format!("bus {}: v_set must be > 0, got {v}", bus.id));
                }
            }
            if let Some(a) = bus.angle_set {
                if bus.bus_type != BusType::Slack {
                    return invalid(format!("bus {}: angle_set is only allowed on the slack bus", bus.id));
                }
                if !a.is_finite() {
                    return invalid(format!("bus {}: angle_set must be finite", bus.id));
                }
            }
        }
        let n_slack = self.buses.iter().filter(|b| b.bus_type == BusType::Slack).count();
        if n_slack != 1 {
            return invalid(format!("exactly one slack bus required, found {n_slack}"));
        }
        if self.buses.len() < 2 {
            return invalid("at least one non-slack bus required".into());
        }
        let n = self.buses.len();
        for br in &self.branches {
            for id in [br.from_bus, br.to_bus] {
                if id == 0 || id > n {
                    return invalid(format!(
                        "branch {}-{} references unknown bus id {id}",
                        br.from_bus, br.to_bus
                    ));
                }
            }
            if br.from_bus == br.to_bus {
                return invalid(format!("branch {}-{} is a self-loop", br.from_bus, br.to_bus));
            }
            if ![br.r, br.x, br.b_shunt].iter().all(|v| v.is_finite()) {
                return invalid(format!(
                    "branch {}-{} has non-finite parameters",
                    br.from_bus, br.to_bus
                ));
            }
            if br.r == 0.0 && br.x == 0.0 {
                return invalid(format!("branch {}-{} has zero impedance", br.from_bus, br.to_bus));
            }
        }
        if !self.is_connected() {
            return invalid("network is not connected".into());
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.buses.len();
        let mut neighbours = vec![Vec::new(); n];
        for br in &self.branches {
            neighbours[br.from_bus - 1].push(br.to_bus - 1);
            neighbours[br.to_bus - 1].push(br.from_bus - 1);
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(i) = queue.pop_front() {
            for &j in &neighbours[i] {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Returns the same network with bus `k` (0-based) renamed to `new_index[k]`.
    pub fn relabeled(&self, new_index: &[usize]) -> Result<Self, GridError> {
        let n = self.n_buses();
        let mut check = new_index.to_vec();
        check.sort_unstable();
        if check != (0..n).collect::<Vec<_>>() {
            return Err(GridError::Validation("relabeling is not a permutation".into()));
        }
        let mut buses: Vec<BusSpec> = self
            .buses
            .iter()
            .enumerate()
            .map(|(k, b)| BusSpec {
                id: new_index[k] + 1,
                ..b.clone()
            })
            .collect();
        buses.sort_by_key(|b| b.id);
        let branches = self
            .branches
            .iter()
            .map(|br| BranchSpec {
                from_bus: new_index[br.from_bus - 1] + 1,
                to_bus: new_index[br.to_bus - 1] + 1,
                ..br.clone()
            })
            .collect();
        let case = GridCase {
            name: self.name.clone(),
            s_base_mva: self.s_base_mva,
            buses,
            branches,
        };
        case.validate()?;
        Ok(case)
    }

    /// Hex SHA-256 of the canonical JSON encoding; identifies the network in dataset headers.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("grid case serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Reads and validates a case file.
pub fn load_grid_case(path: impl AsRef<Path>) -> Result<GridCase, GridError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| GridError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    GridCase::from_json(&text)
}

/// Complex bus admittance matrix `Y = Y_r + j Y_i`, stored as two row-major real matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct AdmittanceMatrix {
    n: usize,
    pub y_real: Vec<f64>,
    pub y_imag: Vec<f64>,
}

impl AdmittanceMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            y_real: vec![0.0; n * n],
            y_imag: vec![0.0; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        let k = i * self.n + j;
        Complex64::new(self.y_real[k], self.y_imag[k])
    }

    fn add(&mut self, i: usize, j: usize, y: Complex64) {
        let k = i * self.n + j;
        self.y_real[k] += y.re;
        self.y_imag[k] += y.im;
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..self.n).all(|j| (self.get(i, j) - self.get(j, i)).norm() <= tol))
    }
}

/// Builds `Y_bus` from π-model branches (no taps or phase shifters).
pub fn build_admittance(grid: &GridCase) -> AdmittanceMatrix {
    let mut y = AdmittanceMatrix::zeros(grid.n_buses());
    for br in &grid.branches {
        let (f, t) = (br.from_bus - 1, br.to_bus - 1);
        let ys = br.series_admittance();
        let half_charging = Complex64::new(0.0, br.b_shunt / 2.0);
        y.add(f, f, ys + half_charging);
        y.add(t, t, ys + half_charging);
        y.add(f, t, -ys);
        y.add(t, f, -ys);
    }
    y
}

/// Square adjacency matrix, either binary or row-normalized by degree.
#[derive(Clone, Debug, PartialEq)]
pub struct AdjacencyMatrix {
    n: usize,
    a: Vec<f64>,
    normalized: bool,
}

impl AdjacencyMatrix {
    /// Wraps a hand-built row-major matrix. No structural checks are made.
    pub fn from_dense(n: usize, a: Vec<f64>, normalized: bool) -> Self {
        assert_eq!(a.len(), n * n, "adjacency data must be n*n");
        Self { n, a, normalized }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.a
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.n..(i + 1) * self.n]
    }

    /// Row sums; for a binary matrix these are the node degrees.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        (0..self.n)
            .map(|i| self.row(i).iter().filter(|&&v| v != 0.0).count())
            .collect()
    }
}

/// `A_ij = 1` iff `Y_ij` has a nonzero real or imaginary part, for `i != j`.
pub fn build_adjacency(y: &AdmittanceMatrix) -> AdjacencyMatrix {
    let n = y.size();
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let k = i * n + j;
            if y.y_real[k].abs() > ADMITTANCE_ZERO_THRESHOLD || y.y_imag[k].abs() > ADMITTANCE_ZERO_THRESHOLD {
                a[k] = 1.0;
            }
        }
    }
    AdjacencyMatrix {
        n,
        a,
        normalized: false,
    }
}

/// Degree normalization `A <- D^-1 A`.
pub fn normalize_adjacency(a: &AdjacencyMatrix) -> Result<AdjacencyMatrix, GridError> {
    if a.normalized {
        return Err(GridError::AlreadyNormalized);
    }
    let n = a.n;
    let mut out = a.a.clone();
    for (i, degree) in a.row_sums().into_iter().enumerate() {
        if degree == 0.0 {
            return Err(GridError::IsolatedBus(i + 1));
        }
        for v in &mut out[i * n..(i + 1) * n] {
            *v /= degree;
        }
    }
    Ok(AdjacencyMatrix {
        n,
        a: out,
        normalized: true,
    })
}

/// Normalized adjacency straight from a grid case.
pub fn grid_adjacency(grid: &GridCase) -> AdjacencyMatrix {
    normalize_adjacency(&build_adjacency(&build_admittance(grid))).expect("connected grid has no isolated bus")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_bus(r: f64, x: f64) -> GridCase {
        GridCase {
            name: None,
            s_base_mva: 100.0,
            buses: vec![
                BusSpec {
                    id: 1,
                    bus_type: BusType::Slack,
                    v_set: None,
                    angle_set: None,
                },
                BusSpec {
                    id: 2,
                    bus_type: BusType::PQ,
                    v_set: None,
                    angle_set: None,
                },
            ],
            branches: vec![BranchSpec {
                from_bus: 1,
                to_bus: 2,
                r,
                x,
                b_shunt: 0.0,
            }],
        }
    }

    #[test]
    fn default_case_has_expected_bus_types() {
        let g = GridCase::ieee5_modified();
        assert_eq!(g.n_buses(), 5);
        assert_eq!(
            g.bus_types(),
            vec![BusType::Slack, BusType::PV, BusType::PQ, BusType::PQ, BusType::PQ]
        );
        assert_eq!(g.branches.len(), 7);
    }

    #[test]
    fn two_slack_buses_rejected() {
        let text = r#"{"s_base_mva": 100, "buses": [
            {"id": 1, "type": "slack"}, {"id": 2, "type": "slack"}, {"id": 3, "type": "pq"}],
            "branches": [{"from": 1, "to": 2, "r": 0, "x": 0.1, "b_shunt": 0},
                         {"from": 2, "to": 3, "r": 0, "x": 0.1, "b_shunt": 0}]}"#;
        let err = GridCase::from_json(text).unwrap_err().to_string();
        assert!(err.contains("exactly one slack"), "{err}");
    }

    #[test]
    fn unknown_bus_in_branch_rejected() {
        let mut g = GridCase::ieee5_modified();
        g.branches.push(BranchSpec {
            from_bus: 1,
            to_bus: 6,
            r: 0.01,
            x: 0.1,
            b_shunt: 0.0,
        });
        let text = serde_json::to_string(&g).unwrap();
        let err = GridCase::from_json(&text).unwrap_err().to_string();
        assert!(err.contains("unknown bus id"), "{err}");
    }

    #[test]
    fn other_invariants_rejected() {
        let mut g = two_bus(0.0, 0.0);
        assert!(g.validate().unwrap_err().to_string().contains("zero impedance"));
        g = two_bus(0.0, 0.1);
        g.branches.clear();
        assert!(g.validate().unwrap_err().to_string().contains("not connected"));
        g = two_bus(0.0, 0.1);
        g.s_base_mva = 0.0;
        assert!(g.validate().is_err());
        g = two_bus(0.0, 0.1);
        g.buses[1].v_set = Some(1.0);
        assert!(g.validate().is_err());
        g = two_bus(0.0, 0.1);
        g.buses[0].v_set = Some(-1.0);
        assert!(g.validate().is_err());
        g = two_bus(0.0, 0.1);
        g.buses.truncate(1);
        g.branches.clear();
        assert!(g.validate().unwrap_err().to_string().contains("non-slack"));
    }

    #[test]
    fn unknown_keys_and_syntax_errors_carry_position() {
        let text = "{\"s_base_mva\": 100,\n \"colour\": 1, \"buses\": [], \"branches\": []}";
        match GridCase::from_json(text).unwrap_err() {
            GridError::Parse { line, message, .. } => {
                assert_eq!(line, 2);
                assert!(message.contains("colour"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
        let text = "{\"s_base_mva\": 100,\n\n \"buses\": [ {\"id\": 1, \"type\": \"slak\"} ], \"branches\": []}";
        assert!(matches!(
            GridCase::from_json(text),
            Err(GridError::Parse { line: 3, .. })
        ));
    }

    #[test]
    fn load_from_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("case.json");
        std::fs::write(&path, IEEE5_MODIFIED).unwrap();
        assert_eq!(load_grid_case(&path).unwrap(), GridCase::ieee5_modified());
        assert!(matches!(
            load_grid_case(dir.path().join("missing")),
            Err(GridError::Io { .. })
        ));
    }

    #[test]
    fn pure_reactance_branch_admittance() {
        let y = build_admittance(&two_bus(0.0, 0.1));
        // 1/(j0.1) = -j10, so Y_12 = +j10 and Y_11 = -j10.
        assert_abs_diff_eq!(y.get(0, 1).re, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.get(0, 1).im, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.get(0, 0).im, -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(y.get(1, 1).im, -10.0, epsilon = 1e-12);
        assert!(y.is_symmetric(0.0));
    }

    #[test]
    fn shunt_charging_lands_on_diagonal() {
        let mut g = two_bus(0.0, 0.1);
        g.branches[0].b_shunt = 0.4;
        let y = build_admittance(&g);
        assert_abs_diff_eq!(y.get(0, 0).im, -10.0 + 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(y.get(0, 1).im, 10.0, epsilon = 1e-12);
    }

    #[test]
    fn five_bus_sparsity_matches_edge_list() {
        let g = GridCase::ieee5_modified();
        let y = build_admittance(&g);
        let edges = [(1, 2), (1, 3), (2, 3), (2, 4), (2, 5), (3, 4), (4, 5)];
        for i in 0..5 {
            for j in 0..5 {
                let expected = i == j || edges.contains(&(i + 1, j + 1)) || edges.contains(&(j + 1, i + 1));
                assert_eq!(y.get(i, j).norm() > 0.0, expected, "({i},{j})");
            }
        }
        assert!(y.is_symmetric(1e-12));
    }

    #[test]
    fn five_bus_degrees() {
        let a = build_adjacency(&build_admittance(&GridCase::ieee5_modified()));
        assert_eq!(a.degrees(), vec![2, 4, 3, 3, 2]);
        assert!(!a.is_normalized());
    }

    #[test]
    fn diagonal_only_admittance_gives_empty_graph() {
        let mut y = AdmittanceMatrix::zeros(3);
        for i in 0..3 {
            y.add(i, i, Complex64::new(1.0, -5.0));
        }
        assert!(build_adjacency(&y).as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn imaginary_only_entries_count_as_edges() {
        let mut real = AdmittanceMatrix::zeros(2);
        real.add(0, 1, Complex64::new(3.0, 0.0));
        real.add(1, 0, Complex64::new(3.0, 0.0));
        let mut imag = AdmittanceMatrix::zeros(2);
        imag.add(0, 1, Complex64::new(0.0, 3.0));
        imag.add(1, 0, Complex64::new(0.0, 3.0));
        assert_eq!(build_adjacency(&real), build_adjacency(&imag));
        // Below the threshold entries vanish.
        let mut tiny = AdmittanceMatrix::zeros(2);
        tiny.add(0, 1, Complex64::new(1e-13, 0.0));
        assert_eq!(build_adjacency(&tiny).degrees(), vec![0, 0]);
    }

    #[test]
    fn normalized_five_bus_rows() {
        let a = grid_adjacency(&GridCase::ieee5_modified());
        assert!(a.is_normalized());
        assert_eq!(a.row(0), &[0.0, 0.5, 0.5, 0.0, 0.0]);
        for s in a.row_sums() {
            assert_abs_diff_eq!(s, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn complete_graph_normalization() {
        let k3 = AdjacencyMatrix::from_dense(3, vec![0., 1., 1., 1., 0., 1., 1., 1., 0.], false);
        let n = normalize_adjacency(&k3).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(n.get(i, j), if i == j { 0.0 } else { 0.5 });
            }
        }
        assert!(matches!(normalize_adjacency(&n), Err(GridError::AlreadyNormalized)));
    }

    #[test]
    fn isolated_bus_rejected() {
        let a = AdjacencyMatrix::from_dense(3, vec![0., 1., 0., 1., 0., 0., 0., 0., 0.], false);
        assert!(matches!(normalize_adjacency(&a), Err(GridError::IsolatedBus(3))));
    }

    #[test]
    fn relabel_round_trip() {
        let g = GridCase::ieee5_modified();
        let perm = [4, 2, 0, 1, 3];
        let mut inverse = [0; 5];
        for (k, &p) in perm.iter().enumerate() {
            inverse[p] = k;
        }
        let back = g.relabeled(&perm).unwrap().relabeled(&inverse).unwrap();
        assert_eq!(build_admittance(&back), build_admittance(&g));
        assert!(g.relabeled(&[0, 0, 1, 2, 3]).is_err());
    }

    #[test]
    fn fingerprint_is_stable_and_sensitive() {
        let g = GridCase::ieee5_modified();
        assert_eq!(g.fingerprint(), GridCase::ieee5_modified().fingerprint());
        assert_eq!(g.fingerprint().len(), 64);
        let mut h = g.clone();
        h.branches[0].x += 0.01;
        assert_ne!(g.fingerprint(), h.fingerprint());
    }
}
