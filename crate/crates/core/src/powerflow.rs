//! Polar-form Newton-Raphson AC load flow.
//!
//! All internal quantities are per unit on the case `s_base_mva`; injections
//! enter in MW/MVAr and results leave in MW/MVAr.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{build_admittance, AdmittanceMatrix, BusType, GridCase};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("Newton-Raphson did not converge after {iterations} iterations (max mismatch {max_mismatch:.3e} p.u.)")]
    NonConvergence { iterations: usize, max_mismatch: f64 },
    #[error("singular Jacobian at iteration {iteration}")]
    SingularJacobian { iteration: usize },
    #[error("injection set does not match the grid: {0}")]
    InjectionMismatch(String),
    #[error("invalid solver settings: {0}")]
    Settings(String),
}

/// Specified quantities for one bus. The variant must match the bus type.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum BusInjection {
    Slack { v_set: f64, angle_set: f64 },
    Pv { p_gen_mw: f64, v_set: f64 },
    Pq { p_load_mw: f64, q_load_mvar: f64 },
}

impl BusInjection {
    pub fn bus_type(&self) -> BusType {
        match self {
            BusInjection::Slack { .. } => BusType::Slack,
            BusInjection::Pv { .. } => BusType::PV,
            BusInjection::Pq { .. } => BusType::PQ,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InjectionSet {
    pub buses: Vec<BusInjection>,
}

impl InjectionSet {
    /// Case setpoints for slack and PV buses, zero generation and zero load elsewhere.
    pub fn zero_for(grid: &GridCase) -> Self {
        let buses = grid
            .buses
            .iter()
            .map(|b| match b.bus_type {
                BusType::Slack => BusInjection::Slack {
                    v_set: b.voltage_setpoint(),
                    angle_set: b.angle_setpoint(),
                },
                BusType::PV => BusInjection::Pv {
                    p_gen_mw: 0.0,
                    v_set: b.voltage_setpoint(),
                },
                BusType::PQ => BusInjection::Pq {
                    p_load_mw: 0.0,
                    q_load_mvar: 0.0,
                },
            })
            .collect();
        Self { buses }
    }

    pub fn check_against(&self, grid: &GridCase) -> Result<(), PowerFlowError> {
        if self.buses.len() != grid.n_buses() {
            return Err(PowerFlowError::InjectionMismatch(format!(
                "{} injections for {} buses",
                self.buses.len(),
                grid.n_buses()
            )));
        }
        for (k, (inj, bus)) in self.buses.iter().zip(&grid.buses).enumerate() {
            if inj.bus_type() != bus.bus_type {
                return Err(PowerFlowError::InjectionMismatch(format!(
                    "bus {} is {} but its injection is {}",
                    k + 1,
                    bus.bus_type,
                    inj.bus_type()
                )));
            }
            let values: &[f64] = match inj {
                BusInjection::Slack { v_set, angle_set } => &[*v_set, *angle_set],
                BusInjection::Pv { p_gen_mw, v_set } => &[*p_gen_mw, *v_set],
                BusInjection::Pq { p_load_mw, q_load_mvar } => &[*p_load_mw, *q_load_mvar],
            };
            if values.iter().any(|v| !v.is_finite()) {
                return Err(PowerFlowError::InjectionMismatch(format!(
                    "bus {} has non-finite values",
                    k + 1
                )));
            }
        }
        Ok(())
    }

    /// Specified net complex injection in p.u. (loads count negative). Slack
    /// entries and the PV reactive part are unconstrained and reported as 0.
    pub fn specified_power_pu(&self, s_base_mva: f64) -> Vec<Complex64> {
        self.buses
            .iter()
            .map(|inj| match *inj {
                BusInjection::Slack { .. } => Complex64::new(0.0, 0.0),
                BusInjection::Pv { p_gen_mw, .. } => Complex64::new(p_gen_mw / s_base_mva, 0.0),
                BusInjection::Pq { p_load_mw, q_load_mvar } => {
                    Complex64::new(-p_load_mw / s_base_mva, -q_load_mvar / s_base_mva)
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// Convergence threshold on the largest |ΔP|, |ΔQ| in p.u.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Start from 1.0 p.u. / 0 rad (PV buses at their setpoint). Otherwise
    /// non-slack angles start at the slack angle setpoint.
    pub flat_start: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
            flat_start: true,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<(), PowerFlowError> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(PowerFlowError::Settings(format!(
                "tolerance must be > 0, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(PowerFlowError::Settings("max_iterations must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BusState {
    pub v_real: f64,
    pub v_imag: f64,
    pub v_mag: f64,
    /// Net active injection (generation minus load), MW.
    pub p_mw: f64,
    /// Net reactive injection, MVAr.
    pub q_mvar: f64,
}

impl BusState {
    pub fn voltage(&self) -> Complex64 {
        Complex64::new(self.v_real, self.v_imag)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowSolution {
    pub buses: Vec<BusState>,
    pub iterations: usize,
    /// Largest constrained mismatch at the returned point, p.u.
    pub max_mismatch: f64,
}

impl PowerFlowSolution {
    pub fn voltages(&self) -> Vec<Complex64> {
        self.buses.iter().map(BusState::voltage).collect()
    }
}

/// Complex power injected at every bus, `S = V ⊙ conj(Y V)`, p.u.
pub fn power_injections(y: &AdmittanceMatrix, v: &[Complex64]) -> Vec<Complex64> {
    let n = y.size();
    (0..n)
        .map(|i| {
            let current: Complex64 = (0..n).map(|j| y.get(i, j) * v[j]).sum();
            v[i] * current.conj()
        })
        .collect()
}

/// Per-bus `(ΔP, ΔQ) = S_spec − S_calc(V)` in p.u. Quantities that are not
/// specified (both at the slack, Q at PV buses) are reported as zero.
pub fn compute_mismatch(
    grid: &GridCase,
    inj: &InjectionSet,
    voltages: &[Complex64],
) -> Result<Vec<(f64, f64)>, PowerFlowError> {
    inj.check_against(grid)?;
    if voltages.len() != grid.n_buses() {
        return Err(PowerFlowError::InjectionMismatch(format!(
            "{} voltages for {} buses",
            voltages.len(),
            grid.n_buses()
        )));
    }
    let y = build_admittance(grid);
    Ok(mismatch_with(&y, grid, inj, voltages))
}

fn mismatch_with(y: &AdmittanceMatrix, grid: &GridCase, inj: &InjectionSet, voltages: &[Complex64]) -> Vec<(f64, f64)> {
    let spec = inj.specified_power_pu(grid.s_base_mva);
    power_injections(y, voltages)
        .into_iter()
        .zip(spec)
        .zip(&grid.buses)
        .map(|((calc, spec), bus)| match bus.bus_type {
            BusType::Slack => (0.0, 0.0),
            BusType::PV => (spec.re - calc.re, 0.0),
            BusType::PQ => (spec.re - calc.re, spec.im - calc.im),
        })
        .collect()
}

pub fn max_abs_mismatch(mismatch: &[(f64, f64)]) -> f64 {
    mismatch.iter().map(|&(p, q)| p.abs().max(q.abs())).fold(0.0, f64::max)
}

/// Active/reactive flow at both ends of a branch, p.u.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchFlow {
    pub from_end: Complex64,
    pub to_end: Complex64,
}

impl BranchFlow {
    /// Series I²R loss of the branch.
    pub fn active_loss(&self) -> f64 {
        self.from_end.re + self.to_end.re
    }
}

pub fn branch_flows(grid: &GridCase, voltages: &[Complex64]) -> Vec<BranchFlow> {
    grid.branches
        .iter()
        .map(|br| {
            let (vf, vt) = (voltages[br.from_bus - 1], voltages[br.to_bus - 1]);
            let ys = br.series_admittance();
            let ysh = Complex64::new(0.0, br.b_shunt / 2.0);
            let i_from = (ys + ysh) * vf - ys * vt;
            let i_to = (ys + ysh) * vt - ys * vf;
            BranchFlow {
                from_end: vf * i_from.conj(),
                to_end: vt * i_to.conj(),
            }
        })
        .collect()
}

/// Solves the load flow from a flat (or slack-angle) start.
pub fn solve(
    grid: &GridCase,
    inj: &InjectionSet,
    settings: &SolverSettings,
) -> Result<PowerFlowSolution, PowerFlowError> {
    settings.validate()?;
    inj.check_against(grid)?;
    let n = grid.n_buses();
    let mut v0 = Vec::with_capacity(n);
    let slack_angle = inj
        .buses
        .iter()
        .find_map(|b| match b {
            BusInjection::Slack { angle_set, .. } => Some(*angle_set),
            _ => None,
        })
        .unwrap_or(0.0);
    let start_angle = if settings.flat_start { 0.0 } else { slack_angle };
    for b in &inj.buses {
        v0.push(match *b {
            BusInjection::Slack { v_set, angle_set } => Complex64::from_polar(v_set, angle_set),
            BusInjection::Pv { v_set, .. } => Complex64::from_polar(v_set, start_angle),
            BusInjection::Pq { .. } => Complex64::from_polar(1.0, start_angle),
        });
    }
    solve_from(grid, inj, settings, &v0)
}

/// Solves the load flow from the given initial voltages. Slack and PV
/// magnitudes are reset to their setpoints before iterating.
pub fn solve_from(
    grid: &GridCase,
    inj: &InjectionSet,
    settings: &SolverSettings,
    initial: &[Complex64],
) -> Result<PowerFlowSolution, PowerFlowError> {
    settings.validate()?;
    inj.check_against(grid)?;
    let n = grid.n_buses();
    if initial.len() != n {
        return Err(PowerFlowError::InjectionMismatch(format!(
            "{} initial voltages for {} buses",
            initial.len(),
            n
        )));
    }
    let y = build_admittance(grid);
    let spec = inj.specified_power_pu(grid.s_base_mva);

    let mut vm: Vec<f64> = initial.iter().map(|v| v.norm()).collect();
    let mut va: Vec<f64> = initial.iter().map(|v| v.arg()).collect();
    for (k, b) in inj.buses.iter().enumerate() {
        match *b {
            BusInjection::Slack { v_set, angle_set } => {
                vm[k] = v_set;
                va[k] = angle_set;
            }
            BusInjection::Pv { v_set, .. } => vm[k] = v_set,
            BusInjection::Pq { .. } => {}
        }
    }

    // Unknown ordering: angles of PV and PQ buses, then magnitudes of PQ buses.
    let pvpq: Vec<usize> = (0..n).filter(|&k| grid.buses[k].bus_type != BusType::Slack).collect();
    let pq: Vec<usize> = grid.indices_of(BusType::PQ);
    let dim = pvpq.len() + pq.len();

    let mut v: Vec<Complex64> = vm.iter().zip(&va).map(|(&m, &a)| Complex64::from_polar(m, a)).collect();
    let mut current = vec![Complex64::new(0.0, 0.0); n];
    let mut jac = vec![0.0; dim * dim];
    let mut rhs = vec![0.0; dim];
    let mut iterations = 0;

    loop {
        for (i, c) in current.iter_mut().enumerate() {
            *c = (0..n).map(|j| y.get(i, j) * v[j]).sum();
        }
        // F = S_calc − S_spec over the constrained entries.
        let mut max_mismatch: f64 = 0.0;
        for (r, &i) in pvpq.iter().enumerate() {
            let s = v[i] * current[i].conj();
            rhs[r] = s.re - spec[i].re;
            max_mismatch = max_mismatch.max(rhs[r].abs());
        }
        for (r, &i) in pq.iter().enumerate() {
            let s = v[i] * current[i].conj();
            rhs[pvpq.len() + r] = s.im - spec[i].im;
            max_mismatch = max_mismatch.max(rhs[pvpq.len() + r].abs());
        }
        if !max_mismatch.is_finite() {
            return Err(PowerFlowError::NonConvergence {
                iterations,
                max_mismatch,
            });
        }
        if max_mismatch <= settings.tolerance {
            return Ok(assemble_solution(grid, &y, &v, iterations, max_mismatch));
        }
        if iterations == settings.max_iterations {
            return Err(PowerFlowError::NonConvergence {
                iterations,
                max_mismatch,
            });
        }
        iterations += 1;

        // dS/dθ_j  = j V_i conj(δ_ij I_i − Y_ij V_j)
        // dS/d|V|_j = V_i conj(Y_ij V_j/|V_j|) + δ_ij conj(I_i) V_i/|V_i|
        let dsdva = |i: usize, j: usize| -> Complex64 {
            let mut t = -(y.get(i, j) * v[j]);
            if i == j {
                t += current[i];
            }
            Complex64::i() * v[i] * t.conj()
        };
        let dsdvm = |i: usize, j: usize| -> Complex64 {
            let vn_j = v[j] / vm[j];
            let mut t = v[i] * (y.get(i, j) * vn_j).conj();
            if i == j {
                t += current[i].conj() * vn_j;
            }
            t
        };
        let np = pvpq.len();
        for (r, &i) in pvpq.iter().enumerate() {
            for (c, &j) in pvpq.iter().enumerate() {
                jac[r * dim + c] = dsdva(i, j).re;
            }
            for (c, &j) in pq.iter().enumerate() {
                jac[r * dim + np + c] = dsdvm(i, j).re;
            }
        }
        for (r, &i) in pq.iter().enumerate() {
            for (c, &j) in pvpq.iter().enumerate() {
                jac[(np + r) * dim + c] = dsdva(i, j).im;
            }
            for (c, &j) in pq.iter().enumerate() {
                jac[(np + r) * dim + np + c] = dsdvm(i, j).im;
            }
        }
        if !lu_solve_in_place(&mut jac, dim, &mut rhs) {
            return Err(PowerFlowError::SingularJacobian { iteration: iterations });
        }
        for (c, &j) in pvpq.iter().enumerate() {
            va[j] -= rhs[c];
        }
        for (c, &j) in pq.iter().enumerate() {
            vm[j] -= rhs[np + c];
        }
        for k in 0..n {
            v[k] = Complex64::from_polar(vm[k], va[k]);
        }
        // Negative magnitudes are folded back into the angle.
        for k in 0..n {
            vm[k] = v[k].norm();
            va[k] = v[k].arg();
        }
    }
}

fn assemble_solution(
    grid: &GridCase,
    y: &AdmittanceMatrix,
    v: &[Complex64],
    iterations: usize,
    max_mismatch: f64,
) -> PowerFlowSolution {
    let base = grid.s_base_mva;
    let buses = power_injections(y, v)
        .into_iter()
        .zip(v)
        .map(|(s, v)| BusState {
            v_real: v.re,
            v_imag: v.im,
            v_mag: v.re.hypot(v.im),
            p_mw: s.re * base,
            q_mvar: s.im * base,
        })
        .collect();
    PowerFlowSolution {
        buses,
        iterations,
        max_mismatch,
    }
}

/// Gaussian elimination with partial pivoting; `b` is overwritten with the
/// solution. Returns false when a pivot vanishes.
fn lu_solve_in_place(a: &mut [f64], n: usize, b: &mut [f64]) -> bool {
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = scale * 1e-14;
    for k in 0..n {
        let (p, pivot) =
            (k..n)
                .map(|r| (r, a[r * n + k].abs()))
                .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot.partial_cmp(&tiny) != Some(std::cmp::Ordering::Greater) {
            return false;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            b.swap(k, p);
        }
        let akk = a[k * n + k];
        for r in k + 1..n {
            let f = a[r * n + k] / akk;
            if f == 0.0 {
                continue;
            }
            for c in k..n {
                a[r * n + c] -= f * a[k * n + c];
            }
            b[r] -= f * b[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= a[k * n + c] * b[c];
        }
        b[k] = s / a[k * n + k];
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{BranchSpec, BusSpec};
    use approx::assert_abs_diff_eq;

    fn two_bus(x: f64) -> GridCase {
        GridCase {
            name: None,
            s_base_mva: 100.0,
            buses: vec![
                BusSpec {
                    id: 1,
                    bus_type: BusType::Slack,
                    v_set: Some(1.0),
                    angle_set: Some(0.0),
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
                r: 0.0,
                x,
                b_shunt: 0.0,
            }],
        }
    }

    fn no_charging(mut g: GridCase) -> GridCase {
        for br in &mut g.branches {
            br.b_shunt = 0.0;
        }
        g
    }

    #[test]
    fn lu_solves_small_system() {
        let mut a = vec![0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let mut b = vec![5.0, 3.0, 6.0];
        assert!(lu_solve_in_place(&mut a, 3, &mut b));
        // x = (1, 2, 3)... check by substitution in the original system.
        let a0 = [0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 3.0, 0.0, 1.0];
        let rhs = [5.0, 3.0, 6.0];
        for r in 0..3 {
            let s: f64 = (0..3).map(|c| a0[r * 3 + c] * b[c]).sum();
            assert_abs_diff_eq!(s, rhs[r], epsilon = 1e-12);
        }
        let mut singular = vec![1.0, 2.0, 2.0, 4.0];
        assert!(!lu_solve_in_place(&mut singular, 2, &mut [1.0, 1.0]));
    }

    #[test]
    fn zero_injection_reproduces_slack_phasor() {
        let g = no_charging(GridCase::ieee5_modified());
        let mut inj = InjectionSet::zero_for(&g);
        // PV setpoint equal to the slack so the flat profile is an exact solution.
        inj.buses[1] = BusInjection::Pv {
            p_gen_mw: 0.0,
            v_set: 1.06,
        };
        let sol = solve(&g, &inj, &SolverSettings::default()).unwrap();
        for b in &sol.buses {
            assert_abs_diff_eq!(b.v_real, 1.06, epsilon = 1e-8);
            assert_abs_diff_eq!(b.v_imag, 0.0, epsilon = 1e-8);
        }
        for f in branch_flows(&g, &sol.voltages()) {
            assert_abs_diff_eq!(f.from_end.norm(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn flat_start_zero_injection_has_zero_mismatch() {
        let g = no_charging(GridCase::ieee5_modified());
        let mut inj = InjectionSet::zero_for(&g);
        inj.buses[0] = BusInjection::Slack {
            v_set: 1.0,
            angle_set: 0.0,
        };
        inj.buses[1] = BusInjection::Pv {
            p_gen_mw: 0.0,
            v_set: 1.0,
        };
        let flat = vec![Complex64::new(1.0, 0.0); 5];
        let mis = compute_mismatch(&g, &inj, &flat).unwrap();
        assert_eq!(max_abs_mismatch(&mis), 0.0);
    }

    #[test]
    fn converged_solution_satisfies_setpoints() {
        let g = GridCase::ieee5_modified();
        let inj = InjectionSet {
            buses: vec![
                BusInjection::Slack {
                    v_set: 1.06,
                    angle_set: 0.0,
                },
                BusInjection::Pv {
                    p_gen_mw: 120.0,
                    v_set: 1.0,
                },
                BusInjection::Pq {
                    p_load_mw: 45.0,
                    q_load_mvar: 15.0,
                },
                BusInjection::Pq {
                    p_load_mw: 40.0,
                    q_load_mvar: 5.0,
                },
                BusInjection::Pq {
                    p_load_mw: 60.0,
                    q_load_mvar: 10.0,
                },
            ],
        };
        let settings = SolverSettings::default();
        let sol = solve(&g, &inj, &settings).unwrap();
        assert!(sol.iterations >= 1 && sol.iterations < 10);
        assert!(sol.max_mismatch <= settings.tolerance);
        assert_abs_diff_eq!(sol.buses[0].v_mag, 1.06, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.buses[0].v_imag, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.buses[1].v_mag, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sol.buses[1].p_mw, 120.0, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.buses[4].p_mw, -60.0, epsilon = 1e-5);
        assert_abs_diff_eq!(sol.buses[4].q_mvar, -10.0, epsilon = 1e-5);
        for b in &sol.buses {
            assert_abs_diff_eq!(b.v_mag, b.v_real.hypot(b.v_imag), epsilon = 1e-10);
        }
        let mis = compute_mismatch(&g, &inj, &sol.voltages()).unwrap();
        assert!(max_abs_mismatch(&mis) <= settings.tolerance);
    }

    #[test]
    fn perturbation_mismatch_is_local() {
        let g = GridCase::ieee5_modified();
        let mut inj = InjectionSet::zero_for(&g);
        inj.buses[2] = BusInjection::Pq {
            p_load_mw: 30.0,
            q_load_mvar: 10.0,
        };
        inj.buses[3] = BusInjection::Pq {
            p_load_mw: 50.0,
            q_load_mvar: 20.0,
        };
        let sol = solve(&g, &inj, &SolverSettings::default()).unwrap();
        let mut v = sol.voltages();
        // Bus 5 neighbours buses 2 and 4; buses 1 and 3 must stay balanced.
        v[4] += Complex64::new(0.01, 0.0);
        let mis = compute_mismatch(&g, &inj, &v).unwrap();
        for (k, &(p, q)) in mis.iter().enumerate() {
            let touched = p.abs().max(q.abs()) > 1e-6;
            assert_eq!(touched, [1, 3, 4].contains(&k), "bus {}: {p} {q}", k + 1);
        }
    }

    #[test]
    fn infeasible_load_does_not_converge() {
        let g = two_bus(0.1);
        let inj = InjectionSet {
            buses: vec![
                BusInjection::Slack {
                    v_set: 1.0,
                    angle_set: 0.0,
                },
                BusInjection::Pq {
                    p_load_mw: 10_000.0,
                    q_load_mvar: 0.0,
                },
            ],
        };
        let err = solve(&g, &inj, &SolverSettings::default()).unwrap_err();
        assert!(
            matches!(err, PowerFlowError::NonConvergence { iterations: 50, .. }),
            "{err}"
        );
    }

    #[test]
    fn bad_inputs_rejected() {
        let g = two_bus(0.1);
        let inj = InjectionSet::zero_for(&GridCase::ieee5_modified());
        assert!(matches!(
            solve(&g, &inj, &SolverSettings::default()),
            Err(PowerFlowError::InjectionMismatch(_))
        ));
        let wrong_kind = InjectionSet {
            buses: vec![
                BusInjection::Slack {
                    v_set: 1.0,
                    angle_set: 0.0,
                },
                BusInjection::Pv {
                    p_gen_mw: 1.0,
                    v_set: 1.0,
                },
            ],
        };
        assert!(solve(&g, &wrong_kind, &SolverSettings::default()).is_err());
        let bad = SolverSettings {
            tolerance: 0.0,
            ..Default::default()
        };
        assert!(matches!(
            solve(&g, &InjectionSet::zero_for(&g), &bad),
            Err(PowerFlowError::Settings(_))
        ));
    }

    #[test]
    fn slack_angle_start_reaches_same_point() {
        let g = GridCase::ieee5_modified();
        let mut inj = InjectionSet::zero_for(&g);
        inj.buses[0] = BusInjection::Slack {
            v_set: 1.06,
            angle_set: 0.3,
        };
        inj.buses[3] = BusInjection::Pq {
            p_load_mw: 80.0,
            q_load_mvar: 30.0,
        };
        let a = solve(&g, &inj, &SolverSettings::default()).unwrap();
        let b = solve(
            &g,
            &inj,
            &SolverSettings {
                flat_start: false,
                ..Default::default()
            },
        )
        .unwrap();
        for (x, y) in a.buses.iter().zip(&b.buses) {
            assert_abs_diff_eq!(x.v_real, y.v_real, epsilon = 1e-8);
            assert_abs_diff_eq!(x.v_imag, y.v_imag, epsilon = 1e-8);
        }
    }

    #[test]
    fn injection_json_shape() {
        let inj = InjectionSet::zero_for(&two_bus(0.1));
        let text = serde_json::to_string(&inj).unwrap();
        assert_eq!(
            text,
            r#"{"buses":[{"type":"slack","v_set":1.0,"angle_set":0.0},{"type":"pq","p_load_mw":0.0,"q_load_mvar":0.0}]}"#
        );
        assert_eq!(serde_json::from_str::<InjectionSet>(&text).unwrap(), inj);
    }
}
