#![allow(dead_code)]

use loadflow_core::grid::{BranchSpec, BusSpec, BusType, GridCase};
use loadflow_core::powerflow::{BusInjection, InjectionSet};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bus admittance matrix assembled directly from the branch list (π-model).
pub fn ybus(grid: &GridCase) -> Vec<Vec<Complex64>> {
    let n = grid.n_buses();
    let mut y = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for br in &grid.branches {
        let (f, t) = (br.from_bus - 1, br.to_bus - 1);
        let ys = 1.0 / Complex64::new(br.r, br.x);
        let half = Complex64::new(0.0, br.b_shunt / 2.0);
        y[f][f] += ys + half;
        y[t][t] += ys + half;
        y[f][t] -= ys;
        y[t][f] -= ys;
    }
    y
}

/// Gauss–Seidel load flow. Returns the bus voltages once no component
/// moves by more than 1e-13 between sweeps, or `None` if that never happens.
pub fn gauss_seidel(grid: &GridCase, inj: &InjectionSet) -> Option<Vec<Complex64>> {
    let y = ybus(grid);
    let n = grid.n_buses();
    let base = grid.s_base_mva;
    let mut v: Vec<Complex64> = inj
        .buses
        .iter()
        .map(|b| match *b {
            BusInjection::Slack { v_set, angle_set } => Complex64::from_polar(v_set, angle_set),
            BusInjection::Pv { v_set, .. } => Complex64::new(v_set, 0.0),
            BusInjection::Pq { .. } => Complex64::new(1.0, 0.0),
        })
        .collect();
    for _ in 0..200_000 {
        let mut change: f64 = 0.0;
        for i in 0..n {
            let sum_others: Complex64 = (0..n).filter(|&j| j != i).map(|j| y[i][j] * v[j]).sum();
            let s = match inj.buses[i] {
                BusInjection::Slack { .. } => continue,
                BusInjection::Pq { p_load_mw, q_load_mvar } => Complex64::new(-p_load_mw, -q_load_mvar) / base,
                BusInjection::Pv { p_gen_mw, .. } => {
                    let q = -(v[i].conj() * (sum_others + y[i][i] * v[i])).im;
                    Complex64::new(p_gen_mw / base, q)
                }
            };
            let mut next = (s.conj() / v[i].conj() - sum_others) / y[i][i];
            if let BusInjection::Pv { v_set, .. } = inj.buses[i] {
                next *= v_set / next.norm();
            }
            change = change.max((next - v[i]).norm());
            v[i] = next;
        }
        if !change.is_finite() {
            return None;
        }
        if change < 1e-13 {
            return Some(v);
        }
    }
    None
}

/// A connected grid of `n` buses: bus 1 is the slack, the rest are PV or PQ at random.
pub fn random_grid(rng: &mut ChaCha8Rng, n: usize) -> GridCase {
    let mut buses = vec![BusSpec {
        id: 1,
        bus_type: BusType::Slack,
        v_set: Some(rng.random_range(1.0..1.06)),
        angle_set: Some(0.0),
    }];
    for id in 2..=n {
        let pv = rng.random_bool(0.4);
        buses.push(BusSpec {
            id,
            bus_type: if pv { BusType::PV } else { BusType::PQ },
            v_set: pv.then(|| rng.random_range(0.98..1.05)),
            angle_set: None,
        });
    }
    let line = |rng: &mut ChaCha8Rng, from_bus, to_bus| BranchSpec {
        from_bus,
        to_bus,
        r: rng.random_range(0.01..0.08),
        x: rng.random_range(0.04..0.25),
        b_shunt: rng.random_range(0.0..0.06),
    };
    let mut branches = Vec::new();
    for to in 2..=n {
        let from = rng.random_range(1..to);
        branches.push(line(rng, from, to));
    }
    for a in 1..=n {
        for b in a + 1..=n {
            if !branches.iter().any(|br| (br.from_bus, br.to_bus) == (a, b)) && rng.random_bool(0.3) {
                branches.push(line(rng, a, b));
            }
        }
    }
    let grid = GridCase {
        name: None,
        s_base_mva: 100.0,
        buses,
        branches,
    };
    grid.validate().expect("random grid is valid");
    grid
}

/// Moderate loads and generation so both solvers converge from a flat start.
pub fn random_injections(rng: &mut ChaCha8Rng, grid: &GridCase) -> InjectionSet {
    let buses = grid
        .buses
        .iter()
        .map(|b| match b.bus_type {
            BusType::Slack => BusInjection::Slack {
                v_set: b.voltage_setpoint(),
                angle_set: b.angle_setpoint(),
            },
            BusType::PV => BusInjection::Pv {
                p_gen_mw: rng.random_range(0.0..40.0),
                v_set: b.voltage_setpoint(),
            },
            BusType::PQ => BusInjection::Pq {
                p_load_mw: rng.random_range(0.0..40.0),
                q_load_mvar: rng.random_range(-10.0..20.0),
            },
        })
        .collect();
    InjectionSet { buses }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
