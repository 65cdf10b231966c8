//! Backward/forward sweep load flow for radial unbalanced feeders with
//! constant-power wye-equivalent loads.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::network::{BusId, NetworkModel};
use crate::phase::Phase;

/// Per-bus, per-phase complex quantity, indexed like `NetworkModel::buses`.
pub type PhaseValues = Vec<[Complex64; 3]>;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// 1 p.u. of power for mismatch reporting, in VA.
pub const BASE_POWER_VA: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadFlowOptions {
    /// Largest accepted per-phase power mismatch, VA.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LoadFlowOptions {
    fn default() -> Self {
        LoadFlowOptions {
            tolerance: 1e-6 * BASE_POWER_VA,
            max_iterations: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadFlowSolution {
    /// Volts, line-to-neutral; zero on absent phases.
    pub voltages: PhaseValues,
    pub iterations: usize,
    /// VA.
    pub max_mismatch: f64,
}

impl LoadFlowSolution {
    pub fn voltage(&self, net: &NetworkModel, bus: BusId, phase: Phase) -> Result<Complex64> {
        let b = net.bus(bus)?;
        if !b.phases.contains(phase) {
            return Err(Error::PhaseMismatch {
                bus,
                phase,
                context: "voltage lookup".into(),
            });
        }
        Ok(self.voltages[net.bus_index(bus)?][phase.index()])
    }
}

/// Base loads of the network file in VA.
pub fn base_injections(net: &NetworkModel) -> PhaseValues {
    net.buses()
        .iter()
        .map(|b| std::array::from_fn(|i| b.load_va(Phase::from_index(i).unwrap())))
        .collect()
}

fn source_voltages(net: &NetworkModel) -> [Complex64; 3] {
    let src = net.bus(net.source()).expect("source exists");
    std::array::from_fn(|i| src.base_voltage(Phase::from_index(i).unwrap()).unwrap_or(ZERO))
}

fn check_injections(net: &NetworkModel, injections: &[[Complex64; 3]]) -> Result<()> {
    if injections.len() != net.len() {
        return Err(Error::OutOfRange(format!(
            "{} injection rows for {} buses",
            injections.len(),
            net.len()
        )));
    }
    for (bus, s) in net.buses().iter().zip(injections) {
        for p in Phase::ALL {
            let v = s[p.index()];
            if !bus.phases.contains(p) && v != ZERO {
                return Err(Error::PhaseMismatch {
                    bus: bus.id,
                    phase: p,
                    context: "injection".into(),
                });
            }
            if !(v.re.is_finite() && v.im.is_finite()) {
                return Err(Error::NonFinite(format!("injection at bus {}", bus.id)));
            }
        }
    }
    Ok(())
}

/// Solves from a flat start at the source phasors.
pub fn solve_load_flow(
    net: &NetworkModel,
    injections: &[[Complex64; 3]],
) -> Result<LoadFlowSolution> {
    solve_load_flow_with(net, injections, LoadFlowOptions::default(), None)
}

/// Solves with explicit options, optionally warm-started from `initial` voltages.
pub fn solve_load_flow_with(
    net: &NetworkModel,
    injections: &[[Complex64; 3]],
    opts: LoadFlowOptions,
    initial: Option<&[[Complex64; 3]]>,
) -> Result<LoadFlowSolution> {
    check_injections(net, injections)?;
    let n = net.len();
    let buses = net.buses();
    let src = net.bus_index(net.source())?;
    let vs = source_voltages(net);
    let mut v: PhaseValues = match initial {
        Some(init) if init.len() == n => init.to_vec(),
        _ => buses
            .iter()
            .map(|b| std::array::from_fn(|i| if b.phases.contains(Phase::ALL[i]) { vs[i] } else { ZERO }))
            .collect(),
    };
    v[src] = vs;

    let order = net.topological_order();
    let mut load_i: PhaseValues = vec![[ZERO; 3]; n];
    let mut branch_i: PhaseValues = vec![[ZERO; 3]; n];
    let mut mismatch = f64::INFINITY;

    for iter in 1..=opts.max_iterations {
        for k in 0..n {
            for p in buses[k].phases.iter() {
                let i = p.index();
                load_i[k][i] = if injections[k][i] == ZERO {
                    ZERO
                } else {
                    (injections[k][i] / v[k][i]).conj()
                };
            }
        }
        for &k in order.iter().rev() {
            let mut acc = load_i[k];
            for &c in net.children(k) {
                for i in 0..3 {
                    acc[i] += branch_i[c][i];
                }
            }
            branch_i[k] = acc;
        }
        mismatch = 0.0;
        for &k in order {
            let Some((parent, line)) = net.upstream(k) else {
                continue;
            };
            let z = &net.lines()[line].z;
            for p in buses[k].phases.iter() {
                let i = p.index();
                let mut drop = ZERO;
                for j in 0..3 {
                    drop += z[(i, j)] * branch_i[k][j];
                }
                let new = v[parent][i] - drop;
                let s = injections[k][i];
                if s != ZERO {
                    // power drawn at the new voltage by the current sized at the old one
                    mismatch = f64::max(mismatch, (s - new * load_i[k][i].conj()).norm());
                }
                v[k][i] = new;
            }
        }
        if !mismatch.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iter,
                mismatch,
            });
        }
        if mismatch <= opts.tolerance {
            return Ok(LoadFlowSolution {
                voltages: v,
                iterations: iter,
                max_mismatch: mismatch,
            });
        }
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        mismatch,
    })
}

/// Largest per-bus, per-phase |S_network − S_load| in VA, with segment
/// currents recovered from the solved voltage drops.
pub fn power_balance_residual(
    net: &NetworkModel,
    solution: &LoadFlowSolution,
    injections: &[[Complex64; 3]],
) -> Result<f64> {
    let buses = net.buses();
    let v = &solution.voltages;
    let mut into: PhaseValues = vec![[ZERO; 3]; net.len()];
    for k in 0..net.len() {
        let Some((parent, line)) = net.upstream(k) else {
            continue;
        };
        let phases: Vec<usize> = buses[k].phases.iter().map(Phase::index).collect();
        let m = phases.len();
        let z = &net.lines()[line].z;
        let zsub = DMatrix::from_fn(m, m, |r, c| z[(phases[r], phases[c])]);
        let Some(y) = zsub.try_inverse() else {
            return Err(Error::SingularCovariance(format!(
                "segment impedance into bus {}",
                buses[k].id
            )));
        };
        for (r, &pr) in phases.iter().enumerate() {
            let mut cur = ZERO;
            for (c, &pc) in phases.iter().enumerate() {
                cur += y[(r, c)] * (v[parent][pc] - v[k][pc]);
            }
            into[k][pr] = cur;
        }
    }
    let mut worst: f64 = 0.0;
    for k in 0..net.len() {
        if buses[k].is_source {
            continue;
        }
        for p in buses[k].phases.iter() {
            let i = p.index();
            let mut net_i = into[k][i];
            for &c in net.children(k) {
                net_i -= into[c][i];
            }
            worst = worst.max((v[k][i] * net_i.conj() - injections[k][i]).norm());
        }
    }
    Ok(worst)
}
