//! First-order map from actor power changes to the complex voltage change
//! at one observation phase.
//!
//! For observation phase `p` and actor phase `h`, a change ΔP + jΔQ
//! (consumption positive) drawn through the shared-path impedance
//! R + jX = Z[p][h] at an actor base phasor |V|∠ω moves the observation
//! voltage by
//!
//! ```text
//! ΔVʳ = -(ΔP (R cos ω − X sin ω) + ΔQ (R sin ω + X cos ω)) / |V|
//! ΔVⁱ = -(ΔP (R sin ω + X cos ω) + ΔQ (X sin ω − R cos ω)) / |V|
//! ```
//!
//! Collecting the ΔP / ΔQ terms over the three actor phases gives two
//! constant 6-vectors ordered `[P_a, Q_a, P_b, Q_b, P_c, Q_c]`.

use nalgebra::SVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BusId, NetworkModel};
use crate::phase::Phase;

pub type Vec6 = SVector<f64, 6>;

/// Offset of the ΔP entry of `phase` inside a 6-vector; ΔQ follows it.
pub fn pq_offset(phase: Phase) -> usize {
    2 * phase.index()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityVector {
    pub observation: (BusId, Phase),
    pub actor: BusId,
    /// Volts per watt / volts per var, real part of ΔV.
    pub c_real: Vec6,
    /// Volts per watt / volts per var, imaginary part of ΔV.
    pub c_imag: Vec6,
}

impl SensitivityVector {
    /// ΔV for a power-change vector of this actor.
    pub fn apply(&self, delta: &PowerChange) -> Complex64 {
        Complex64::new(self.c_real.dot(&delta.0), self.c_imag.dot(&delta.0))
    }
}

/// `[ΔP_a, ΔQ_a, ΔP_b, ΔQ_b, ΔP_c, ΔQ_c]` in watts and vars.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PowerChange(pub Vec6);

impl PowerChange {
    pub fn zero() -> Self {
        PowerChange(Vec6::zeros())
    }

    pub fn on_phase(phase: Phase, dp: f64, dq: f64) -> Self {
        let mut v = Vec6::zeros();
        v[pq_offset(phase)] = dp;
        v[pq_offset(phase) + 1] = dq;
        PowerChange(v)
    }

    pub fn get(&self, phase: Phase) -> Complex64 {
        Complex64::new(self.0[pq_offset(phase)], self.0[pq_offset(phase) + 1])
    }
}

pub fn sensitivity_coefficients(
    net: &NetworkModel,
    o: BusId,
    phase: Phase,
    a: BusId,
) -> Result<SensitivityVector> {
    let obs = net.bus(o)?;
    if !obs.phases.contains(phase) {
        return Err(Error::PhaseMismatch {
            bus: o,
            phase,
            context: "observation phase".into(),
        });
    }
    let actor = net.bus(a)?;
    let z = net.shared_path_impedance(o, a)?;
    let mut c_real = Vec6::zeros();
    let mut c_imag = Vec6::zeros();
    for h in actor.phases.iter() {
        let zph = z[(phase.index(), h.index())];
        let (r, x) = (zph.re, zph.im);
        let v = actor.base_voltage(h).expect("phase present");
        let (mag, omega) = (v.norm(), v.arg());
        let (sin, cos) = omega.sin_cos();
        let k = pq_offset(h);
        c_real[k] = -(r * cos - x * sin) / mag;
        c_real[k + 1] = -(r * sin + x * cos) / mag;
        c_imag[k] = -(r * sin + x * cos) / mag;
        c_imag[k + 1] = -(x * sin - r * cos) / mag;
    }
    Ok(SensitivityVector {
        observation: (o, phase),
        actor: a,
        c_real,
        c_imag,
    })
}

/// Linearized complex voltage change at `o`/`phase` for simultaneous actor changes.
pub fn voltage_change(
    net: &NetworkModel,
    o: BusId,
    phase: Phase,
    deltas: &[(BusId, PowerChange)],
) -> Result<Complex64> {
    let mut re = 0.0;
    let mut im = 0.0;
    for (a, delta) in deltas {
        let actor = net.bus(*a)?;
        for p in Phase::ALL {
            if !actor.phases.contains(p) && delta.get(p) != Complex64::new(0.0, 0.0) {
                return Err(Error::PhaseMismatch {
                    bus: *a,
                    phase: p,
                    context: "power change".into(),
                });
            }
        }
        let c = sensitivity_coefficients(net, o, phase, *a)?;
        re += c.c_real.dot(&delta.0);
        im += c.c_imag.dot(&delta.0);
    }
    Ok(Complex64::new(re, im))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::*;
    use crate::network::{Bus, LineSegment, Polar};
    use crate::phase::PhaseSet;

    fn single_phase_net(r: f64, x: f64, base: Option<Polar>) -> NetworkModel {
        let mut load = Bus::new(2, PhaseSet::single(Phase::A), 4.8);
        load.base[0] = base;
        NetworkModel::new(
            vec![Bus::new(1, PhaseSet::single(Phase::A), 4.8).source(), load],
            vec![LineSegment::new(1, 2, single_phase(r, x))],
        )
        .unwrap()
    }

    #[test]
    fn zero_angle_reads_off_impedance() {
        let net = single_phase_net(0.4, 0.3, None);
        let c = sensitivity_coefficients(&net, BusId(2), Phase::A, BusId(2)).unwrap();
        let v = 4800.0 / 3f64.sqrt();
        assert!((c.c_real[0] + 0.4 / v).abs() < 1e-15);
        assert!((c.c_real[1] + 0.3 / v).abs() < 1e-15);
        assert!((c.c_imag[0] + 0.3 / v).abs() < 1e-15);
        assert!((c.c_imag[1] - 0.4 / v).abs() < 1e-15);
        assert_eq!(c.c_real.rows(2, 4).iter().filter(|v| **v != 0.0).count(), 0);
    }

    #[test]
    fn minus_120_degrees_matches_hand_evaluation() {
        // ω = −120°: cos = −1/2, sin = −√3/2, |V| = 1000, R = 2, X = 1
        let net = single_phase_net(2.0, 1.0, Some(Polar::new(1000.0, -120.0)));
        let c = sensitivity_coefficients(&net, BusId(2), Phase::A, BusId(2)).unwrap();
        let s3 = 3f64.sqrt();
        let expect_rp = -(2.0 * -0.5 - 1.0 * (-s3 / 2.0)) / 1000.0;
        let expect_rq = -(2.0 * (-s3 / 2.0) + 1.0 * -0.5) / 1000.0;
        let expect_iq = -(1.0 * (-s3 / 2.0) - 2.0 * -0.5) / 1000.0;
        assert!((c.c_real[0] - expect_rp).abs() < 1e-15);
        assert!((c.c_real[1] - expect_rq).abs() < 1e-15);
        assert!((c.c_imag[0] - expect_rq).abs() < 1e-15);
        assert!((c.c_imag[1] - expect_iq).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_complex_form() {
        // ΔV = -Σ_h Z[p][h] ΔS_h* / V_h*
        let net = y_net();
        let delta = PowerChange(Vec6::from_column_slice(&[1.0, -2.0, 0.5, 0.7, -1.5, 3.0]));
        for phase in Phase::ALL {
            let got = voltage_change(&net, BusId(3), phase, &[(BusId(4), delta)]).unwrap();
            let z = net.shared_path_impedance(BusId(3), BusId(4)).unwrap();
            let actor = net.bus(BusId(4)).unwrap();
            let mut want = Complex64::new(0.0, 0.0);
            for h in Phase::ALL {
                let v = actor.base_voltage(h).unwrap();
                want -= z[(phase.index(), h.index())] * delta.get(h).conj() / v.conj();
            }
            assert!((got - want).norm() < 1e-15 * want.norm().max(1.0));
        }
    }

    #[test]
    fn source_actor_has_no_influence() {
        let net = y_net();
        let c = sensitivity_coefficients(&net, BusId(3), Phase::B, BusId(1)).unwrap();
        assert_eq!(c.c_real, Vec6::zeros());
        assert_eq!(c.c_imag, Vec6::zeros());
    }

    #[test]
    fn errors() {
        let net = single_phase_net(0.1, 0.1, None);
        assert!(matches!(
            sensitivity_coefficients(&net, BusId(2), Phase::B, BusId(2)),
            Err(Error::PhaseMismatch { .. })
        ));
        assert!(matches!(
            sensitivity_coefficients(&net, BusId(5), Phase::A, BusId(2)),
            Err(Error::UnknownBus(_))
        ));
        let bad = PowerChange::on_phase(Phase::C, 1.0, 0.0);
        assert!(voltage_change(&net, BusId(2), Phase::A, &[(BusId(2), bad)]).is_err());
    }

    #[test]
    fn zero_deltas_give_zero() {
        let net = y_net();
        let dv = voltage_change(&net, BusId(4), Phase::C, &[(BusId(3), PowerChange::zero())]).unwrap();
        assert_eq!(dv, Complex64::new(0.0, 0.0));
    }
}
