//! Gaussian propagation of actor power changes into (ΔVʳ, ΔVⁱ) at an
//! observation phase.
//!
//! Both the single-actor and the aggregate distributions are congruence
//! transforms of a Gaussian power-change vector through constant
//! sensitivity vectors, so they are exactly bivariate normal.

mod scenario;

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BusId, NetworkModel};
use crate::phase::Phase;
use crate::sensitivity::{sensitivity_coefficients, SensitivityVector};

pub use scenario::{parse_scenario, ActorSpec, Mat6, PhaseBlock, ScenarioSpec};

/// Relative tolerance on the most negative eigenvalue of an assembled covariance.
pub const PSD_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BivariateGaussian {
    /// [μʳ, μⁱ] in volts.
    pub mean: Vector2<f64>,
    /// [[σʳ², k], [k, σⁱ²]] in volt².
    pub cov: Matrix2<f64>,
}

impl BivariateGaussian {
    pub fn new(mean: [f64; 2], cov: [[f64; 2]; 2]) -> Self {
        BivariateGaussian {
            mean: Vector2::new(mean[0], mean[1]),
            cov: Matrix2::new(cov[0][0], cov[0][1], cov[1][0], cov[1][1]),
        }
    }

    pub fn det(&self) -> f64 {
        self.cov.determinant()
    }

    /// Ratio of the largest to the smallest covariance eigenvalue.
    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = eigen2(&self.cov);
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    /// True when the covariance is zero or its condition number exceeds `cap`.
    pub fn is_degenerate(&self, cap: f64) -> bool {
        let k = self.condition_number();
        k.is_nan() || k > cap
    }

    pub fn scaled_cov(&self, s: f64) -> Self {
        BivariateGaussian {
            mean: self.mean,
            cov: self.cov * s,
        }
    }
}

/// Eigenvalues (ascending) of a symmetric 2×2 matrix.
pub(crate) fn eigen2(m: &Matrix2<f64>) -> (f64, f64) {
    let half_tr = 0.5 * (m[(0, 0)] + m[(1, 1)]);
    let d = 0.5 * (m[(0, 0)] - m[(1, 1)]);
    let r = (d * d + m[(0, 1)] * m[(1, 0)]).max(0.0).sqrt();
    (half_tr - r, half_tr + r)
}

/// Stacked mean vector and covariance of all actors' power changes (SI).
#[derive(Debug, Clone, PartialEq)]
pub struct AssembledScenario {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl AssembledScenario {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

/// Builds the 6L mean vector and 6L×6L covariance in scenario actor order.
///
/// Actor blocks sit on the diagonal. Between distinct actors, only the
/// same-phase ΔP–ΔP and ΔQ–ΔQ pairs are correlated (ρ·σᵢ·σⱼ); cross-phase
/// and ΔP–ΔQ cross-actor terms are zero.
pub fn assemble_covariance(scenario: &ScenarioSpec) -> Result<AssembledScenario> {
    let n = 6 * scenario.actors.len();
    let mut mean = DVector::zeros(n);
    let mut cov = DMatrix::zeros(n, n);
    for (i, actor) in scenario.actors.iter().enumerate() {
        mean.rows_mut(6 * i, 6).copy_from(&actor.mean6());
        cov.view_mut((6 * i, 6 * i), (6, 6)).copy_from(&actor.cov6());
    }
    let rho = scenario.correlation;
    if rho != 0.0 {
        for (i, ai) in scenario.actors.iter().enumerate() {
            for (j, aj) in scenario.actors.iter().enumerate() {
                if i == j {
                    continue;
                }
                for bi in &ai.blocks {
                    let Some(bj) = aj.block(bi.phase) else {
                        continue;
                    };
                    let k = crate::sensitivity::pq_offset(bi.phase);
                    for t in 0..2 {
                        cov[(6 * i + k + t, 6 * j + k + t)] =
                            rho * (bi.cov[(t, t)] * bj.cov[(t, t)]).sqrt();
                    }
                }
            }
        }
    }
    check_psd(&cov)?;
    Ok(AssembledScenario { mean, cov })
}

fn check_psd(cov: &DMatrix<f64>) -> Result<()> {
    if cov.is_empty() {
        return Ok(());
    }
    let eig = cov.clone().symmetric_eigenvalues();
    let max = eig.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = eig.iter().copied().fold(f64::INFINITY, f64::min);
    if min < -PSD_TOLERANCE * max {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// Mean and covariance of (c_rᵀx, c_iᵀx) for x ~ (mean, cov).
fn project(
    c_r: &DVector<f64>,
    c_i: &DVector<f64>,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
) -> BivariateGaussian {
    let s_r = cov * c_r;
    let s_i = cov * c_i;
    let rr = c_r.dot(&s_r);
    let ri = c_r.dot(&s_i);
    let ir = c_i.dot(&s_r);
    let ii = c_i.dot(&s_i);
    let k = 0.5 * (ri + ir);
    BivariateGaussian {
        mean: Vector2::new(c_r.dot(mean), c_i.dot(mean)),
        cov: Matrix2::new(rr, k, k, ii),
    }
}

/// Distribution of ΔV at `o`/`phase` when `actor` alone varies.
pub fn single_actor_distribution(
    net: &NetworkModel,
    o: BusId,
    phase: Phase,
    actor: &ActorSpec,
) -> Result<BivariateGaussian> {
    let c = sensitivity_coefficients(net, o, phase, actor.bus)?;
    Ok(single_from_coefficients(&c, actor))
}

pub fn single_from_coefficients(c: &SensitivityVector, actor: &ActorSpec) -> BivariateGaussian {
    let cov = actor.cov6();
    let mean = actor.mean6();
    let s_r = cov * c.c_real;
    let s_i = cov * c.c_imag;
    let k = 0.5 * (c.c_real.dot(&s_i) + c.c_imag.dot(&s_r));
    BivariateGaussian {
        mean: Vector2::new(c.c_real.dot(&mean), c.c_imag.dot(&mean)),
        cov: Matrix2::new(c.c_real.dot(&s_r), k, k, c.c_imag.dot(&s_i)),
    }
}

/// Distribution of ΔV at `o`/`phase` under the joint variation of all actors.
pub fn aggregate_distribution(
    net: &NetworkModel,
    o: BusId,
    phase: Phase,
    scenario: &ScenarioSpec,
) -> Result<BivariateGaussian> {
    let assembled = assemble_covariance(scenario)?;
    let coeffs = scenario
        .actors
        .iter()
        .map(|a| sensitivity_coefficients(net, o, phase, a.bus))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate_from_coefficients(&assembled, &coeffs))
}

/// Aggregate distribution from precomputed pieces; `coeffs` follow scenario actor order.
pub fn aggregate_from_coefficients(
    assembled: &AssembledScenario,
    coeffs: &[SensitivityVector],
) -> BivariateGaussian {
    let n = assembled.dim();
    assert_eq!(n, 6 * coeffs.len(), "one sensitivity vector per actor");
    let mut c_r = DVector::zeros(n);
    let mut c_i = DVector::zeros(n);
    for (i, c) in coeffs.iter().enumerate() {
        c_r.rows_mut(6 * i, 6).copy_from(&c.c_real);
        c_i.rows_mut(6 * i, 6).copy_from(&c.c_imag);
    }
    project(&c_r, &c_i, &assembled.mean, &assembled.cov)
}
