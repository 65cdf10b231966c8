use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::distributions::{assemble_covariance, AssembledScenario, ScenarioSpec};
use crate::error::{Error, Result};
use crate::network::BusId;
use crate::sensitivity::{PowerChange, Vec6};

/// Draws ΔS = μ + L z with L Lᵀ = Σ for the stacked actor vector.
///
/// Coordinates with zero variance are dropped before factoring, so
/// semi-definite scenarios (absent phases, zeroed actors) factor cleanly.
/// The factor stays in the full coordinate space: feeding the same `z` to
/// samplers built from related scenarios gives common random numbers.
#[derive(Debug, Clone)]
pub struct PowerSampler {
    mean: DVector<f64>,
    factor: DMatrix<f64>,
    buses: Vec<BusId>,
}

impl PowerSampler {
    pub fn new(scenario: &ScenarioSpec) -> Result<Self> {
        let assembled = assemble_covariance(scenario)?;
        Self::from_assembled(&assembled, scenario.bus_ids())
    }

    pub fn from_assembled(assembled: &AssembledScenario, buses: Vec<BusId>) -> Result<Self> {
        let n = assembled.dim();
        let active: Vec<usize> = (0..n).filter(|&i| assembled.cov[(i, i)] > 0.0).collect();
        let m = active.len();
        let sub = DMatrix::from_fn(m, m, |r, c| assembled.cov[(active[r], active[c])]);
        let sub_factor = match sub.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                let eig = sub.symmetric_eigen();
                let max = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if let Some(min) = eig
                    .eigenvalues
                    .iter()
                    .copied()
                    .find(|v| *v < -crate::distributions::PSD_TOLERANCE * max)
                {
                    return Err(Error::NotPsd {
                        min_eigenvalue: min,
                    });
                }
                let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
                &eig.eigenvectors * DMatrix::from_diagonal(&roots)
            }
        };
        let mut factor = DMatrix::zeros(n, n);
        for (r, &i) in active.iter().enumerate() {
            for (c, &j) in active.iter().enumerate() {
                factor[(i, j)] = sub_factor[(r, c)];
            }
        }
        Ok(PowerSampler {
            mean: assembled.mean.clone(),
            factor,
            buses,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn standard_normal<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_fn(self.dim(), |_, _| rng.sample(StandardNormal))
    }

    /// Stacked ΔS for a given standard-normal vector.
    pub fn transform(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.mean + &self.factor * z
    }

    /// Splits a stacked vector into per-actor power changes.
    pub fn split(&self, stacked: &DVector<f64>) -> Vec<(BusId, PowerChange)> {
        self.buses
            .iter()
            .enumerate()
            .map(|(i, b)| {
                (
                    *b,
                    PowerChange(Vec6::from_iterator(stacked.rows(6 * i, 6).iter().copied())),
                )
            })
            .collect()
    }
}

/// One draw of every actor's power change.
pub fn sample_power_changes<R: Rng + ?Sized>(
    scenario: &ScenarioSpec,
    rng: &mut R,
) -> Result<Vec<(BusId, PowerChange)>> {
    let sampler = PowerSampler::new(scenario)?;
    let z = sampler.standard_normal(rng);
    Ok(sampler.split(&sampler.transform(&z)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::{ActorSpec, PhaseBlock};
    use crate::phase::Phase;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scenario(rho: f64) -> ScenarioSpec {
        let b = |p, s: f64, m: f64| PhaseBlock::new(p, [m, -m], [[s, -0.03 * s], [-0.03 * s, 0.2 * s]]);
        ScenarioSpec::new(
            vec![
                ActorSpec::single(2, b(Phase::A, 4.0, 1.0)),
                ActorSpec::new(3, vec![b(Phase::A, 2.0, 0.0), b(Phase::C, 1.0, 0.5)]),
                ActorSpec::single(4, b(Phase::B, 3.0, 0.0)),
            ],
            rho,
        )
        .unwrap()
    }

    #[test]
    fn zero_covariance_returns_mean() {
        let s = scenario(0.0).scaled(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let draw = sample_power_changes(&s, &mut rng).unwrap();
        assert_eq!(draw[0].1.get(Phase::A).re, 1.0);
        assert_eq!(draw[0].1.get(Phase::A).im, -1.0);
        assert_eq!(draw[2].1, PowerChange::zero());
    }

    #[test]
    fn factor_reproduces_covariance() {
        for rho in [0.0, 0.3] {
            let s = scenario(rho);
            let a = assemble_covariance(&s).unwrap();
            let p = PowerSampler::from_assembled(&a, s.bus_ids()).unwrap();
            let back = &p.factor * p.factor.transpose();
            assert!((back - &a.cov).norm() < 1e-12 * a.cov.norm());
        }
    }

    #[test]
    fn sample_moments_converge() {
        let s = scenario(0.3);
        let a = assemble_covariance(&s).unwrap();
        let p = PowerSampler::from_assembled(&a, s.bus_ids()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 100_000;
        let dim = p.dim();
        let mut sum = DVector::zeros(dim);
        let mut sq = DMatrix::zeros(dim, dim);
        for _ in 0..n {
            let x = p.transform(&p.standard_normal(&mut rng));
            sum += &x;
            sq += &x * x.transpose();
        }
        let mean = &sum / n as f64;
        let cov = (&sq - &mean * mean.transpose() * n as f64) / (n as f64 - 1.0);
        for i in 0..dim {
            let sd = a.cov[(i, i)].sqrt();
            assert!((mean[i] - a.mean[i]).abs() <= 4.0 * sd / (n as f64).sqrt() + 1e-12);
        }
        let rel = (&cov - &a.cov).norm() / a.cov.norm();
        assert!(rel < 0.05, "relative Frobenius error {rel}");
    }
}
