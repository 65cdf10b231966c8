//! Load-flow Monte-Carlo baseline.
//!
//! Every sample draws one standard-normal vector and pushes it through the
//! sampler of each simulated variant (all actors, or all actors with one
//! actor's covariance zeroed), so the leave-one-out runs share common random
//! numbers. Samples are processed in fixed-size chunks, each with its own
//! ChaCha stream, and chunk statistics are merged in chunk order: results
//! are bit-identical for any worker count.

use std::io::Write;

use nalgebra::Matrix2;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loadflow::{
    base_injections, solve_load_flow_with, LoadFlowOptions, LoadFlowSolution, PhaseValues,
};
use super::sampling::PowerSampler;
use crate::distributions::ScenarioSpec;
use crate::error::{Error, Result};
use crate::metrics::{MetricTag, RankingResult};
use crate::network::{BusId, NetworkModel};
use crate::phase::Phase;

/// Samples per RNG stream.
pub const CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCConfig {
    pub samples: usize,
    pub seed: u64,
    /// Load-flow power mismatch tolerance, VA.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for MCConfig {
    fn default() -> Self {
        MCConfig {
            samples: 10_000,
            seed: 0,
            tolerance: 1e-3,
            max_iterations: 100,
        }
    }
}

impl MCConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::OutOfRange("samples must be at least 1".into()));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(Error::OutOfRange("tolerance must be positive".into()));
        }
        Ok(())
    }

    fn load_flow(&self) -> LoadFlowOptions {
        LoadFlowOptions {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
        }
    }
}

/// Running first and second moments of (|V| − |V₀|, ΔVʳ, ΔVⁱ).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Moments {
    n: f64,
    mean: [f64; 3],
    co: [[f64; 3]; 3],
}

impl Moments {
    pub fn push(&mut self, x: [f64; 3]) {
        self.n += 1.0;
        let delta: [f64; 3] = std::array::from_fn(|i| x[i] - self.mean[i]);
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d / self.n;
        }
        let after: [f64; 3] = std::array::from_fn(|j| x[j] - self.mean[j]);
        for (row, d) in self.co.iter_mut().zip(&delta) {
            for (c, a) in row.iter_mut().zip(&after) {
                *c += d * a;
            }
        }
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0.0 {
            return;
        }
        if self.n == 0.0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let delta: [f64; 3] = std::array::from_fn(|i| other.mean[i] - self.mean[i]);
        for (i, row) in self.co.iter_mut().enumerate() {
            for (j, c) in row.iter_mut().enumerate() {
                *c += other.co[i][j] + delta[i] * delta[j] * self.n * other.n / n;
            }
        }
        for (m, d) in self.mean.iter_mut().zip(&delta) {
            *m += d * other.n / n;
        }
        self.n = n;
    }

    pub fn count(&self) -> usize {
        self.n as usize
    }

    fn cov(&self, i: usize, j: usize) -> f64 {
        if self.n < 2.0 {
            0.0
        } else {
            self.co[i][j] / (self.n - 1.0)
        }
    }

    pub fn magnitude_variance(&self) -> f64 {
        self.cov(0, 0)
    }

    pub fn complex_mean(&self) -> Complex64 {
        Complex64::new(self.mean[1], self.mean[2])
    }

    pub fn complex_cov(&self) -> Matrix2<f64> {
        let k = self.cov(1, 2);
        Matrix2::new(self.cov(1, 1), k, k, self.cov(2, 2))
    }
}

/// Empirical voltage-change statistics at one observation phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VoltageStats {
    pub observation: (BusId, Phase),
    pub samples: usize,
    /// Variance of |V| − |V₀|, V².
    pub magnitude_variance: f64,
    /// Mean of (ΔVʳ, ΔVⁱ), V.
    pub mean: [f64; 2],
    /// Covariance of (ΔVʳ, ΔVⁱ), V².
    pub cov: Matrix2<f64>,
}

impl VoltageStats {
    fn from_moments(observation: (BusId, Phase), m: &Moments) -> Self {
        let mean = m.complex_mean();
        VoltageStats {
            observation,
            samples: m.count(),
            magnitude_variance: m.magnitude_variance(),
            mean: [mean.re, mean.im],
            cov: m.complex_cov(),
        }
    }
}

/// Which actors vary in one simulated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    All,
    /// Scenario actor index whose covariance is zeroed.
    Without(usize),
}

struct Simulator<'a> {
    net: &'a NetworkModel,
    cfg: MCConfig,
    base_inj: PhaseValues,
    base: LoadFlowSolution,
    actor_rows: Vec<usize>,
    samplers: Vec<PowerSampler>,
    /// bus index × 3 + phase index of each tracked point.
    points: Vec<usize>,
}

impl<'a> Simulator<'a> {
    fn new(
        net: &'a NetworkModel,
        scenario: &ScenarioSpec,
        variants: &[Variant],
        points: &[(BusId, Phase)],
        cfg: MCConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        scenario.check_network(net)?;
        let base_inj = base_injections(net);
        let base = solve_load_flow_with(net, &base_inj, cfg.load_flow(), None)?;
        let actor_rows = scenario
            .actors
            .iter()
            .map(|a| net.bus_index(a.bus))
            .collect::<Result<_>>()?;
        let samplers = variants
            .iter()
            .map(|v| {
                let mut s = scenario.clone();
                if let Variant::Without(k) = *v {
                    s.actors[k] = s.actors[k].scaled(0.0);
                }
                PowerSampler::new(&s)
            })
            .collect::<Result<_>>()?;
        let points = points
            .iter()
            .map(|&(b, p)| {
                let bus = net.bus(b)?;
                if !bus.phases.contains(p) {
                    return Err(Error::PhaseMismatch {
                        bus: b,
                        phase: p,
                        context: "observation phase".into(),
                    });
                }
                Ok(net.bus_index(b)? * 3 + p.index())
            })
            .collect::<Result<_>>()?;
        Ok(Simulator {
            net,
            cfg,
            base_inj,
            base,
            actor_rows,
            samplers,
            points,
        })
    }

    fn chunk_rng(&self, chunk: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(chunk as u64);
        rng
    }

    /// ΔV at every tracked point for one variant and one standard-normal draw.
    fn sample(&self, variant: usize, z: &nalgebra::DVector<f64>, index: usize) -> Result<Vec<[f64; 3]>> {
        let sampler = &self.samplers[variant];
        let ds = sampler.transform(z);
        let mut inj = self.base_inj.clone();
        for (k, &row) in self.actor_rows.iter().enumerate() {
            for p in 0..3 {
                inj[row][p] += Complex64::new(ds[6 * k + 2 * p], ds[6 * k + 2 * p + 1]);
            }
        }
        let sol = solve_load_flow_with(self.net, &inj, self.cfg.load_flow(), Some(&self.base.voltages))
            .map_err(|e| Error::Sample {
                index,
                source: Box::new(e),
            })?;
        Ok(self
            .points
            .iter()
            .map(|&bp| {
                let (b, p) = (bp / 3, bp % 3);
                let v = sol.voltages[b][p];
                let v0 = self.base.voltages[b][p];
                let dv = v - v0;
                [v.norm() - v0.norm(), dv.re, dv.im]
            })
            .collect())
    }

    fn run(&self) -> Result<Vec<Vec<Moments>>> {
        let samples = self.cfg.samples;
        let chunks = samples.div_ceil(CHUNK);
        let per_chunk: Vec<Result<Vec<Vec<Moments>>>> = (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = self.chunk_rng(c);
                let mut acc = vec![vec![Moments::default(); self.points.len()]; self.samplers.len()];
                let start = c * CHUNK;
                for index in start..(start + CHUNK).min(samples) {
                    let z = self.samplers[0].standard_normal(&mut rng);
                    for (v, row) in acc.iter_mut().enumerate() {
                        for (m, x) in row.iter_mut().zip(self.sample(v, &z, index)?) {
                            m.push(x);
                        }
                    }
                }
                Ok(acc)
            })
            .collect();
        let mut total = vec![vec![Moments::default(); self.points.len()]; self.samplers.len()];
        for chunk in per_chunk {
            for (row, part) in total.iter_mut().zip(chunk?) {
                for (m, p) in row.iter_mut().zip(&part) {
                    m.merge(p);
                }
            }
        }
        Ok(total)
    }
}

/// Empirical ΔV statistics at every phase of bus `o` with all actors varying.
pub fn mc_voltage_variance(
    net: &NetworkModel,
    o: BusId,
    scenario: &ScenarioSpec,
    cfg: &MCConfig,
) -> Result<Vec<VoltageStats>> {
    let points: Vec<_> = net.bus(o)?.phases.iter().map(|p| (o, p)).collect();
    mc_voltage_stats(net, &points, scenario, cfg)
}

/// Empirical ΔV statistics at arbitrary observation points, all actors varying.
pub fn mc_voltage_stats(
    net: &NetworkModel,
    points: &[(BusId, Phase)],
    scenario: &ScenarioSpec,
    cfg: &MCConfig,
) -> Result<Vec<VoltageStats>> {
    let sim = Simulator::new(net, scenario, &[Variant::All], points, *cfg)?;
    let moments = sim.run()?;
    Ok(points
        .iter()
        .zip(&moments[0])
        .map(|(&pt, m)| VoltageStats::from_moments(pt, m))
        .collect())
}

/// Variance-reduction ranking of the actors at one observation phase.
pub fn mc_rank_actors(
    net: &NetworkModel,
    o: (BusId, Phase),
    scenario: &ScenarioSpec,
    cfg: &MCConfig,
) -> Result<RankingResult> {
    Ok(mc_rank_many(net, &[o], scenario, cfg)?.remove(0))
}

/// Variance-reduction rankings at many observation points from one simulation.
pub fn mc_rank_many(
    net: &NetworkModel,
    points: &[(BusId, Phase)],
    scenario: &ScenarioSpec,
    cfg: &MCConfig,
) -> Result<Vec<RankingResult>> {
    let mut variants = vec![Variant::All];
    variants.extend((0..scenario.actors.len()).map(Variant::Without));
    let sim = Simulator::new(net, scenario, &variants, points, *cfg)?;
    let moments = sim.run()?;
    points
        .iter()
        .enumerate()
        .map(|(i, &pt)| {
            let total = moments[0][i].magnitude_variance();
            let reductions: Vec<f64> = (0..scenario.actors.len())
                .map(|k| total - moments[k + 1][i].magnitude_variance())
                .collect();
            let best = reductions.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if best.is_nan() || best <= 0.0 {
                return Err(Error::DegenerateNormalization {
                    bus: pt.0,
                    phase: pt.1,
                });
            }
            Ok(RankingResult::from_scores(
                pt,
                MetricTag::Mc,
                scenario
                    .actors
                    .iter()
                    .zip(&reductions)
                    .map(|(a, &r)| (a.bus, r, r.max(0.0) / best)),
            ))
        })
        .collect()
}

/// Writes one CSV row per sample and observation point (all actors varying).
pub fn write_samples_csv<W: Write>(
    net: &NetworkModel,
    points: &[(BusId, Phase)],
    scenario: &ScenarioSpec,
    cfg: &MCConfig,
    mut out: W,
) -> Result<()> {
    let sim = Simulator::new(net, scenario, &[Variant::All], points, *cfg)?;
    let io = |e: std::io::Error| Error::field("output", e.to_string());
    writeln!(out, "sample,bus,phase,dv_mag,dv_re,dv_im").map_err(io)?;
    for c in 0..cfg.samples.div_ceil(CHUNK) {
        let mut rng = sim.chunk_rng(c);
        for index in c * CHUNK..((c + 1) * CHUNK).min(cfg.samples) {
            let z = sim.samplers[0].standard_normal(&mut rng);
            for (&(b, p), x) in points.iter().zip(sim.sample(0, &z, index)?) {
                writeln!(out, "{index},{b},{p},{},{},{}", x[0], x[1], x[2]).map_err(io)?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn merged_moments_match_single_pass() {
        let xs: Vec<[f64; 3]> = (0..50)
            .map(|i| {
                let t = i as f64;
                [t.sin(), (0.3 * t).cos() * 2.0, t * 0.01]
            })
            .collect();
        let mut whole = Moments::default();
        xs.iter().for_each(|x| whole.push(*x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..17].iter().for_each(|x| a.push(*x));
        xs[17..].iter().for_each(|x| b.push(*x));
        a.merge(&b);
        assert_eq!(a.count(), 50);
        assert!((a.magnitude_variance() - whole.magnitude_variance()).abs() < 1e-12);
        assert!((a.complex_cov() - whole.complex_cov()).norm() < 1e-12);
    }

    #[test]
    fn config_validation() {
        let bad = MCConfig {
            samples: 0,
            ..MCConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
