//! Stochastic power-change scenarios and their file format.
//!
//! ```toml
//! name = "three PV sizes"
//! correlation = 0.0      # same-phase ΔP–ΔP and ΔQ–ΔQ coefficient between actors
//! seed = 2021
//! power_unit = "kW"      # means in kW / kvar, covariances in kW², kvar², kW·kvar
//!
//! [[actors]]
//! bus = 7
//! phase = "c"
//! mean = [0.0, 0.0]
//! cov = [[1.5, -0.05], [-0.05, 0.25]]
//! ```
//!
//! Several rows for the same bus form one actor with several phase blocks.

use nalgebra::{Matrix2, SMatrix, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{BusId, NetworkModel};
use crate::phase::Phase;
use crate::sensitivity::{pq_offset, Vec6};

pub type Mat6 = SMatrix<f64, 6, 6>;

/// Mean and covariance of (ΔP, ΔQ) on one phase of an actor, SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseBlock {
    pub phase: Phase,
    /// [W, var]
    pub mean: Vector2<f64>,
    /// [[W², W·var], [W·var, var²]]
    pub cov: Matrix2<f64>,
}

impl PhaseBlock {
    pub fn new(phase: Phase, mean: [f64; 2], cov: [[f64; 2]; 2]) -> Self {
        PhaseBlock {
            phase,
            mean: Vector2::new(mean[0], mean[1]),
            cov: Matrix2::new(cov[0][0], cov[0][1], cov[1][0], cov[1][1]),
        }
    }

    fn validate(&self, bus: BusId) -> Result<()> {
        let c = &self.cov;
        let field = || format!("actor {bus} phase {}", self.phase);
        if !(self.mean.iter().chain(c.iter()).all(|v| v.is_finite())) {
            return Err(Error::field(field(), "non-finite mean or covariance"));
        }
        let scale = c.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if (c[(0, 1)] - c[(1, 0)]).abs() > 1e-12 * scale {
            return Err(Error::field(field(), "covariance block is not symmetric"));
        }
        let det = c[(0, 0)] * c[(1, 1)] - c[(0, 1)] * c[(1, 0)];
        let tol = 1e-9 * scale * scale;
        if c[(0, 0)] < 0.0 || c[(1, 1)] < 0.0 || det < -tol {
            let half_tr = 0.5 * (c[(0, 0)] + c[(1, 1)]);
            let min_eig = half_tr - (half_tr * half_tr - det).max(0.0).sqrt();
            return Err(Error::NotPsd {
                min_eigenvalue: min_eig,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActorSpec {
    pub bus: BusId,
    pub blocks: Vec<PhaseBlock>,
}

impl ActorSpec {
    pub fn new(bus: impl Into<BusId>, blocks: Vec<PhaseBlock>) -> Self {
        ActorSpec {
            bus: bus.into(),
            blocks,
        }
    }

    pub fn single(bus: impl Into<BusId>, block: PhaseBlock) -> Self {
        ActorSpec::new(bus, vec![block])
    }

    pub fn block(&self, phase: Phase) -> Option<&PhaseBlock> {
        self.blocks.iter().find(|b| b.phase == phase)
    }

    /// Mean embedded in the `[P_a, Q_a, P_b, Q_b, P_c, Q_c]` layout.
    pub fn mean6(&self) -> Vec6 {
        let mut m = Vec6::zeros();
        for b in &self.blocks {
            let k = pq_offset(b.phase);
            m[k] = b.mean[0];
            m[k + 1] = b.mean[1];
        }
        m
    }

    /// Covariance embedded in the 6×6 layout; zero outside the phase blocks.
    pub fn cov6(&self) -> Mat6 {
        let mut s = Mat6::zeros();
        for b in &self.blocks {
            let k = pq_offset(b.phase);
            s.fixed_view_mut::<2, 2>(k, k).copy_from(&b.cov);
        }
        s
    }

    /// Same actor with every covariance block multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.cov *= s;
        }
        out
    }

    /// Same statistics moved to another bus.
    pub fn relocated(&self, bus: BusId) -> Self {
        ActorSpec {
            bus,
            blocks: self.blocks.clone(),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::field(format!("actor {}", self.bus), "no phase blocks"));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if self.blocks[..i].iter().any(|o| o.phase == b.phase) {
                return Err(Error::field(
                    format!("actor {}", self.bus),
                    format!("phase {} listed twice", b.phase),
                ));
            }
            b.validate(self.bus)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: Option<String>,
    pub actors: Vec<ActorSpec>,
    /// Correlation between same-phase ΔP's (and ΔQ's) of distinct actors.
    pub correlation: f64,
    /// RNG seed for oracle runs.
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(actors: Vec<ActorSpec>, correlation: f64) -> Result<Self> {
        let s = ScenarioSpec {
            name: None,
            actors,
            correlation,
            seed: 0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_correlation(mut self, rho: f64) -> Result<Self> {
        self.correlation = rho;
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        if self.actors.is_empty() {
            return Err(Error::NoActors);
        }
        if !(-1.0..=1.0).contains(&self.correlation) {
            return Err(Error::field("correlation", "must lie in [-1, 1]"));
        }
        for (i, a) in self.actors.iter().enumerate() {
            if self.actors[..i].iter().any(|o| o.bus == a.bus) {
                return Err(Error::field(
                    format!("actor {}", a.bus),
                    "bus appears as two separate actors",
                ));
            }
            a.validate()?;
        }
        Ok(())
    }

    /// Checks every actor bus and phase against the network.
    pub fn check_network(&self, net: &NetworkModel) -> Result<()> {
        for a in &self.actors {
            let bus = net.bus(a.bus)?;
            for b in &a.blocks {
                if !bus.phases.contains(b.phase) {
                    return Err(Error::PhaseMismatch {
                        bus: a.bus,
                        phase: b.phase,
                        context: "actor block".into(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn actor(&self, bus: BusId) -> Option<&ActorSpec> {
        self.actors.iter().find(|a| a.bus == bus)
    }

    pub fn actor_position(&self, bus: BusId) -> Result<usize> {
        self.actors
            .iter()
            .position(|a| a.bus == bus)
            .ok_or_else(|| Error::field(format!("actor {bus}"), "not part of the scenario"))
    }

    pub fn bus_ids(&self) -> Vec<BusId> {
        self.actors.iter().map(|a| a.bus).collect()
    }

    /// Scenario with every actor covariance multiplied by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.actors = self.actors.iter().map(|a| a.scaled(s)).collect();
        out
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    name: Option<String>,
    #[serde(default)]
    correlation: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_unit")]
    power_unit: String,
    #[serde(default)]
    actors: Vec<ActorRecord>,
}

fn default_unit() -> String {
    "kW".into()
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActorRecord {
    bus: u32,
    phase: Phase,
    #[serde(default)]
    mean: [f64; 2],
    cov: [[f64; 2]; 2],
}

fn unit_scale(unit: &str) -> Result<f64> {
    match unit {
        "W" => Ok(1.0),
        "kW" => Ok(1e3),
        "MW" => Ok(1e6),
        other => Err(Error::field(
            "power_unit",
            format!("`{other}` (expected W, kW or MW)"),
        )),
    }
}

/// Parses a scenario file; values are converted to SI.
pub fn parse_scenario(text: &str) -> Result<ScenarioSpec> {
    let file: ScenarioFile =
        toml::from_str(text).map_err(|e| crate::network::file_error(text, e))?;
    let k = unit_scale(&file.power_unit)?;
    let mut actors: Vec<ActorSpec> = Vec::new();
    for rec in file.actors {
        let block = PhaseBlock::new(
            rec.phase,
            [rec.mean[0] * k, rec.mean[1] * k],
            [
                [rec.cov[0][0] * k * k, rec.cov[0][1] * k * k],
                [rec.cov[1][0] * k * k, rec.cov[1][1] * k * k],
            ],
        );
        match actors.iter_mut().find(|a| a.bus.0 == rec.bus) {
            Some(a) => a.blocks.push(block),
            None => actors.push(ActorSpec::single(rec.bus, block)),
        }
    }
    let mut s = ScenarioSpec::new(actors, file.correlation)?;
    s.name = file.name;
    s.seed = file.seed;
    Ok(s)
}
