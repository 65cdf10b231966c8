//! Statistical distances between voltage-change distributions, the voltage
//! influencing score (VIS) and actor rankings.
//!
//! For an observation phase O, every actor A gets the distance D(A, O)
//! between its single-actor distribution and the aggregate one. Smaller
//! distance means A explains more of the aggregate fluctuation. The score
//! normalizes inverse distances:
//!
//! ```text
//! VIS(O, A) = (1/D(A,O) − 1/D(src,O)) / (1/D(A′,O) − 1/D(src,O))
//! ```
//!
//! where `src` is the scored actor moved to the source bus and A′ is the
//! normalizing reference chosen by [`Normalization`].

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distributions::{
    aggregate_from_coefficients, assemble_covariance, single_from_coefficients, ActorSpec,
    AssembledScenario, BivariateGaussian, ScenarioSpec,
};
use crate::error::{Error, Result};
use crate::network::{BusId, NetworkModel};
use crate::phase::Phase;
use crate::sensitivity::sensitivity_coefficients;

/// Default cap on the covariance condition number accepted by the distances.
pub const DEFAULT_CONDITION_CAP: f64 = 1e12;
/// Distances below this are clamped before inversion.
pub const DISTANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Kl,
    Bc,
}

impl Metric {
    pub fn distance(self, d0: &BivariateGaussian, d1: &BivariateGaussian, cap: f64) -> Result<f64> {
        match self {
            Metric::Kl => kl_distance_capped(d0, d1, cap),
            Metric::Bc => bc_distance_capped(d0, d1, cap),
        }
    }

    pub fn tag(self) -> MetricTag {
        match self {
            Metric::Kl => MetricTag::Kl,
            Metric::Bc => MetricTag::Bc,
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "kl" => Ok(Metric::Kl),
            "bc" => Ok(Metric::Bc),
            other => Err(Error::field("metric", format!("unknown metric `{other}`"))),
        }
    }
}

/// Which method produced a ranking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum MetricTag {
    Kl,
    Bc,
    Mc,
}

impl fmt::Display for MetricTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            MetricTag::Kl => "KL",
            MetricTag::Bc => "BC",
            MetricTag::Mc => "MC",
        })
    }
}

fn inverse(m: &Matrix2<f64>) -> Matrix2<f64> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det
}

fn check_invertible(d: &BivariateGaussian, cap: f64, which: &str) -> Result<()> {
    if d.is_degenerate(cap) {
        return Err(Error::SingularCovariance(format!(
            "{which} covariance (condition number {:e})",
            d.condition_number()
        )));
    }
    Ok(())
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v.max(0.0))
    } else {
        Err(Error::NonFinite(what.into()))
    }
}

/// Kullback–Leibler divergence D(d0 ‖ d1) of two bivariate Gaussians.
pub fn kl_distance(d0: &BivariateGaussian, d1: &BivariateGaussian) -> Result<f64> {
    kl_distance_capped(d0, d1, DEFAULT_CONDITION_CAP)
}

pub fn kl_distance_capped(d0: &BivariateGaussian, d1: &BivariateGaussian, cap: f64) -> Result<f64> {
    check_invertible(d0, cap, "first")?;
    check_invertible(d1, cap, "second")?;
    let inv1 = inverse(&d1.cov);
    let dm = d1.mean - d0.mean;
    let trace = (inv1 * d0.cov).trace();
    let quad = dm.dot(&(inv1 * dm));
    let log_det = (d1.det() / d0.det()).ln();
    finite(0.5 * (trace + quad - 2.0 + log_det), "KL divergence")
}

/// Bhattacharyya distance of two bivariate Gaussians (symmetric).
pub fn bc_distance(d0: &BivariateGaussian, d1: &BivariateGaussian) -> Result<f64> {
    bc_distance_capped(d0, d1, DEFAULT_CONDITION_CAP)
}

pub fn bc_distance_capped(d0: &BivariateGaussian, d1: &BivariateGaussian, cap: f64) -> Result<f64> {
    check_invertible(d0, cap, "first")?;
    check_invertible(d1, cap, "second")?;
    let mix = BivariateGaussian {
        mean: d0.mean,
        cov: (d0.cov + d1.cov) * 0.5,
    };
    check_invertible(&mix, cap, "mixture")?;
    let dm = d1.mean - d0.mean;
    let quad = dm.dot(&(inverse(&mix.cov) * dm));
    let log_term = (mix.det() / (d0.det() * d1.det()).sqrt()).ln();
    finite(0.125 * quad + 0.5 * log_term, "Bhattacharyya distance")
}

/// Reference actor A′ of the VIS denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    /// Closest actual actor; rank 1 always scores 1.
    #[default]
    MinOverActors,
    /// The scored actor's statistics moved onto the observation bus.
    CoLocated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisConfig {
    pub normalization: Normalization,
    pub condition_cap: f64,
    pub distance_floor: f64,
}

impl Default for VisConfig {
    fn default() -> Self {
        VisConfig {
            normalization: Normalization::MinOverActors,
            condition_cap: DEFAULT_CONDITION_CAP,
            distance_floor: DISTANCE_FLOOR,
        }
    }
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub actor: BusId,
    /// Statistical distance for KL/BC (infinite when the actor cannot
    /// reach the observation), variance reduction in V² for MC.
    #[serde(with = "infinite_as_null")]
    pub distance: f64,
    pub vis: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingResult {
    pub observation: (BusId, Phase),
    pub metric: MetricTag,
    pub entries: Vec<RankEntry>,
}

impl RankingResult {
    /// Sorts `(actor, distance, vis)` rows by descending VIS, ties by bus id.
    pub fn from_scores(
        observation: (BusId, Phase),
        metric: MetricTag,
        scores: impl IntoIterator<Item = (BusId, f64, f64)>,
    ) -> Self {
        let mut rows: Vec<_> = scores.into_iter().collect();
        rows.sort_by(|a, b| match b.2.total_cmp(&a.2) {
            Ordering::Equal => a.0.cmp(&b.0),
            other => other,
        });
        let entries = rows
            .into_iter()
            .enumerate()
            .map(|(i, (actor, distance, vis))| RankEntry {
                actor,
                distance,
                vis,
                rank: i + 1,
            })
            .collect();
        RankingResult {
            observation,
            metric,
            entries,
        }
    }

    pub fn top(&self, n: usize) -> impl Iterator<Item = BusId> + '_ {
        self.entries.iter().take(n).map(|e| e.actor)
    }

    pub fn order(&self) -> Vec<BusId> {
        self.entries.iter().map(|e| e.actor).collect()
    }

    pub fn entry(&self, actor: BusId) -> Option<&RankEntry> {
        self.entries.iter().find(|e| e.actor == actor)
    }
}

/// Precomputed analytic state for one network and scenario.
#[derive(Debug, Clone)]
pub struct AnalyticEngine<'a> {
    net: &'a NetworkModel,
    scenario: &'a ScenarioSpec,
    assembled: AssembledScenario,
    pub config: VisConfig,
}

/// Single-actor and aggregate distributions at one observation phase.
#[derive(Debug, Clone)]
pub struct ObservationDistributions {
    pub observation: (BusId, Phase),
    /// In scenario actor order.
    pub singles: Vec<BivariateGaussian>,
    pub aggregate: BivariateGaussian,
}

impl<'a> AnalyticEngine<'a> {
    pub fn new(net: &'a NetworkModel, scenario: &'a ScenarioSpec) -> Result<Self> {
        scenario.check_network(net)?;
        Ok(AnalyticEngine {
            net,
            scenario,
            assembled: assemble_covariance(scenario)?,
            config: VisConfig::default(),
        })
    }

    pub fn with_config(mut self, config: VisConfig) -> Self {
        self.config = config;
        self
    }

    pub fn network(&self) -> &NetworkModel {
        self.net
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        self.scenario
    }

    pub fn distributions(&self, o: BusId, phase: Phase) -> Result<ObservationDistributions> {
        let coeffs = self
            .scenario
            .actors
            .iter()
            .map(|a| sensitivity_coefficients(self.net, o, phase, a.bus))
            .collect::<Result<Vec<_>>>()?;
        let singles = coeffs
            .iter()
            .zip(&self.scenario.actors)
            .map(|(c, a)| single_from_coefficients(c, a))
            .collect();
        Ok(ObservationDistributions {
            observation: (o, phase),
            singles,
            aggregate: aggregate_from_coefficients(&self.assembled, &coeffs),
        })
    }

    /// 1/D, with an unreachable (point-mass) actor mapped to 0.
    fn inverse_distance(
        &self,
        single: &BivariateGaussian,
        aggregate: &BivariateGaussian,
        metric: Metric,
    ) -> Result<f64> {
        if single.is_degenerate(self.config.condition_cap) {
            // Either distance diverges as the single-actor covariance collapses.
            return Ok(0.0);
        }
        let d = metric.distance(single, aggregate, self.config.condition_cap)?;
        Ok(1.0 / d.max(self.config.distance_floor))
    }

    fn virtual_inverse(
        &self,
        actor: &ActorSpec,
        at: BusId,
        o: BusId,
        phase: Phase,
        aggregate: &BivariateGaussian,
        metric: Metric,
    ) -> Result<f64> {
        let moved = actor.relocated(at);
        let bus = self.net.bus(at)?;
        for b in &moved.blocks {
            if !bus.phases.contains(b.phase) {
                return Err(Error::PhaseMismatch {
                    bus: at,
                    phase: b.phase,
                    context: "virtual reference actor".into(),
                });
            }
        }
        let c = sensitivity_coefficients(self.net, o, phase, at)?;
        self.inverse_distance(&single_from_coefficients(&c, &moved), aggregate, metric)
    }

    /// Distances and VIS of every actor at one observation phase, ranked.
    pub fn rank(&self, o: BusId, phase: Phase, metric: Metric) -> Result<RankingResult> {
        let dists = self.distributions(o, phase)?;
        let agg = &dists.aggregate;
        if agg.is_degenerate(self.config.condition_cap) {
            return Err(Error::SingularCovariance(format!(
                "aggregate distribution at {o}{phase}"
            )));
        }
        let inv: Vec<f64> = dists
            .singles
            .iter()
            .map(|s| self.inverse_distance(s, agg, metric))
            .collect::<Result<_>>()?;
        let best = inv.iter().copied().fold(0.0, f64::max);
        let source = self.net.source();
        let mut scores = Vec::with_capacity(inv.len());
        for (k, actor) in self.scenario.actors.iter().enumerate() {
            let inv_src = self.virtual_inverse(actor, source, o, phase, agg, metric)?;
            let inv_ref = match self.config.normalization {
                Normalization::MinOverActors => best,
                Normalization::CoLocated => {
                    self.virtual_inverse(actor, o, o, phase, agg, metric)?
                }
            };
            let denom = inv_ref - inv_src;
            if !(denom.is_finite() && denom > 0.0) {
                return Err(Error::DegenerateNormalization { bus: o, phase });
            }
            let distance = if inv[k] == 0.0 { f64::INFINITY } else { 1.0 / inv[k] };
            scores.push((actor.bus, distance, (inv[k] - inv_src) / denom));
        }
        Ok(RankingResult::from_scores((o, phase), metric.tag(), scores))
    }

    pub fn vis(&self, o: BusId, phase: Phase, actor: BusId, metric: Metric) -> Result<f64> {
        self.scenario.actor_position(actor)?;
        let ranking = self.rank(o, phase, metric)?;
        Ok(ranking.entry(actor).expect("scored").vis)
    }

    /// Rankings for many observation points, computed in parallel, returned in input order.
    pub fn rank_many(
        &self,
        points: &[(BusId, Phase)],
        metric: Metric,
    ) -> Result<Vec<RankingResult>> {
        points
            .par_iter()
            .map(|&(o, p)| self.rank(o, p, metric))
            .collect()
    }

    /// Mean VIS of every actor over all non-source observation points,
    /// in scenario actor order.
    pub fn mean_vis_all(&self, metric: Metric) -> Result<Vec<(BusId, f64)>> {
        let points = self.net.observation_points();
        if points.is_empty() {
            return Err(Error::OutOfRange("network has no observation points".into()));
        }
        let rankings = self.rank_many(&points, metric)?;
        Ok(self
            .scenario
            .actors
            .iter()
            .map(|a| {
                let sum: f64 = rankings
                    .iter()
                    .map(|r| r.entry(a.bus).expect("scored").vis)
                    .sum();
                (a.bus, sum / rankings.len() as f64)
            })
            .collect())
    }
}

pub fn vis(
    net: &NetworkModel,
    o: (BusId, Phase),
    a: BusId,
    scenario: &ScenarioSpec,
    metric: Metric,
) -> Result<f64> {
    AnalyticEngine::new(net, scenario)?.vis(o.0, o.1, a, metric)
}

pub fn rank_actors(
    net: &NetworkModel,
    o: (BusId, Phase),
    scenario: &ScenarioSpec,
    metric: Metric,
) -> Result<RankingResult> {
    AnalyticEngine::new(net, scenario)?.rank(o.0, o.1, metric)
}

pub fn mean_vis(
    net: &NetworkModel,
    a: BusId,
    scenario: &ScenarioSpec,
    metric: Metric,
) -> Result<f64> {
    scenario.actor_position(a)?;
    let table = AnalyticEngine::new(net, scenario)?.mean_vis_all(metric)?;
    Ok(table.into_iter().find(|(b, _)| *b == a).expect("scored").1)
}

/// Fraction of the true top-`n` actors that appear in the predicted top-`n`.
pub fn top_n_accuracy(predicted: &RankingResult, truth: &RankingResult, n: usize) -> Result<f64> {
    let available = predicted.entries.len().min(truth.entries.len());
    if n == 0 || n > available {
        return Err(Error::OutOfRange(format!(
            "top-N with N = {n} but only {available} actors ranked"
        )));
    }
    let truth_top: Vec<BusId> = truth.top(n).collect();
    let hits = predicted.top(n).filter(|a| truth_top.contains(a)).count();
    Ok(hits as f64 / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::PhaseBlock;
    use crate::network::fixtures::*;
    use crate::network::{Bus, LineSegment};
    use crate::phase::PhaseSet;

    fn iso(mean: [f64; 2], s: f64) -> BivariateGaussian {
        BivariateGaussian::new(mean, [[s, 0.0], [0.0, s]])
    }

    #[test]
    fn kl_closed_forms() {
        let d = kl_distance(&iso([0.0, 0.0], 1.0), &iso([0.0, 0.0], 2.0)).unwrap();
        assert!((d - (2f64.ln() - 0.5)).abs() < 1e-12);
        let d = kl_distance(&iso([1.0, 0.0], 1.0), &iso([0.0, 0.0], 1.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn bc_closed_forms() {
        let d = bc_distance(&iso([0.0, 0.0], 1.0), &iso([0.0, 0.0], 2.0)).unwrap();
        assert!((d - 0.5 * (2.25f64 / 2.0).ln()).abs() < 1e-12);
        assert!((d - 0.0589).abs() < 1e-4);
        let d = bc_distance(&iso([2.0, 0.0], 1.0), &iso([0.0, 0.0], 1.0)).unwrap();
        assert!((d - 0.5).abs() < 1e-12);
    }

    #[test]
    fn singular_inputs_are_rejected() {
        let ok = iso([0.0, 0.0], 1.0);
        let flat = BivariateGaussian::new([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]]);
        assert!(matches!(
            kl_distance(&flat, &ok),
            Err(Error::SingularCovariance(_))
        ));
        assert!(matches!(
            bc_distance(&ok, &flat),
            Err(Error::SingularCovariance(_))
        ));
    }

    #[test]
    fn ranking_sort_and_ties() {
        let r = RankingResult::from_scores(
            (BusId(1), Phase::A),
            MetricTag::Kl,
            vec![
                (BusId(9), 2.0, 0.5),
                (BusId(3), 2.0, 0.5),
                (BusId(4), 1.0, 1.0),
            ],
        );
        assert_eq!(r.order(), vec![BusId(4), BusId(3), BusId(9)]);
        assert_eq!(r.entries[2].rank, 3);
    }

    #[test]
    fn top_n() {
        let mk = |order: &[u32]| {
            RankingResult::from_scores(
                (BusId(1), Phase::A),
                MetricTag::Mc,
                order
                    .iter()
                    .enumerate()
                    .map(|(i, b)| (BusId(*b), 0.0, 1.0 - i as f64 * 0.1)),
            )
        };
        let a = mk(&[1, 2, 3, 4, 5, 6]);
        let b = mk(&[2, 1, 3, 6, 5, 4]);
        assert_eq!(top_n_accuracy(&a, &a, 5).unwrap(), 1.0);
        assert_eq!(top_n_accuracy(&a, &b, 4).unwrap(), 0.75);
        assert!(top_n_accuracy(&a, &b, 7).is_err());
        assert!(top_n_accuracy(&a, &b, 0).is_err());
    }

    fn pv(bus: u32, phase: Phase, sp: f64) -> ActorSpec {
        ActorSpec::single(bus, PhaseBlock::new(phase, [0.0, 0.0], [[sp, -0.03 * sp], [-0.03 * sp, 0.2 * sp]]))
    }

    #[test]
    fn single_actor_is_rank_one_with_unit_vis() {
        let net = y_net();
        let s = ScenarioSpec::new(vec![pv(3, Phase::A, 1e6)], 0.0).unwrap();
        let r = rank_actors(&net, (BusId(4), Phase::A), &s, Metric::Kl).unwrap();
        assert_eq!(r.entries.len(), 1);
        assert_eq!(r.entries[0].rank, 1);
        assert_eq!(r.entries[0].vis, 1.0);
    }

    #[test]
    fn actor_at_source_scores_zero() {
        let net = y_net();
        let s = ScenarioSpec::new(vec![pv(3, Phase::A, 1e6), pv(1, Phase::A, 1e6)], 0.0).unwrap();
        for metric in [Metric::Kl, Metric::Bc] {
            let r = rank_actors(&net, (BusId(4), Phase::A), &s, metric).unwrap();
            let src = r.entry(BusId(1)).unwrap();
            assert_eq!(src.vis, 0.0);
            assert!(src.distance.is_infinite());
            assert_eq!(r.entries[0].actor, BusId(3));
        }
    }

    #[test]
    fn two_bus_mean_vis_is_one() {
        let net = NetworkModel::new(
            vec![
                Bus::new(1, PhaseSet::single(Phase::A), 4.8).source(),
                Bus::new(2, PhaseSet::single(Phase::A), 4.8),
            ],
            vec![LineSegment::new(1, 2, single_phase(0.2, 0.1))],
        )
        .unwrap();
        let s = ScenarioSpec::new(vec![pv(2, Phase::A, 1e6)], 0.0).unwrap();
        assert_eq!(mean_vis(&net, BusId(2), &s, Metric::Bc).unwrap(), 1.0);
        assert!(mean_vis(&net, BusId(5), &s, Metric::Bc).is_err());
    }

    #[test]
    fn co_located_normalization() {
        let net = y_net();
        let s = ScenarioSpec::new(vec![pv(3, Phase::A, 1e6), pv(4, Phase::A, 1e6)], 0.0).unwrap();
        let engine = AnalyticEngine::new(&net, &s).unwrap().with_config(VisConfig {
            normalization: Normalization::CoLocated,
            ..VisConfig::default()
        });
        let r = engine.rank(BusId(3), Phase::A, Metric::Kl).unwrap();
        // actor 3 sits on the observation bus, so it is its own reference
        assert!((r.entry(BusId(3)).unwrap().vis - 1.0).abs() < 1e-12);
        assert!(r.entry(BusId(4)).unwrap().vis < 1.0);
    }

    #[test]
    fn ranking_json_round_trip() {
        let net = y_net();
        let s = ScenarioSpec::new(vec![pv(3, Phase::A, 1e6), pv(1, Phase::B, 1e6)], 0.0).unwrap();
        let r = rank_actors(&net, (BusId(4), Phase::C), &s, Metric::Bc).unwrap();
        let text = serde_json::to_string(&r).unwrap();
        let back: RankingResult = serde_json::from_str(&text).unwrap();
        assert_eq!(r, back);
    }
}
