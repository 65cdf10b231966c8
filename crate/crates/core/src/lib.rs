//! Ranking distributed-energy actors by their influence on voltage
//! fluctuations in unbalanced three-phase radial feeders.
//!
//! The analytic path linearises the feeder around a base operating point,
//! maps each actor's stochastic power change to a bivariate Gaussian of the
//! complex voltage change at an observation phase, and scores actors by how
//! close their single-actor distribution is to the aggregate one. The
//! [`oracle`] module provides a nonlinear Monte-Carlo reference.

pub mod distributions;
pub mod error;
pub mod metrics;
pub mod network;
pub mod oracle;
pub mod phase;
pub mod sensitivity;

pub use distributions::{
    aggregate_distribution, assemble_covariance, parse_scenario, single_actor_distribution,
    ActorSpec, BivariateGaussian, PhaseBlock, ScenarioSpec,
};
pub use error::{Error, Result};
pub use metrics::{
    bc_distance, kl_distance, mean_vis, rank_actors, top_n_accuracy, vis, AnalyticEngine, Metric,
    MetricTag, Normalization, RankEntry, RankingResult, VisConfig,
};
pub use network::{parse_network, Bus, BusId, LineSegment, NetworkModel, Polar};
pub use phase::{Phase, PhaseSet};
pub use sensitivity::{sensitivity_coefficients, voltage_change, PowerChange, SensitivityVector};
