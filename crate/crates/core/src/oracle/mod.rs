//! Nonlinear reference: three-phase load flow and Monte-Carlo sampling.

pub mod loadflow;
pub mod mc;
pub mod sampling;

pub use loadflow::{
    base_injections, power_balance_residual, solve_load_flow, solve_load_flow_with,
    LoadFlowOptions, LoadFlowSolution, PhaseValues, BASE_POWER_VA,
};
pub use mc::{
    mc_rank_actors, mc_rank_many, mc_voltage_stats, mc_voltage_variance, write_samples_csv,
    MCConfig, Moments, VoltageStats,
};
pub use sampling::{sample_power_changes, PowerSampler};
