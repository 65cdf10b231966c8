use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "dvi",
    version,
    about = "Rank DER actor buses by their influence on voltage fluctuations"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Network file (TOML). Defaults to the bundled IEEE 37-node feeder.
    #[arg(long, global = true)]
    pub network: Option<PathBuf>,
    /// Scenario file (TOML). Defaults to the bundled 15-unit PV scenario.
    #[arg(long, global = true)]
    pub scenario: Option<PathBuf>,
    /// Override the scenario's same-phase correlation coefficient.
    #[arg(long, global = true, allow_negative_numbers = true)]
    pub rho: Option<f64>,
    /// Operating point used by the linear model.
    #[arg(long, global = true, value_enum, default_value_t = BaseSource::File)]
    pub base: BaseSource,
    /// Reference actor in the VIS denominator.
    #[arg(long, global = true, value_enum, default_value_t = NormalizationArg::MinActor)]
    pub normalization: NormalizationArg,
    #[arg(long, global = true, value_enum, default_value_t = Format::Pretty)]
    pub format: Format,
    /// Monte-Carlo seed. Defaults to the scenario file's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Monte-Carlo sample count.
    #[arg(long, global = true, default_value_t = 10_000)]
    pub samples: usize,
    /// Worker threads.
    #[arg(long, global = true, env = "DVI_THREADS")]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank actors at one or more observation points.
    Rank {
        #[command(flatten)]
        points: PointArgs,
        #[arg(long, value_enum, default_value_t = MetricArg::Kl)]
        metric: MetricArg,
        /// Keep only the first N rows of each table.
        #[arg(long)]
        top_n: Option<usize>,
        /// Write raw Monte-Carlo samples (CSV) for the selected points.
        #[arg(long)]
        samples_out: Option<PathBuf>,
    },
    /// Top-N accuracy of the analytic rankings against the Monte-Carlo baseline.
    Validate {
        #[command(flatten)]
        points: PointArgs,
        #[arg(long, value_delimiter = ',', default_values_t = [5, 10])]
        top_n: Vec<usize>,
    },
    /// Wall-clock comparison of analytic and Monte-Carlo ranking.
    Benchmark {
        #[arg(long, default_value = "7")]
        obs: String,
        #[arg(long, default_value = "c")]
        phase: String,
        #[arg(long, default_value_t = 5)]
        top_n: usize,
        /// Time only the analytic path.
        #[arg(long)]
        analytic_only: bool,
    },
    /// Mean VIS of every actor over all observation points.
    MeanVis {
        #[arg(long, value_enum, default_value_t = MetricArg::Kl)]
        metric: MetricArg,
    },
}

#[derive(Debug, Args)]
pub struct PointArgs {
    /// Comma-separated observation buses, or `all` for every non-source bus.
    #[arg(long, default_value = "all")]
    pub obs: String,
    /// Observation phases (e.g. `c`, `ab`) or `all`.
    #[arg(long, default_value = "all")]
    pub phase: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Kl,
    Bc,
    Mc,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Pretty,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BaseSource {
    /// Base phasors stored in the network file, nominal where absent.
    File,
    /// Nominal balanced phasors everywhere.
    Nominal,
    /// Solve the base-case load flow first.
    Solved,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormalizationArg {
    /// Closest actual actor scores 1.
    MinActor,
    /// Scored actor moved onto the observation bus.
    CoLocated,
}
