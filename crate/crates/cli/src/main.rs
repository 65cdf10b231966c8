mod args;
mod commands;
mod output;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::Context;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] dvi_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Input(format!("thread pool: {e}")))?;
    }
    let ctx = Context::load(&cli.common)?;
    let format = cli.common.format;
    match cli.command {
        Command::Rank {
            points,
            metric,
            top_n,
            samples_out,
        } => {
            if let Some(n) = top_n {
                ctx.check_top_n(n)?;
            }
            let pts = ctx.points(&points.obs, &points.phase)?;
            if let Some(path) = samples_out {
                commands::write_samples(&ctx, &pts, &path)?;
            }
            let tables = commands::rank(&ctx, &pts, &commands::metric_tags(metric))?;
            Ok(output::rankings(format, &tables, top_n))
        }
        Command::Validate { points, top_n } => {
            let pts = ctx.points(&points.obs, &points.phase)?;
            let report = commands::validate(&ctx, &pts, &top_n)?;
            Ok(output::validation(format, &report))
        }
        Command::Benchmark {
            obs,
            phase,
            top_n,
            analytic_only,
        } => {
            let pts = ctx.points(&obs, &phase)?;
            if pts.len() != 1 {
                return Err(CliError::Input(
                    "benchmark needs exactly one observation bus and phase".into(),
                ));
            }
            let report = commands::benchmark(&ctx, pts[0], top_n, analytic_only)?;
            Ok(output::benchmark(format, &report))
        }
        Command::MeanVis { metric } => {
            let rows = commands::mean_vis(&ctx, &commands::metric_tags(metric))?;
            Ok(output::mean_vis(format, &rows))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(text) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).is_err() {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
