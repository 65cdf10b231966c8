use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use dvi_core::oracle::{mc_rank_many, solve_load_flow, write_samples_csv, MCConfig};
use dvi_core::{
    parse_network, parse_scenario, top_n_accuracy, AnalyticEngine, BusId, Metric, MetricTag,
    NetworkModel, Normalization, Phase, PhaseSet, RankingResult, ScenarioSpec, VisConfig,
};
use serde::{Deserialize, Serialize};

use crate::args::{BaseSource, Common, MetricArg, NormalizationArg};
use crate::CliError;

const BUNDLED_NETWORK: &str = include_str!("../../../data/ieee37.toml");
const BUNDLED_SCENARIO: &str = include_str!("../../../data/pv15.toml");

pub struct Context {
    pub net: NetworkModel,
    pub scenario: ScenarioSpec,
    pub vis: VisConfig,
    pub mc: MCConfig,
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn in_file<T>(path: Option<&Path>, r: dvi_core::Result<T>) -> Result<T, CliError> {
    r.map_err(|e| match path {
        Some(p) if !e.is_numerical() => CliError::Input(format!("{}: {e}", p.display())),
        _ => CliError::Core(e),
    })
}

impl Context {
    pub fn load(common: &Common) -> Result<Self, CliError> {
        let net_text = match &common.network {
            Some(p) => read(p)?,
            None => BUNDLED_NETWORK.to_string(),
        };
        let mut net = in_file(common.network.as_deref(), parse_network(&net_text))?;
        net = match common.base {
            BaseSource::File => net,
            BaseSource::Nominal => net.with_nominal_base(),
            BaseSource::Solved => {
                let sol = solve_load_flow(&net, &dvi_core::oracle::base_injections(&net))?;
                net.with_base_voltages(&sol.voltages)
            }
        };
        let sc_text = match &common.scenario {
            Some(p) => read(p)?,
            None => BUNDLED_SCENARIO.to_string(),
        };
        let mut scenario = in_file(common.scenario.as_deref(), parse_scenario(&sc_text))?;
        if let Some(rho) = common.rho {
            scenario = scenario.with_correlation(rho)?;
        }
        scenario.check_network(&net)?;
        let vis = VisConfig {
            normalization: match common.normalization {
                NormalizationArg::MinActor => Normalization::MinOverActors,
                NormalizationArg::CoLocated => Normalization::CoLocated,
            },
            ..VisConfig::default()
        };
        let mc = MCConfig {
            samples: common.samples,
            seed: common.seed.unwrap_or(scenario.seed),
            ..MCConfig::default()
        };
        mc.validate()?;
        Ok(Context {
            net,
            scenario,
            vis,
            mc,
        })
    }

    fn engine(&self) -> AnalyticEngine<'_> {
        AnalyticEngine::new(&self.net, &self.scenario)
            .expect("scenario checked against network")
            .with_config(self.vis)
    }

    pub fn points(&self, obs: &str, phase: &str) -> Result<Vec<(BusId, Phase)>, CliError> {
        let filter = if phase.trim().eq_ignore_ascii_case("all") {
            PhaseSet::ABC
        } else {
            phase
                .trim()
                .parse::<PhaseSet>()
                .map_err(|e| CliError::Input(format!("--phase: {e}")))?
        };
        let buses: Vec<BusId> = if obs.trim().eq_ignore_ascii_case("all") {
            self.net
                .buses()
                .iter()
                .filter(|b| !b.is_source)
                .map(|b| b.id)
                .collect()
        } else {
            obs.split(',')
                .map(|s| {
                    s.trim()
                        .parse::<u32>()
                        .map(BusId)
                        .map_err(|_| CliError::Input(format!("--obs: `{s}` is not a bus id")))
                })
                .collect::<Result<_, _>>()?
        };
        let mut points = Vec::new();
        for b in buses {
            let bus = self.net.bus(b)?;
            if bus.is_source {
                return Err(CliError::Input(format!(
                    "bus {b} is the source and cannot be observed"
                )));
            }
            let present: Vec<Phase> = bus.phases.iter().filter(|p| filter.contains(*p)).collect();
            if present.is_empty() {
                return Err(CliError::Input(format!(
                    "bus {b} has none of the phases {filter}"
                )));
            }
            points.extend(present.into_iter().map(|p| (b, p)));
        }
        if points.is_empty() {
            return Err(CliError::Input("no observation points selected".into()));
        }
        Ok(points)
    }

    pub fn check_top_n(&self, n: usize) -> Result<(), CliError> {
        let actors = self.scenario.actors.len();
        if n == 0 || n > actors {
            return Err(CliError::Input(format!(
                "top-N must be between 1 and the number of actors ({actors}), got {n}"
            )));
        }
        Ok(())
    }
}

pub fn metric_tags(m: MetricArg) -> Vec<MetricTag> {
    match m {
        MetricArg::Kl => vec![MetricTag::Kl],
        MetricArg::Bc => vec![MetricTag::Bc],
        MetricArg::Mc => vec![MetricTag::Mc],
        MetricArg::All => vec![MetricTag::Kl, MetricTag::Bc, MetricTag::Mc],
    }
}

fn analytic_metric(tag: MetricTag) -> Option<Metric> {
    match tag {
        MetricTag::Kl => Some(Metric::Kl),
        MetricTag::Bc => Some(Metric::Bc),
        MetricTag::Mc => None,
    }
}

/// Rankings grouped by observation point, metrics in the requested order.
pub fn rank(
    ctx: &Context,
    points: &[(BusId, Phase)],
    tags: &[MetricTag],
) -> Result<Vec<RankingResult>, CliError> {
    let engine = ctx.engine();
    let mut per_metric = Vec::new();
    for &tag in tags {
        let rankings = match analytic_metric(tag) {
            Some(m) => engine.rank_many(points, m)?,
            None => mc_rank_many(&ctx.net, points, &ctx.scenario, &ctx.mc)?,
        };
        per_metric.push(rankings);
    }
    let mut out = Vec::with_capacity(points.len() * tags.len());
    for i in 0..points.len() {
        for rankings in &per_metric {
            out.push(rankings[i].clone());
        }
    }
    Ok(out)
}

pub fn write_samples(
    ctx: &Context,
    points: &[(BusId, Phase)],
    path: &Path,
) -> Result<(), CliError> {
    let file = fs::File::create(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    write_samples_csv(
        &ctx.net,
        points,
        &ctx.scenario,
        &ctx.mc,
        std::io::BufWriter::new(file),
    )?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointAccuracy {
    pub observation: (BusId, Phase),
    pub metric: MetricTag,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanAccuracy {
    pub metric: MetricTag,
    pub n: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateReport {
    pub samples: usize,
    pub seed: u64,
    pub points: Vec<PointAccuracy>,
    pub mean: Vec<MeanAccuracy>,
}

pub fn validate(
    ctx: &Context,
    points: &[(BusId, Phase)],
    ns: &[usize],
) -> Result<ValidateReport, CliError> {
    if ns.is_empty() {
        return Err(CliError::Input("--top-n needs at least one value".into()));
    }
    for &n in ns {
        ctx.check_top_n(n)?;
    }
    let truth = mc_rank_many(&ctx.net, points, &ctx.scenario, &ctx.mc)?;
    let engine = ctx.engine();
    let mut rows = Vec::new();
    let mut mean = Vec::new();
    for metric in [Metric::Kl, Metric::Bc] {
        let predicted = engine.rank_many(points, metric)?;
        for &n in ns {
            let mut sum = 0.0;
            for (p, t) in predicted.iter().zip(&truth) {
                let accuracy = top_n_accuracy(p, t, n)?;
                sum += accuracy;
                rows.push(PointAccuracy {
                    observation: p.observation,
                    metric: metric.tag(),
                    n,
                    accuracy,
                });
            }
            mean.push(MeanAccuracy {
                metric: metric.tag(),
                n,
                accuracy: sum / points.len() as f64,
            });
        }
    }
    Ok(ValidateReport {
        samples: ctx.mc.samples,
        seed: ctx.mc.seed,
        points: rows,
        mean,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub metric: MetricTag,
    pub seconds: f64,
    pub top: Vec<BusId>,
    /// Monte-Carlo time over this path's time.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speedup: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub observation: (BusId, Phase),
    pub top_n: usize,
    pub samples: usize,
    pub analytic: Vec<Timing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<Timing>,
}

pub fn benchmark(
    ctx: &Context,
    point: (BusId, Phase),
    top_n: usize,
    analytic_only: bool,
) -> Result<BenchmarkReport, CliError> {
    ctx.check_top_n(top_n)?;
    const REPS: u32 = 10;
    let mut analytic = Vec::new();
    for metric in [Metric::Kl, Metric::Bc] {
        let start = Instant::now();
        let mut ranking = None;
        for _ in 0..REPS {
            let engine = AnalyticEngine::new(&ctx.net, &ctx.scenario)?.with_config(ctx.vis);
            ranking = Some(engine.rank(point.0, point.1, metric)?);
        }
        let seconds = start.elapsed().as_secs_f64() / f64::from(REPS);
        analytic.push(Timing {
            metric: metric.tag(),
            seconds,
            top: ranking.expect("ran").top(top_n).collect(),
            speedup: None,
        });
    }
    let mc = if analytic_only {
        None
    } else {
        let start = Instant::now();
        let top = match mc_rank_many(&ctx.net, &[point], &ctx.scenario, &ctx.mc) {
            Ok(mut r) => r.remove(0).top(top_n).collect(),
            // Too few samples to separate the actors still yields a timing.
            Err(dvi_core::Error::DegenerateNormalization { .. }) => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let seconds = start.elapsed().as_secs_f64();
        for t in &mut analytic {
            t.speedup = Some(seconds / t.seconds);
        }
        Some(Timing {
            metric: MetricTag::Mc,
            seconds,
            top,
            speedup: None,
        })
    };
    Ok(BenchmarkReport {
        observation: point,
        top_n,
        samples: ctx.mc.samples,
        analytic,
        mc,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanVisRow {
    pub actor: BusId,
    pub metric: MetricTag,
    pub mean_vis: f64,
}

pub fn mean_vis(ctx: &Context, tags: &[MetricTag]) -> Result<Vec<MeanVisRow>, CliError> {
    let points = ctx.net.observation_points();
    let engine = ctx.engine();
    let mut rows = Vec::new();
    for &tag in tags {
        let table: Vec<(BusId, f64)> = match analytic_metric(tag) {
            Some(m) => engine.mean_vis_all(m)?,
            None => {
                let rankings = mc_rank_many(&ctx.net, &points, &ctx.scenario, &ctx.mc)?;
                let mut sums: BTreeMap<BusId, f64> = BTreeMap::new();
                for r in &rankings {
                    for e in &r.entries {
                        *sums.entry(e.actor).or_default() += e.vis;
                    }
                }
                ctx.scenario
                    .bus_ids()
                    .into_iter()
                    .map(|b| (b, sums[&b] / rankings.len() as f64))
                    .collect()
            }
        };
        rows.extend(table.into_iter().map(|(actor, mean_vis)| MeanVisRow {
            actor,
            metric: tag,
            mean_vis,
        }));
    }
    Ok(rows)
}
