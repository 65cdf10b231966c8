use std::fmt::Write as _;

use dvi_core::{MetricTag, RankingResult};
use serde::Serialize;

use crate::args::Format;
use crate::commands::{BenchmarkReport, MeanVisRow, ValidateReport};

fn json<T: Serialize + ?Sized>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn sci(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.3e}")
    } else {
        "inf".into()
    }
}

pub fn rankings(format: Format, tables: &[RankingResult], top_n: Option<usize>) -> String {
    let limit = top_n.unwrap_or(usize::MAX);
    let trimmed: Vec<RankingResult> = tables
        .iter()
        .map(|t| RankingResult {
            entries: t.entries.iter().take(limit).cloned().collect(),
            ..t.clone()
        })
        .collect();
    let mut out = String::new();
    match format {
        Format::Json => out = json(&trimmed),
        Format::Csv => {
            out.push_str("bus,phase,metric,rank,actor,distance,vis\n");
            for t in &trimmed {
                for e in &t.entries {
                    let _ = writeln!(
                        out,
                        "{},{},{},{},{},{},{}",
                        t.observation.0, t.observation.1, t.metric, e.rank, e.actor, e.distance, e.vis
                    );
                }
            }
        }
        Format::Pretty => {
            for (i, t) in trimmed.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                let what = if t.metric == MetricTag::Mc {
                    "var. reduction"
                } else {
                    "distance"
                };
                let _ = writeln!(out, "observation {}{}  metric {}", t.observation.0, t.observation.1, t.metric);
                let _ = writeln!(out, "{:>4}  {:>5}  {:>14}  {:>6}", "rank", "actor", what, "VIS");
                for e in &t.entries {
                    let _ = writeln!(out, "{:>4}  {:>5}  {:>14}  {:>6.3}", e.rank, e.actor, sci(e.distance), e.vis);
                }
            }
        }
    }
    out
}

pub fn validation(format: Format, report: &ValidateReport) -> String {
    let mut out = String::new();
    match format {
        Format::Json => out = json(report),
        Format::Csv => {
            out.push_str("bus,phase,metric,n,accuracy\n");
            for r in &report.points {
                let _ = writeln!(out, "{},{},{},{},{}", r.observation.0, r.observation.1, r.metric, r.n, r.accuracy);
            }
            for m in &report.mean {
                let _ = writeln!(out, "mean,,{},{},{}", m.metric, m.n, m.accuracy);
            }
        }
        Format::Pretty => {
            let columns: Vec<(MetricTag, usize)> = report.mean.iter().map(|m| (m.metric, m.n)).collect();
            let _ = writeln!(
                out,
                "top-N accuracy against Monte-Carlo ({} samples, seed {})",
                report.samples, report.seed
            );
            let _ = write!(out, "{:>11}", "observation");
            for (m, n) in &columns {
                let _ = write!(out, "  {:>8}", format!("{m} top{n}"));
            }
            out.push('\n');
            let mut obs: Vec<_> = report.points.iter().map(|r| r.observation).collect();
            obs.dedup();
            for o in obs {
                let _ = write!(out, "{:>11}", format!("{}{}", o.0, o.1));
                for (m, n) in &columns {
                    let acc = report
                        .points
                        .iter()
                        .find(|r| r.observation == o && r.metric == *m && r.n == *n)
                        .map_or(f64::NAN, |r| r.accuracy);
                    let _ = write!(out, "  {acc:>8.3}");
                }
                out.push('\n');
            }
            let _ = write!(out, "{:>11}", "mean");
            for m in &report.mean {
                let _ = write!(out, "  {:>8.3}", m.accuracy);
            }
            out.push('\n');
        }
    }
    out
}

pub fn benchmark(format: Format, report: &BenchmarkReport) -> String {
    let mut out = String::new();
    let top = |v: &[dvi_core::BusId]| v.iter().map(|b| b.to_string()).collect::<Vec<_>>().join(" ");
    match format {
        Format::Json => out = json(report),
        Format::Csv => {
            out.push_str("metric,seconds,speedup,top\n");
            for t in report.analytic.iter().chain(&report.mc) {
                let speed = t.speedup.map(|s| s.to_string()).unwrap_or_default();
                let _ = writeln!(out, "{},{},{},{}", t.metric, t.seconds, speed, top(&t.top));
            }
        }
        Format::Pretty => {
            let _ = writeln!(
                out,
                "top-{} at observation {}{}",
                report.top_n, report.observation.0, report.observation.1
            );
            let _ = writeln!(out, "{:>6}  {:>12}  {:>10}  top", "metric", "seconds", "speedup");
            for t in report.analytic.iter().chain(&report.mc) {
                let speed = t.speedup.map_or(String::from("-"), |s| format!("{s:.0}x"));
                let _ = writeln!(out, "{:>6}  {:>12.6}  {:>10}  {}", t.metric.to_string(), t.seconds, speed, top(&t.top));
            }
            if let Some(mc) = &report.mc {
                let _ = writeln!(out, "Monte-Carlo: {} samples, {:.3} s", report.samples, mc.seconds);
                if mc.top.is_empty() {
                    out.push_str("Monte-Carlo ranking undefined: no variance reduction observed\n");
                }
            }
        }
    }
    out
}

pub fn mean_vis(format: Format, rows: &[MeanVisRow]) -> String {
    let mut out = String::new();
    match format {
        Format::Json => out = json(rows),
        Format::Csv => {
            out.push_str("actor,metric,mean_vis\n");
            for r in rows {
                let _ = writeln!(out, "{},{},{}", r.actor, r.metric, r.mean_vis);
            }
        }
        Format::Pretty => {
            let mut metrics: Vec<MetricTag> = rows.iter().map(|r| r.metric).collect();
            metrics.dedup();
            let mut actors: Vec<_> = rows.iter().map(|r| r.actor).collect();
            actors.sort();
            actors.dedup();
            let _ = write!(out, "{:>5}", "actor");
            for m in &metrics {
                let _ = write!(out, "  {:>6}", m.to_string());
            }
            out.push('\n');
            for a in actors {
                let _ = write!(out, "{a:>5}");
                for m in &metrics {
                    let v = rows.iter().find(|r| r.actor == a && r.metric == *m).map_or(f64::NAN, |r| r.mean_vis);
                    let _ = write!(out, "  {v:>6.3}");
                }
                out.push('\n');
            }
        }
    }
    out
}
