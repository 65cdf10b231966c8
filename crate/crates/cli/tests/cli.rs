use std::path::PathBuf;
use std::process::{Command, Output};

use dvi_core::RankingResult;

fn dvi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dvi"))
        .args(args)
        .env_remove("DVI_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn temp_file(name: &str, contents: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dvi-cli-tests-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

const GOLDEN_ARGS: &[&str] = &[
    "rank", "--obs", "7,16", "--phase", "c", "--metric", "all", "--samples", "300", "--format", "csv",
];

#[test]
fn rank_csv_matches_golden_file() {
    let out = dvi(GOLDEN_ARGS);
    assert!(out.status.success(), "{}", stderr(&out));
    let golden = include_str!("golden/rank_7_16_c.csv");
    assert_eq!(stdout(&out), golden);
}

#[test]
fn output_is_independent_of_thread_count() {
    let one = Command::new(env!("CARGO_BIN_EXE_dvi"))
        .args(GOLDEN_ARGS)
        .env("DVI_THREADS", "1")
        .output()
        .unwrap();
    let three = Command::new(env!("CARGO_BIN_EXE_dvi"))
        .args(GOLDEN_ARGS)
        .env("DVI_THREADS", "3")
        .output()
        .unwrap();
    assert!(one.status.success() && three.status.success());
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn json_tables_round_trip() {
    let out = dvi(&["rank", "--obs", "7,16", "--metric", "all", "--samples", "200", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    let tables: Vec<RankingResult> = serde_json::from_str(&text).unwrap();
    assert_eq!(tables.len(), 2 * 3 * 3);
    let again = serde_json::to_string_pretty(&tables).unwrap() + "\n";
    assert_eq!(again, text);
    let back: Vec<RankingResult> = serde_json::from_str(&again).unwrap();
    assert_eq!(back, tables);
}

#[test]
fn rank_one_observation_matches_expected_leaders() {
    let out = dvi(&["rank", "--obs", "7", "--phase", "c", "--metric", "kl", "--format", "csv"]);
    let text = stdout(&out);
    let first = text.lines().nth(1).unwrap();
    assert!(first.starts_with("7,c,KL,1,7,"), "{first}");
    assert!(first.ends_with(",1"), "{first}");
    let out = dvi(&["rank", "--obs", "16", "--phase", "c", "--metric", "bc", "--format", "csv"]);
    let first = stdout(&out).lines().nth(1).unwrap().to_string();
    assert!(first.starts_with("16,c,BC,1,14,"), "{first}");
}

#[test]
fn pretty_output_uses_three_decimals() {
    let out = dvi(&["rank", "--obs", "7", "--phase", "c", "--top-n", "2"]);
    let text = stdout(&out);
    let rows: Vec<&str> = text.lines().skip(2).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].trim_end().ends_with("1.000"), "{text}");
}

#[test]
fn empty_scenario_is_an_input_error() {
    let path = temp_file("empty.toml", "name = \"nothing\"\n");
    let out = dvi(&["rank", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no actors defined"), "{}", stderr(&out));
}

#[test]
fn top_n_beyond_actor_count_is_rejected() {
    let out = dvi(&["validate", "--obs", "7", "--top-n", "15", "--samples", "10"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("top-N"), "{}", stderr(&out));
}

#[test]
fn malformed_network_reports_location() {
    let path = temp_file("bad.toml", "[[buses]]\nid = 1\nphases = \"abq\"\nkv = 4.8\n");
    let out = dvi(&["rank", "--network", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}

#[test]
fn non_convergence_is_a_numerical_failure() {
    let net = r#"
[[buses]]
id = 1
phases = "abc"
kv = 4.8
source = true

[[buses]]
id = 2
phases = "abc"
kv = 4.8
load_kw = [5000.0, 5000.0, 5000.0]
load_kvar = [2000.0, 2000.0, 2000.0]

[[lines]]
from = 1
to = 2
r = [[20.0, 0.0, 0.0], [0.0, 20.0, 0.0], [0.0, 0.0, 20.0]]
x = [[20.0, 0.0, 0.0], [0.0, 20.0, 0.0], [0.0, 0.0, 20.0]]
"#;
    let sc = "[[actors]]\nbus = 2\nphase = \"a\"\ncov = [[1.0, 0.0], [0.0, 1.0]]\n";
    let n = temp_file("heavy.toml", net);
    let s = temp_file("one.toml", sc);
    let out = dvi(&[
        "rank", "--network", n.to_str().unwrap(), "--scenario", s.to_str().unwrap(), "--base", "solved",
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn single_actor_mean_vis_is_one_row_of_ones() {
    let sc = "[[actors]]\nbus = 9\nphase = \"c\"\ncov = [[4.5, -0.2], [-0.2, 0.75]]\n";
    let s = temp_file("single.toml", sc);
    let out = dvi(&["mean-vis", "--scenario", s.to_str().unwrap(), "--format", "csv"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(stdout(&out), "actor,metric,mean_vis\n9,KL,1\n");
}

#[test]
fn benchmark_smoke_and_analytic_only() {
    let out = dvi(&["benchmark", "--samples", "1", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v["mc"]["seconds"].as_f64().unwrap() > 0.0);
    assert!(v["mc"]["top"].as_array().unwrap().is_empty());
    assert!(v["analytic"][0]["speedup"].is_number());

    let out = dvi(&["benchmark", "--analytic-only", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert!(v.get("mc").is_none());
    assert!(v["analytic"][0].get("speedup").is_none());
}

#[test]
fn validate_reports_per_point_and_mean_accuracy() {
    let out = dvi(&["validate", "--obs", "7,16", "--phase", "c", "--samples", "400", "--format", "json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["points"].as_array().unwrap().len(), 2 * 2 * 2);
    assert_eq!(v["mean"].as_array().unwrap().len(), 4);
    for m in v["mean"].as_array().unwrap() {
        let a = m["accuracy"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&a));
    }
}

#[test]
fn samples_out_writes_csv() {
    let dir = temp_file("placeholder", "");
    let path = dir.with_file_name("samples.csv");
    let out = dvi(&[
        "rank", "--obs", "7", "--phase", "c", "--samples", "3", "--samples-out", path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 4);
}
