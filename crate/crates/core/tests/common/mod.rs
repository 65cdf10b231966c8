#![allow(dead_code)]

use dvi_core::network::Mat3;
use dvi_core::*;
use num_complex::Complex64;
use proptest::prelude::*;

pub fn data_path(file: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(file)
}

pub fn ieee37() -> NetworkModel {
    parse_network(&std::fs::read_to_string(data_path("ieee37.toml")).unwrap()).unwrap()
}

pub fn pv15() -> ScenarioSpec {
    parse_scenario(&std::fs::read_to_string(data_path("pv15.toml")).unwrap()).unwrap()
}

/// Symmetric line impedance with dominant diagonal, ohms.
pub fn coupled_z(r: f64, x: f64, m: f64) -> Mat3 {
    Mat3::from_fn(|i, j| {
        if i == j {
            Complex64::new(r, x)
        } else {
            Complex64::new(m * r, m * x)
        }
    })
}

/// A random radial three-phase feeder: bus 1 is the source, bus k > 1 hangs
/// off a random earlier bus.
pub fn arb_feeder(max_buses: usize) -> impl Strategy<Value = NetworkModel> {
    (2..=max_buses)
        .prop_flat_map(|n| {
            (
                Just(n),
                proptest::collection::vec(any::<prop::sample::Index>(), n - 1),
                proptest::collection::vec((0.01f64..1.0, 0.01f64..1.0, 0.0f64..0.4), n - 1),
            )
        })
        .prop_map(|(n, parents, zs)| {
            let buses = (1..=n as u32)
                .map(|id| {
                    let b = Bus::new(id, PhaseSet::ABC, 4.8);
                    if id == 1 {
                        b.source()
                    } else {
                        b
                    }
                })
                .collect();
            let lines = (2..=n)
                .map(|k| {
                    let parent = 1 + parents[k - 2].index(k - 1);
                    let (r, x, m) = zs[k - 2];
                    LineSegment::new(parent as u32, k as u32, coupled_z(r, x, m))
                })
                .collect();
            NetworkModel::new(buses, lines).unwrap()
        })
}

/// A valid 2×2 covariance built as LLᵀ + εI, kW² scale in SI units.
pub fn arb_cov2() -> impl Strategy<Value = [[f64; 2]; 2]> {
    (0.1f64..3.0, -1.0f64..1.0, 0.1f64..2.0).prop_map(|(a, b, c)| {
        let s = 1e6;
        [
            [a * a * s, a * b * s],
            [a * b * s, (b * b + c * c) * s],
        ]
    })
}

pub fn arb_phase() -> impl Strategy<Value = Phase> {
    prop_oneof![Just(Phase::A), Just(Phase::B), Just(Phase::C)]
}

/// A feeder plus a scenario with one single-phase actor on each of up to
/// `max_actors` distinct non-source buses.
pub fn arb_case(
    max_buses: usize,
    max_actors: usize,
    with_means: bool,
) -> impl Strategy<Value = (NetworkModel, ScenarioSpec)> {
    arb_feeder(max_buses).prop_flat_map(move |net| {
        let n = net.len();
        let k = max_actors.min(n - 1);
        (
            Just(net),
            proptest::sample::subsequence((2..=n as u32).collect::<Vec<_>>(), 1..=k),
            proptest::collection::vec((arb_phase(), arb_cov2(), -2.0f64..2.0, -2.0f64..2.0), k),
        )
            .prop_map(move |(net, buses, blocks)| {
                let actors = buses
                    .iter()
                    .zip(&blocks)
                    .map(|(&b, &(p, cov, mp, mq))| {
                        let mean = if with_means { [mp * 1e3, mq * 1e3] } else { [0.0, 0.0] };
                        ActorSpec::single(b, PhaseBlock::new(p, mean, cov))
                    })
                    .collect();
                (net, ScenarioSpec::new(actors, 0.0).unwrap())
            })
    })
}

pub fn arb_gaussian() -> impl Strategy<Value = BivariateGaussian> {
    (arb_cov2(), -3.0f64..3.0, -3.0f64..3.0).prop_map(|(c, m0, m1)| {
        let s = 1e-6;
        BivariateGaussian::new(
            [m0, m1],
            [[c[0][0] * s, c[0][1] * s], [c[1][0] * s, c[1][1] * s]],
        )
    })
}
