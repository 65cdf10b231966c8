//! Structural invariants of the linear model, distance metrics and VIS.

mod common;

use common::*;
use dvi_core::distributions::single_actor_distribution;
use dvi_core::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn shared_path_impedance_is_symmetric(net in arb_feeder(12), i in any::<prop::sample::Index>(), j in any::<prop::sample::Index>()) {
        let ids: Vec<BusId> = net.buses().iter().map(|b| b.id).collect();
        let (o, a) = (ids[i.index(ids.len())], ids[j.index(ids.len())]);
        prop_assert_eq!(net.shared_path_impedance(o, a).unwrap(), net.shared_path_impedance(a, o).unwrap());
        let p1: Vec<_> = net.shared_path(o, a).unwrap().iter().map(|l| (l.from, l.to)).collect();
        let p2: Vec<_> = net.shared_path(a, o).unwrap().iter().map(|l| (l.from, l.to)).collect();
        prop_assert_eq!(p1, p2);
    }

    #[test]
    fn actor_superposition_is_exact(
        (net, s) in arb_case(10, 4, true),
        p in arb_phase(),
        o in any::<prop::sample::Index>(),
    ) {
        let o = net.buses()[o.index(net.len())].id;
        let deltas: Vec<_> = s.actors.iter().map(|a| (a.bus, PowerChange(a.mean6()))).collect();
        let joint = voltage_change(&net, o, p, &deltas).unwrap();
        let parts = deltas
            .iter()
            .map(|d| voltage_change(&net, o, p, std::slice::from_ref(d)).unwrap())
            .fold(num_complex::Complex64::new(0.0, 0.0), |acc, v| acc + v);
        prop_assert_eq!(joint, parts);
    }

    #[test]
    fn power_superposition_holds(
        net in arb_feeder(10),
        a in any::<prop::sample::Index>(),
        d1 in proptest::array::uniform6(-5e3f64..5e3),
        d2 in proptest::array::uniform6(-5e3f64..5e3),
        p in arb_phase(),
    ) {
        let o = net.buses()[net.len() - 1].id;
        let a = net.buses()[a.index(net.len())].id;
        let x = PowerChange(d1.into());
        let y = PowerChange(d2.into());
        let sum = PowerChange(x.0 + y.0);
        let joint = voltage_change(&net, o, p, &[(a, sum)]).unwrap();
        let split = voltage_change(&net, o, p, &[(a, x)]).unwrap()
            + voltage_change(&net, o, p, &[(a, y)]).unwrap();
        let scale = joint.norm().max(split.norm()).max(1e-300);
        prop_assert!((joint - split).norm() <= 1e-12 * scale.max(1.0));
    }

    #[test]
    fn zero_correlation_covariances_add(
        (net, s) in arb_case(10, 5, true),
        p in arb_phase(),
        o in any::<prop::sample::Index>(),
    ) {
        let o = net.buses()[o.index(net.len())].id;
        let agg = aggregate_distribution(&net, o, p, &s).unwrap();
        let mut cov = nalgebra::Matrix2::zeros();
        let mut mean = nalgebra::Vector2::zeros();
        for a in &s.actors {
            let d = single_actor_distribution(&net, o, p, a).unwrap();
            cov += d.cov;
            mean += d.mean;
        }
        let scale = agg.cov.norm().max(1e-300);
        prop_assert!((agg.cov - cov).norm() <= 1e-12 * scale);
        prop_assert!((agg.mean - mean).norm() <= 1e-12 * agg.mean.norm().max(1e-300));
    }

    #[test]
    fn covariance_scales_quadratically(
        (net, s) in arb_case(8, 4, false),
        k in 0.1f64..10.0,
        p in arb_phase(),
    ) {
        let o = net.buses()[net.len() - 1].id;
        let base = aggregate_distribution(&net, o, p, &s).unwrap();
        let scaled = aggregate_distribution(&net, o, p, &s.scaled(k * k)).unwrap();
        prop_assert!((scaled.cov - base.cov * (k * k)).norm() <= 1e-12 * scaled.cov.norm().max(1e-300));
    }

    #[test]
    fn vis_is_invariant_to_power_scaling(
        (net, s) in arb_case(10, 5, true),
        k in 0.05f64..20.0,
        metric in prop_oneof![Just(Metric::Kl), Just(Metric::Bc)],
    ) {
        let o = net.buses()[net.len() - 1].id;
        let mut scaled = s.scaled(k * k);
        for a in &mut scaled.actors {
            for b in &mut a.blocks {
                b.mean *= k;
            }
        }
        let r0 = rank_actors(&net, (o, Phase::A), &s, metric);
        let r1 = rank_actors(&net, (o, Phase::A), &scaled, metric);
        match (r0, r1) {
            (Ok(r0), Ok(r1)) => {
                for e in &r0.entries {
                    let f = r1.entry(e.actor).unwrap();
                    prop_assert!((e.vis - f.vis).abs() <= 1e-9, "{} vs {}", e.vis, f.vis);
                }
            }
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "scaling changed feasibility: {a:?} / {b:?}"),
        }
    }

    #[test]
    fn top_vis_is_smallest_distance(
        (net, s) in arb_case(10, 6, true),
        p in arb_phase(),
        metric in prop_oneof![Just(Metric::Kl), Just(Metric::Bc)],
    ) {
        let o = net.buses()[net.len() - 1].id;
        if let Ok(r) = rank_actors(&net, (o, p), &s, metric) {
            let best = r.entries.iter().map(|e| e.distance).fold(f64::INFINITY, f64::min);
            prop_assert_eq!(r.entries[0].distance, best);
            prop_assert_eq!(r.entries[0].vis, 1.0);
            for e in &r.entries {
                prop_assert!((0.0..=1.0).contains(&e.vis));
            }
        }
    }
}

#[test]
fn distances_are_nonnegative_and_zero_on_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut asymmetric = 0;
    let draw = |rng: &mut ChaCha8Rng| {
        let (a, b, c): (f64, f64, f64) = (rng.random_range(0.1..3.0), rng.random_range(-1.0..1.0), rng.random_range(0.1..2.0));
        BivariateGaussian::new(
            [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)],
            [[a * a, a * b], [a * b, b * b + c * c]],
        )
    };
    for _ in 0..1000 {
        let p = draw(&mut rng);
        let q = draw(&mut rng);
        let kl_pq = kl_distance(&p, &q).unwrap();
        let kl_qp = kl_distance(&q, &p).unwrap();
        let bc_pq = bc_distance(&p, &q).unwrap();
        assert!(kl_pq >= 0.0 && kl_qp >= 0.0 && bc_pq >= 0.0);
        assert_eq!(bc_pq, bc_distance(&q, &p).unwrap());
        assert!(kl_distance(&p, &p).unwrap().abs() <= 1e-12);
        assert!(bc_distance(&p, &p).unwrap().abs() <= 1e-12);
        if rel(kl_pq, kl_qp) > 1e-6 {
            asymmetric += 1;
        }
    }
    assert!(asymmetric > 900, "KL should be asymmetric for generic pairs");
}

/// Chain feeder with identical segments and identical actors on every bus:
/// seen from the far end, influence grows with depth.
#[test]
fn vis_grows_toward_the_observation_on_a_uniform_chain() {
    let n = 8u32;
    let buses = (1..=n)
        .map(|id| {
            let b = Bus::new(id, PhaseSet::ABC, 4.8);
            if id == 1 { b.source() } else { b }
        })
        .collect();
    let lines = (2..=n)
        .map(|k| LineSegment::new(k - 1, k, coupled_z(0.2, 0.15, 0.3)))
        .collect();
    let net = NetworkModel::new(buses, lines).unwrap();
    let block = PhaseBlock::new(Phase::A, [0.0, 0.0], [[2.0e6, -0.1e6], [-0.1e6, 0.5e6]]);
    let s = ScenarioSpec::new((2..=n).map(|b| ActorSpec::single(b, block)).collect(), 0.0).unwrap();
    for metric in [Metric::Kl, Metric::Bc] {
        let r = rank_actors(&net, (BusId(n), Phase::A), &s, metric).unwrap();
        let vis: Vec<f64> = (2..=n).map(|b| r.entry(BusId(b)).unwrap().vis).collect();
        for w in vis.windows(2) {
            assert!(w[0] < w[1], "{vis:?}");
        }
        assert_eq!(r.entries[0].actor, BusId(n));
    }
}
