use dvi_web::{Session, BUNDLED_NETWORK, BUNDLED_SCENARIO};

fn bundled() -> Session {
    Session::from_texts(BUNDLED_NETWORK, BUNDLED_SCENARIO).unwrap()
}

#[test]
fn rank_json_puts_co_located_actor_first() {
    let s = bundled();
    let json = s.rank_json(7, "c", "kl").unwrap();
    let r: dvi_core::RankingResult = serde_json::from_str(&json).unwrap();
    assert_eq!(r.entries[0].actor.0, 7);
    assert_eq!(r.entries[0].vis, 1.0);
    assert_eq!(r.entries.len(), 14);
}

#[test]
fn ellipses_match_covariance_invariants() {
    let s = bundled();
    let set = s.ellipses(16, "c").unwrap();
    assert_eq!(set.actors.len(), 14);
    let agg = set.aggregate;
    assert!(agg.major >= agg.minor && agg.minor > 0.0);
    // The aggregate spreads at least as wide as any single actor.
    for a in &set.actors {
        assert!(a.ellipse.major <= agg.major * (1.0 + 1e-12));
    }
}

#[test]
fn ellipse_axes_follow_eigen_decomposition() {
    let g = dvi_core::BivariateGaussian::new([1.0, -2.0], [[4.0, 1.5], [1.5, 1.0]]);
    let e = dvi_web::Ellipse::from(&g);
    let (a, b) = (e.major * e.major, e.minor * e.minor);
    assert!((a + b - 5.0).abs() < 1e-12);
    assert!((a * b - (4.0 - 2.25)).abs() < 1e-12);
    let (c, s) = (e.angle.cos(), e.angle.sin());
    let v = [4.0 * c + 1.5 * s, 1.5 * c + 1.0 * s];
    assert!((v[0] - a * c).abs() < 1e-12 && (v[1] - a * s).abs() < 1e-12);
    assert_eq!(e.center, [1.0, -2.0]);
}

#[test]
fn mean_vis_covers_every_actor() {
    let rows = bundled().mean_vis("bc").unwrap();
    assert_eq!(rows.len(), 14);
    assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.mean_vis)));
}

#[test]
fn bad_inputs_are_reported() {
    let s = bundled();
    assert!(s.rank_json(7, "x", "kl").is_err());
    assert!(s.rank_json(7, "c", "mc").is_err());
    assert!(s.rank_json(99, "c", "kl").is_err());
    let err = Session::from_texts(BUNDLED_NETWORK, "[[actors]]\nbus = 99\nphase = \"a\"\ncov = [[1.0, 0.0], [0.0, 1.0]]\n")
        .unwrap_err();
    assert!(err.contains("99"), "{err}");
}

#[test]
fn observation_points_exclude_source() {
    let pts = bundled().observation_points();
    assert_eq!(pts.len(), 108);
    assert!(pts.iter().all(|(b, _)| b.0 != 1));
}
