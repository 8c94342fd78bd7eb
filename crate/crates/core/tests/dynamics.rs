use einshift::bridge::{example_nonsubgroup, transport, DiamondChart, MinkMap};
use einshift::dynamics::*;
use einshift::eins::{sphere_distance, sphere_grid, EinsHatPoint};
use einshift::lift::LiftedConformal;
use einshift::linalg::{classify_matrix, MatrixClass};
use einshift::samples::{sphere_rotation, split_boost, time_rotation};
use einshift::{RunConfig, Tolerances};
use nalgebra::DVector;
use std::f64::consts::{PI, TAU};

fn cfg(n: usize) -> RunConfig {
    RunConfig::with_n(n)
}

fn unit_time(n: usize) -> MinkMap {
    let mut a = DVector::zeros(n + 1);
    a[0] = 1.0;
    MinkMap::Translation(a)
}

fn distance_to_refocusing_sequence(q: &EinsHatPoint, apex: &EinsHatPoint) -> f64 {
    let k = ((q.t - apex.t) / PI).round();
    let sign = if (k as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
    (q.t - apex.t - PI * k).abs().max((&q.z - &apex.z * sign).norm())
}

#[test]
fn orbit_examples() {
    let n = 2;
    let rot = LiftedConformal::lift(&sphere_rotation(n, 0.7), 0).unwrap();
    let tr = orbit(&rot, &EinsHatPoint::on_axis(0.4, n), 100).unwrap();
    assert!(tr.t_values.iter().all(|t| (t - 0.4).abs() < 1e-12));
    assert!(tr.drift.abs() < 1e-12);

    // the transported translation fixes the chart apex
    let chart = DiamondChart::new(&EinsHatPoint::on_axis(0.0, n));
    let f = transport(&chart, &unit_time(n), &Tolerances::default()).unwrap();
    let tr = orbit(&f, &chart.apex(0), 50).unwrap();
    assert!(tr.points.iter().all(|q| q.distance(&chart.apex(0)) < 1e-9));
}

#[test]
fn deck_escapes_at_the_first_power() {
    let n = 2;
    let c = classify_dynamic(&LiftedConformal::deck(n), &cfg(n)).unwrap();
    assert_eq!(c.kind, Kind::FutureEscaping);
    assert!(c.certified());
    assert!(matches!(c.certificate, Certificate::Escaping { j: 1, .. }));
    assert!(c.recheck(&LiftedConformal::deck(n), &cfg(n)).unwrap());
    let back = classify_dynamic(&LiftedConformal::deck(n).inverse().unwrap(), &cfg(n)).unwrap();
    assert_eq!(back.kind, Kind::PastEscaping);
}

#[test]
fn sphere_isometry_is_elliptic() {
    for n in 1..4 {
        let phi = LiftedConformal::lift(&sphere_rotation(n, 0.9), 0).unwrap();
        let d = classify_dynamic(&phi, &cfg(n)).unwrap();
        let a = classify_algebraic(&phi, &cfg(n)).unwrap();
        assert_eq!(d.kind, Kind::NonEscapingElliptic, "n={n}");
        assert_eq!(a.kind, Kind::NonEscapingElliptic, "n={n}");
        assert!(d.certified() && a.certified());
        assert_eq!(is_essential_lift(&phi, &cfg(n)).unwrap(), (false, "elliptic"));
    }
}

#[test]
fn identity_is_fixed() {
    let c = classify_algebraic(&LiftedConformal::identity(2), &cfg(2)).unwrap();
    assert_eq!(c.kind, Kind::NonEscapingFixedPoint);
    assert!(c.certified());
}

#[test]
fn time_rotation_escapes_to_the_future() {
    let n = 2;
    let phi = LiftedConformal::lift(&time_rotation(n, 0.5), 0).unwrap();
    let a = classify_algebraic(&phi, &cfg(n)).unwrap();
    let d = classify_dynamic(&phi, &cfg(n)).unwrap();
    assert_eq!(a.kind, Kind::FutureEscaping);
    assert_eq!(d.kind, Kind::FutureEscaping);
    assert!(a.certified() && d.certified());
    match a.certificate {
        Certificate::Rotation { translation_number, .. } => assert!((translation_number - 0.5).abs() < 1e-9),
        other => panic!("unexpected certificate {other:?}"),
    }
    // winding -1 over a rotation by -0.5 has translation number -0.5
    let wound = LiftedConformal::lift(&time_rotation(n, -0.5), -1).unwrap();
    assert_eq!(classify_algebraic(&wound, &cfg(n)).unwrap().kind, Kind::PastEscaping);
}

#[test]
fn split_boost_fixes_an_isotropic_ray() {
    let n = 2;
    let phi = LiftedConformal::lift(&split_boost(n, 0.8), 0).unwrap();
    let a = classify_algebraic(&phi, &cfg(n)).unwrap();
    assert_eq!(a.kind, Kind::NonEscapingFixedPoint);
    assert!(a.recheck(&phi, &cfg(n)).unwrap());
    let Certificate::FixedPoint { point, .. } = &a.certificate else { panic!("no fixed point") };
    let tr = orbit(&phi, point, 20).unwrap();
    assert!(tr.points.iter().all(|q| q.distance(point) < 1e-8));
    let d = classify_dynamic(&phi, &cfg(n)).unwrap();
    assert_eq!(d.kind, Kind::NonEscapingFixedPoint);
    assert_eq!(is_essential_lift(&phi, &cfg(n)).unwrap(), (true, "non-escaping non-elliptic"));
}

#[test]
fn transported_translation_has_a_fixed_point_on_the_apex_chain() {
    let n = 2;
    let apex = EinsHatPoint::on_axis(0.0, n);
    let f = transport(&DiamondChart::new(&apex), &unit_time(n), &Tolerances::default()).unwrap();
    // the fixed point is degenerate, so residual-based refinement only pins it
    // to roughly the square root of the fixed-point tolerance
    let found = [(classify_dynamic(&f, &cfg(n)).unwrap(), 1e-3), (classify_algebraic(&f, &cfg(n)).unwrap(), 1e-8)];
    for (c, slack) in found {
        assert_eq!(c.kind, Kind::NonEscapingFixedPoint);
        let Certificate::FixedPoint { point, .. } = &c.certificate else { panic!("no fixed point") };
        assert!(distance_to_refocusing_sequence(point, &apex) < slack, "{point:?}");
        assert!(c.recheck(&f, &cfg(n)).unwrap());
    }
    assert_eq!(classify_matrix(f.base(), &Tolerances::default()).unwrap(), MatrixClass::Parabolic);
    assert_eq!(is_essential_lift(&f, &cfg(n)).unwrap(), (true, "non-escaping non-elliptic"));
    assert_eq!(is_essential_lift(&LiftedConformal::deck(n), &cfg(n)).unwrap(), (false, "escaping"));
}

#[test]
fn nonsubgroup_product_escapes() {
    for n in 1..3 {
        let ex = example_nonsubgroup(n, &Tolerances::default()).unwrap();
        for f in [&ex.phi, &ex.psi] {
            assert_eq!(classify_algebraic(f, &cfg(n)).unwrap().kind, Kind::NonEscapingFixedPoint);
        }
        let prod = ex.product().unwrap();
        let d = classify_dynamic(&prod, &cfg(n)).unwrap();
        assert_eq!(d.kind, Kind::FutureEscaping);
        assert!(d.certified());
        assert_eq!(classify_algebraic(&prod, &cfg(n)).unwrap().kind, Kind::FutureEscaping);
    }
}

#[test]
fn deck_strips_are_periods() {
    let n = 2;
    let deck = LiftedConformal::deck(n);
    let c = classify_dynamic(&deck, &cfg(n)).unwrap();
    for (i, z) in sphere_grid(n, 25).into_iter().enumerate() {
        let t = -20.0 + 1.7 * i as f64;
        let q = EinsHatPoint { t, z };
        let idx = fundamental_domain_index(&deck, &c, &q, 1e-9).unwrap();
        assert_eq!(idx.index, (t / TAU).floor() as i64);
        // equivariance
        let moved = fundamental_domain_index(&deck, &c, &deck.evaluate(&q).unwrap(), 1e-9).unwrap();
        assert_eq!(moved.index, idx.index + 1);
    }
}

#[test]
fn identity_boundary_is_a_past_cone() {
    let n = 2;
    let z0 = DVector::from_vec(vec![0.0, 0.6, 0.8]);
    let grid = sphere_grid(n, 200);
    let b = invariant_achronal_boundary(&LiftedConformal::identity(n), &EinsHatPoint { t: 0.0, z: z0.clone() }, 3, &grid)
        .unwrap();
    for (x, f) in grid.iter().zip(&b.values) {
        assert!((f + sphere_distance(x, &z0)).abs() < 1e-12);
    }
}

#[test]
fn rotation_boundary_is_the_envelope_of_its_circle() {
    let n = 2;
    let beta = 2.0f64.sqrt();
    let phi = LiftedConformal::lift(&sphere_rotation(n, beta), 0).unwrap();
    let z0 = DVector::from_vec(vec![0.6, 0.0, 0.8]);
    let grid = sphere_grid(n, 300);
    let b = invariant_achronal_boundary(&phi, &EinsHatPoint { t: 0.0, z: z0 }, 200, &grid).unwrap();
    // oracle: the orbit circle sampled finely in closed form
    let circle: Vec<DVector<f64>> = (0..4000)
        .map(|i| {
            let a = TAU * i as f64 / 4000.0;
            DVector::from_vec(vec![0.6 * a.cos(), 0.6 * a.sin(), 0.8])
        })
        .collect();
    for (x, f) in grid.iter().zip(&b.values) {
        let want = circle.iter().map(|c| -sphere_distance(x, c)).fold(f64::NEG_INFINITY, f64::max);
        assert!(*f <= want + 1e-5 && want - f < 0.02, "{f} vs {want}");
    }
    assert!(b.lipschitz_excess() <= 1e-12);
    let spread = b.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - b.values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(spread <= PI + 1e-12);
}
