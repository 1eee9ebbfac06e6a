use std::f64::consts::{FRAC_PI_2, PI};

use invariance_core::expr::*;
use invariance_core::frames::*;
use nalgebra::{Matrix3, Rotation3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(t: f64, x: [f64; 3]) -> SpaceTimePoint {
    SpaceTimePoint::new(t, Vector3::from(x))
}

fn points(seed: u64, n: usize) -> Vec<SpaceTimePoint> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| pt(rng.random_range(0.0..1.0), std::array::from_fn(|_| rng.random_range(-1.0..1.0)))).collect()
}

fn random_rotation_matrix(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
    Rotation3::new(axis.normalize() * rng.random_range(-PI..PI)).into_inner()
}

fn random_galilei(rng: &mut ChaCha8Rng) -> GalileiSpec {
    let mut v = || Vector3::from_fn(|_, _| rng.random_range(-2.0..2.0));
    let (vv, c) = (v(), v());
    GalileiSpec::new(random_rotation_matrix(rng), vv, c, rng.random_range(-1.0..1.0)).unwrap()
}

fn s2_example() -> NsSymmetrySpec {
    NsSymmetrySpec::s2(parse_field_expr("vec(t^2, sin(t), 0)").unwrap(), Some(parse_field_expr("cos(t)").unwrap())).unwrap()
}

fn all_transforms() -> Vec<FrameTransform> {
    let rot = RotationSpec::new(Vector3::new(1.0, 2.0, -0.5), 0.7, 0.3).unwrap();
    let eu = EuclideanSpec::new(rot, parse_field_expr("vec(t^2, sin(t), 0.5*t)").unwrap(), 0.25).unwrap();
    let g = GalileiSpec::new(
        Rotation3::new(Vector3::new(0.2, -0.1, 0.4)).into_inner(),
        Vector3::new(1.0, 0.0, -0.5),
        Vector3::new(0.1, 0.2, 0.3),
        0.4,
    )
    .unwrap();
    vec![
        FrameTransform::Rotation(rot),
        FrameTransform::Galilei(g),
        FrameTransform::Euclidean(eu),
        FrameTransform::Symmetry(NsSymmetrySpec::G(g)),
        FrameTransform::Symmetry(NsSymmetrySpec::S1 { eps: 0.3 }),
        FrameTransform::Symmetry(s2_example()),
        FrameTransform::Symmetry(NsSymmetrySpec::s3(1).unwrap()),
        FrameTransform::Symmetry(NsSymmetrySpec::S4),
        FrameTransform::Symmetry(NsSymmetrySpec::S5 { a: -0.4 }),
        FrameTransform::Symmetry(NsSymmetrySpec::S6 { omega_z: 0.8 }),
    ]
}

fn inverse_of(tr: &FrameTransform) -> FrameTransform {
    match tr {
        FrameTransform::Symmetry(s) => FrameTransform::Symmetry(s.inverse()),
        FrameTransform::Galilei(g) => FrameTransform::Galilei(g.inverse()),
        FrameTransform::Rotation(r) => FrameTransform::Rotation(RotationSpec { rate: -r.rate, phase: -r.phase, ..*r }),
        FrameTransform::Euclidean(_) => unreachable!("not used"),
    }
}

fn close(a: &TensorValue, b: &TensorValue, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol
}

#[test]
fn map_point_examples() {
    let quarter = FrameTransform::Rotation(RotationSpec::about_z(FRAC_PI_2));
    let m = quarter.map_point(&pt(1.0, [1.0, 0.0, 0.0]));
    assert!((m.x - Vector3::new(0.0, 1.0, 0.0)).amax() < 1e-15 && m.t == 1.0);

    let boost = FrameTransform::Galilei(GalileiSpec::boost(Vector3::new(1.0, 0.0, 0.0)));
    assert_eq!(boost.map_point(&pt(2.0, [0.0; 3])).x, Vector3::new(2.0, 0.0, 0.0));

    let eu = EuclideanSpec::new(RotationSpec::identity(), parse_field_expr("vec(t^2, 0, 0)").unwrap(), 0.0).unwrap();
    let m = FrameTransform::Euclidean(eu).map_point(&pt(1.0, [0.0; 3]));
    assert_eq!(m.x, Vector3::new(1.0, 0.0, 0.0));
}

#[test]
fn inverse_maps_undo_forward_maps() {
    for tr in all_transforms() {
        for p in points(1, 200) {
            let back = tr.map_point_inv(&tr.map_point(&p));
            assert!((back.x - p.x).amax() < 1e-12 && (back.t - p.t).abs() < 1e-12, "{tr}");
        }
    }
}

#[test]
fn forward_and_inverse_expressions_agree_with_numeric_maps() {
    let b = Bindings::new();
    for tr in all_transforms() {
        let (fx, ft) = tr.forward_exprs();
        let (ix, it) = tr.inverse_exprs();
        for p in points(2, 50) {
            let m = tr.map_point(&p);
            assert!(close(&evaluate(&fx, &p, &b).unwrap(), &m.x.into(), 1e-12), "{tr}");
            assert!(close(&evaluate(&ft, &p, &b).unwrap(), &m.t.into(), 1e-12), "{tr}");
            assert!(close(&evaluate(&ix, &m, &b).unwrap(), &p.x.into(), 1e-12), "{tr}");
            assert!(close(&evaluate(&it, &m, &b).unwrap(), &p.t.into(), 1e-12), "{tr}");
        }
    }
}

#[test]
fn jacobians_match_finite_differences() {
    let h = 1e-6;
    for tr in all_transforms() {
        for p in points(3, 20) {
            let j = tr.jacobian(p.t);
            for k in 0..3 {
                let (mut a, mut b) = (p, p);
                a.x[k] += h;
                b.x[k] -= h;
                let col = (tr.map_point(&a).x - tr.map_point(&b).x) / (2.0 * h);
                assert!((col - j.column(k)).amax() < 1e-8, "{tr}");
            }
        }
    }
}

#[test]
fn rotations_are_orthogonal_with_constant_spin() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let r = RotationSpec::new(axis, rng.random_range(-3.0..3.0), rng.random_range(-PI..PI)).unwrap();
        for t in [0.0, 0.3, 1.0, 7.5] {
            let q = r.q(t);
            assert!((q * q.transpose() - Matrix3::identity()).amax() < 1e-12);
            assert!((q.determinant() - 1.0).abs() < 1e-12);
            let spin = q * r.q_dot(t).transpose();
            assert!((spin - r.spin()).amax() < 1e-12);
            assert!((spin + spin.transpose()).amax() < 1e-12);
            let h = 1e-7;
            let fd = (r.q(t + h) - r.q(t - h)) / (2.0 * h);
            assert!((q * fd.transpose() - r.spin()).amax() < 1e-6);
            let fdd = (r.q_dot(t + h) - r.q_dot(t - h)) / (2.0 * h);
            assert!((fdd - r.q_ddot(t)).amax() < 1e-6);
        }
    }
}

#[test]
fn spin_composes_with_the_connection_law() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let mut spec = || {
            let axis = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            RotationSpec::new(axis, rng.random_range(-2.0..2.0), rng.random_range(-PI..PI)).unwrap()
        };
        let (inner, outer) = (spec(), spec());
        let t = 0.37;
        let (q, qd) = (outer.q(t), outer.q_dot(t));
        let total = q * inner.q(t);
        let total_dot = qd * inner.q(t) + q * inner.q_dot(t);
        let composed = total * total_dot.transpose();
        let law = q * inner.spin() * q.transpose() + q * qd.transpose();
        assert!((composed - law).amax() < 1e-10);
        let h = 1e-6;
        let fd = (outer.q(t + h) * inner.q(t + h) - outer.q(t - h) * inner.q(t - h)) / (2.0 * h);
        assert!((total * fd.transpose() - law).amax() < 1e-8);
    }
}

#[test]
fn galilei_specs_reject_improper_matrices() {
    let refl = NsSymmetrySpec::reflection(0);
    assert!(matches!(GalileiSpec::new(refl, Vector3::zeros(), Vector3::zeros(), 0.0), Err(FrameError::NotRotation { .. })));
    assert!(matches!(
        GalileiSpec::new(Matrix3::identity() * 1.001, Vector3::zeros(), Vector3::zeros(), 0.0),
        Err(FrameError::NotRotation { .. })
    ));
    assert_eq!(RotationSpec::new(Vector3::zeros(), 1.0, 0.0), Err(FrameError::ZeroAxis));
}

#[test]
fn s2_requires_nonvanishing_acceleration() {
    let lin = parse_field_expr("vec(t, 2*t, 0)").unwrap();
    assert_eq!(NsSymmetrySpec::s2(lin, None), Err(FrameError::ZeroAcceleration));
    let space = parse_field_expr("vec(x1*t^2, 0, 0)").unwrap();
    assert!(matches!(NsSymmetrySpec::s2(space, None), Err(FrameError::PathNotOfTime(_))));
    assert!(NsSymmetrySpec::s3(3).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn galilei_composition_is_pointwise_composition(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random_galilei(&mut rng), random_galilei(&mut rng));
        let ab = a.then(&b);
        prop_assert!((ab.r * ab.r.transpose() - Matrix3::identity()).amax() < 1e-12);
        for p in points(seed ^ 0x55, 200) {
            let direct = b.map(&a.map(&p));
            let composed = ab.map(&p);
            prop_assert!((direct.x - composed.x).amax() < 1e-12);
            prop_assert!((direct.t - composed.t).abs() < 1e-12);
            let back = a.inverse().map(&a.map(&p));
            prop_assert!((back.x - p.x).amax() < 1e-12);
        }
    }
}

#[test]
fn norm_is_unchanged_in_form_under_rotation() {
    let rot = FrameTransform::Rotation(RotationSpec::new(Vector3::new(1.0, 1.0, 0.0), 1.3, 0.2).unwrap());
    let phi = parse_field_expr("norm(x)").unwrap();
    let tilde = transform_field(&phi, &rot, &VarianceRule::new(RuleKind::Scalar)).unwrap();
    for p in points(6, 100) {
        let got = evaluate(&tilde, &p, &Bindings::new()).unwrap().as_scalar().unwrap();
        assert!((got - p.x.norm()).abs() < 1e-14);
    }
}

#[test]
fn rotated_velocity_follows_the_inhomogeneous_rule() {
    let r = RotationSpec::new(Vector3::new(0.3, -1.0, 2.0), 0.9, 0.1).unwrap();
    let rot = FrameTransform::Rotation(r);
    let u = parse_field_expr("vec(x2, x1^2, sin(x3)*t)").unwrap();
    let VelocityRule::Coordinate(rule) = velocity_rule_for(&rot) else { panic!("rotation is a coordinate map") };
    let tilde = transform_field(&u, &rot, &rule).unwrap();
    for p in points(7, 100) {
        let q = r.q(p.t);
        let old = SpaceTimePoint::new(p.t, q.transpose() * p.x);
        let uo = evaluate(&u, &old, &Bindings::new()).unwrap().as_vector().unwrap();
        let want = q * uo - r.spin() * p.x;
        let got = evaluate(&tilde, &p, &Bindings::new()).unwrap().as_vector().unwrap();
        assert!((got - want).amax() < 1e-13);
    }
}

#[test]
fn s2_regauges_pressure_by_the_acceleration() {
    let s2 = NsSymmetrySpec::s2(parse_field_expr("vec(t^2, 0, 0)").unwrap(), None).unwrap();
    let tr = FrameTransform::Symmetry(s2);
    let rules = tr.field_rules(None).unwrap();
    let p = parse_field_expr("x2 * cos(t)").unwrap();
    let tilde = transform_field(&p, &tr, &rules.pressure).unwrap();
    for old in points(8, 50) {
        let new = tr.map_point(&old);
        let got = evaluate(&tilde, &new, &Bindings::new()).unwrap().as_scalar().unwrap();
        let want = old.x[1] * old.t.cos() - 2.0 * old.x[0];
        assert!((got - want).abs() < 1e-13);
    }
    let ut = transform_field(&FieldExpr::zero(Shape::Vec3), &tr, &rules.velocity).unwrap();
    let v = evaluate(&ut, &pt(1.5, [0.0; 3]), &Bindings::new()).unwrap();
    assert_eq!(v, TensorValue::Vector(Vector3::new(3.0, 0.0, 0.0)));
}

#[test]
fn velocity_rules_per_transform() {
    let boost = FrameTransform::Galilei(GalileiSpec::boost(Vector3::new(1.0, 0.0, 0.0)));
    let VelocityRule::Coordinate(rule) = velocity_rule_for(&boost) else { panic!() };
    let off = rule.offset().unwrap();
    assert_eq!(evaluate(off, &pt(0.4, [0.3, 0.2, 0.1]), &Bindings::new()).unwrap(), Vector3::x().into());

    let r = RotationSpec::about_z(2.0);
    let VelocityRule::Coordinate(rule) = velocity_rule_for(&FrameTransform::Rotation(r)) else { panic!() };
    let p = pt(0.7, [1.0, 2.0, 3.0]);
    let off = evaluate(rule.offset().unwrap(), &p, &Bindings::new()).unwrap().as_vector().unwrap();
    assert!((off + r.spin() * p.x).amax() < 1e-14);

    match velocity_rule_for(&FrameTransform::Symmetry(NsSymmetrySpec::S1 { eps: 0.5 })) {
        VelocityRule::Listed { velocity, pressure } => {
            assert_eq!(velocity.multiplier, (-0.5f64).exp());
            assert_eq!(pressure.multiplier, (-1.0f64).exp());
        }
        other => panic!("{other:?}"),
    }
    for s in [s2_example(), NsSymmetrySpec::S4, NsSymmetrySpec::S5 { a: 1.0 }, NsSymmetrySpec::S6 { omega_z: 1.0 }] {
        let tr = FrameTransform::Symmetry(s);
        assert!(matches!(velocity_rule_for(&tr), VelocityRule::Listed { .. }), "{tr}");
    }
    let s3 = FrameTransform::Symmetry(NsSymmetrySpec::s3(0).unwrap());
    assert!(matches!(velocity_rule_for(&s3), VelocityRule::Coordinate(_)));
}

#[test]
fn rules_reject_incompatible_shapes() {
    let rot = FrameTransform::Rotation(RotationSpec::about_z(1.0));
    let r = transform_field(&FieldExpr::coord(), &rot, &VarianceRule::new(RuleKind::Rank2));
    assert!(matches!(r, Err(FrameError::IncompatibleRule { .. })));
    let s6 = FrameTransform::Symmetry(NsSymmetrySpec::S6 { omega_z: 1.0 });
    assert_eq!(s6.field_rules(None), Err(FrameError::MissingStreamFunction));
}

#[test]
fn rank2_rule_conjugates_and_cov1_matches_contra1_for_rotations() {
    let r = RotationSpec::new(Vector3::new(1.0, 0.0, 1.0), 0.5, 0.0).unwrap();
    let rot = FrameTransform::Rotation(r);
    let c = parse_field_expr("outer(x, vec(1, t, x3))").unwrap();
    let g = parse_field_expr("grad(sin(x1)*x2)").unwrap();
    let ct = transform_field(&c, &rot, &VarianceRule::new(RuleKind::Rank2)).unwrap();
    let g_co = transform_field(&g, &rot, &VarianceRule::new(RuleKind::Cov1)).unwrap();
    let g_contra = transform_field(&g, &rot, &VarianceRule::new(RuleKind::Contra1)).unwrap();
    for p in points(9, 50) {
        let q = r.q(p.t);
        let old = SpaceTimePoint::new(p.t, q.transpose() * p.x);
        let co = evaluate(&c, &old, &Bindings::new()).unwrap().as_matrix().unwrap();
        let got = evaluate(&ct, &p, &Bindings::new()).unwrap().as_matrix().unwrap();
        assert!((got - q * co * q.transpose()).amax() < 1e-13);
        let a = evaluate(&g_co, &p, &Bindings::new()).unwrap();
        let b = evaluate(&g_contra, &p, &Bindings::new()).unwrap();
        assert!(close(&a, &b, 0.0));
    }
}

/// Transform `(u, p)` and the stream function by `tr`, returning the new fields.
fn apply(tr: &FrameTransform, u: &FieldExpr, p: &FieldExpr, psi: &FieldExpr) -> (FieldExpr, FieldExpr, FieldExpr) {
    let rules = tr.field_rules(Some(psi)).unwrap();
    let ut = transform_field(u, tr, &rules.velocity).unwrap();
    let pt_ = transform_field(p, tr, &rules.pressure).unwrap();
    let psi_t = match tr {
        FrameTransform::Symmetry(NsSymmetrySpec::S6 { omega_z }) => {
            let rotated = transform_field(psi, tr, &VarianceRule::new(RuleKind::Scalar)).unwrap();
            let r2 = parse_field_expr("x1^2 + x2^2").unwrap();
            FieldExpr::add(&rotated, &FieldExpr::mul(&FieldExpr::scalar(0.5 * omega_z), &r2).unwrap()).unwrap()
        }
        _ => psi.clone(),
    };
    (ut, pt_, psi_t)
}

#[test]
fn every_symmetry_followed_by_its_inverse_restores_the_fields() {
    let u = parse_field_expr("vec(sin(x1)*cos(x2), -cos(x1)*sin(x2), 0.3*x3)*exp(-t)").unwrap();
    let p = parse_field_expr("0.25*(cos(2*x1) + cos(2*x2))*exp(-2*t) + x3*t").unwrap();
    let psi = parse_field_expr("sin(x1)*sin(x2)*exp(-t)").unwrap();
    let g = GalileiSpec::new(
        Rotation3::new(Vector3::new(0.5, 0.1, -0.3)).into_inner(),
        Vector3::new(1.0, -1.0, 0.5),
        Vector3::new(0.3, 0.0, 0.2),
        0.2,
    )
    .unwrap();
    let specs = [
        NsSymmetrySpec::G(g),
        NsSymmetrySpec::S1 { eps: 0.3 },
        s2_example(),
        NsSymmetrySpec::s3(2).unwrap(),
        NsSymmetrySpec::S4,
        NsSymmetrySpec::S5 { a: 0.7 },
        NsSymmetrySpec::S6 { omega_z: 1.1 },
    ];
    let b = Bindings::new();
    for s in specs {
        let tr = FrameTransform::Symmetry(s);
        let (u1, p1, psi1) = apply(&tr, &u, &p, &psi);
        let (u2, p2, _) = apply(&inverse_of(&tr), &u1, &p1, &psi1);
        let (cu, cu2, cp, cp2) = (CompiledExpr::new(&u), CompiledExpr::new(&u2), CompiledExpr::new(&p), CompiledExpr::new(&p2));
        for q in points(10, 200) {
            assert!(close(&cu.eval(&q, &b).unwrap(), &cu2.eval(&q, &b).unwrap(), 1e-10), "{tr} velocity");
            assert!(close(&cp.eval(&q, &b).unwrap(), &cp2.eval(&q, &b).unwrap(), 1e-10), "{tr} pressure");
        }
    }
}
