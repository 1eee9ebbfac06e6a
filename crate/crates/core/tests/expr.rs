use invariance_core::expr::*;
use nalgebra::{Matrix3, Vector3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pt(t: f64, x: [f64; 3]) -> SpaceTimePoint {
    SpaceTimePoint::new(t, Vector3::from(x))
}

fn table() -> SymbolTable {
    SymbolTable::standard().with("M", Shape::Mat3).with("w", Shape::Vec3)
}

fn bindings() -> Bindings {
    let mut b = Bindings::new();
    b.insert("nu".into(), TensorValue::Scalar(0.3));
    b.insert("a".into(), TensorValue::Scalar(0.7));
    b.insert("w".into(), TensorValue::Vector(Vector3::new(0.2, -0.4, 0.9)));
    b.insert("M".into(), TensorValue::Matrix(Matrix3::new(0.5, 0.1, -0.2, 0.3, -0.7, 0.4, 0.0, 0.6, 0.2)));
    b
}

fn eval_str(s: &str, p: &SpaceTimePoint) -> TensorValue {
    evaluate(&parse_with(s, &table()).unwrap(), p, &bindings()).unwrap()
}

#[test]
fn parses_spec_examples_with_expected_shapes() {
    assert_eq!(parse_field_expr("norm(x)").unwrap().shape(), Shape::Scalar);
    assert_eq!(parse_field_expr("0.5*(grad(u) + transpose(grad(u)))").unwrap().shape(), Shape::Mat3);
    assert_eq!(parse_field_expr("dot(x, grad(p))").unwrap().shape(), Shape::Scalar);
}

#[test]
fn operator_signatures_follow_the_shape_table() {
    let cases = [
        ("dot(x, x)", Some(Shape::Scalar)),
        ("dot(eye(), eye())", Some(Shape::Scalar)),
        ("outer(x, u)", Some(Shape::Mat3)),
        ("grad(norm(x))", Some(Shape::Vec3)),
        ("grad(u)", Some(Shape::Mat3)),
        ("div(u)", Some(Shape::Scalar)),
        ("div(grad(u))", Some(Shape::Vec3)),
        ("lap(u)", Some(Shape::Vec3)),
        ("dt(p)", Some(Shape::Scalar)),
        ("comp(grad(u), 1, 2)", Some(Shape::Scalar)),
        ("grad(u) * x", Some(Shape::Vec3)),
        ("x / norm(x)", Some(Shape::Vec3)),
        ("grad(grad(u))", None),
        ("x * x", None),
        ("dot(x, t)", None),
        ("x + t", None),
        ("transpose(x)", None),
        ("comp(x, 1, 2)", None),
        ("sin(x)", None),
        ("t / x", None),
        ("div(p)", None),
    ];
    for (s, want) in cases {
        match (parse_field_expr(s), want) {
            (Ok(e), Some(w)) => assert_eq!(e.shape(), w, "{s}"),
            (Err(ParseError::Shape { .. }), None) => {}
            (r, w) => panic!("{s}: got {r:?}, wanted {w:?}"),
        }
    }
}

#[test]
fn shape_errors_name_the_node_and_syntax_errors_carry_positions() {
    match parse_field_expr("t + x") {
        Err(ParseError::Shape { node, line, column, .. }) => {
            assert_eq!(node, "+");
            assert_eq!((line, column), (1, 3));
        }
        other => panic!("{other:?}"),
    }
    match parse_field_expr("sin(x1)\n  * (t +") {
        Err(ParseError::Syntax { line, .. }) => assert_eq!(line, 2),
        other => panic!("{other:?}"),
    }
    match parse_field_expr("norm(x) $ 2") {
        Err(ParseError::Syntax { line, column, .. }) => assert_eq!((line, column), (1, 9)),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_field_expr("comp(x, 4)"), Err(ParseError::Syntax { .. })));
    assert!(matches!(parse_field_expr("frob(x)"), Err(ParseError::Syntax { .. })));
    assert!(matches!(parse_field_expr(""), Err(ParseError::Syntax { .. })));
}

#[test]
fn evaluates_spec_examples() {
    let p = pt(0.0, [3.0, 4.0, 0.0]);
    assert_eq!(eval_str("norm(x)", &p), TensorValue::Scalar(5.0));
    let g = eval_str("grad(norm(x))", &p).as_vector().unwrap();
    assert!((g - Vector3::new(0.6, 0.8, 0.0)).amax() < 1e-15);

    // Strain rate of u = (x1^2, 0, 0) by hand: S11 = 2 x1, all else 0.
    let e = parse_field_expr("0.5*(grad(u) + transpose(grad(u)))").unwrap();
    let mut m = std::collections::BTreeMap::new();
    m.insert("u".to_string(), parse_field_expr("vec(x1^2, 0, 0)").unwrap());
    let s = substitute(&e, &m).unwrap();
    let v = evaluate(&s, &pt(0.0, [1.0, 1.0, 1.0]), &Bindings::new()).unwrap().as_matrix().unwrap();
    let mut want = Matrix3::zeros();
    want[(0, 0)] = 2.0;
    assert_eq!(v, want);
}

#[test]
fn differentiates_spec_examples() {
    let d = differentiate(&parse_field_expr("x1^2").unwrap(), Wrt::X(0));
    for x1 in [-1.5, 0.0, 2.0] {
        let v = evaluate(&d, &pt(0.0, [x1, 0.3, 0.1]), &Bindings::new()).unwrap();
        assert_eq!(v, TensorValue::Scalar(2.0 * x1));
    }
    let e = parse_field_expr("exp(-2*nu*t)*sin(x1)").unwrap();
    let d = differentiate(&e, Wrt::T);
    let p = pt(0.4, [0.9, 0.0, 0.0]);
    let got = evaluate(&d, &p, &bindings()).unwrap().as_scalar().unwrap();
    let want = -2.0 * 0.3 * (-2.0f64 * 0.3 * 0.4).exp() * 0.9f64.sin();
    assert!((got - want).abs() < 1e-15);
    let lap = parse_field_expr("div(grad(norm(x)^2))").unwrap();
    let v = evaluate(&lap, &pt(0.0, [0.3, -0.2, 0.8]), &Bindings::new()).unwrap().as_scalar().unwrap();
    assert!((v - 6.0).abs() < 1e-13);
}

#[test]
fn reports_unbound_symbols_and_singular_points() {
    let e = parse_field_expr("kappa * norm(x)").unwrap();
    assert_eq!(evaluate(&e, &pt(0.0, [1.0, 0.0, 0.0]), &Bindings::new()), Err(EvalError::UnboundSymbol("kappa".into())));
    let g = parse_field_expr("grad(norm(x))").unwrap();
    assert!(matches!(evaluate(&g, &pt(0.0, [0.0; 3]), &Bindings::new()), Err(EvalError::Singular { .. })));
    let mut b = Bindings::new();
    b.insert("kappa".into(), TensorValue::Vector(Vector3::zeros()));
    assert!(matches!(evaluate(&e, &pt(0.0, [1.0, 0.0, 0.0]), &b), Err(EvalError::BindingShape { .. })));
}

/// Library of expressions covering every operator and scalar function.
const LIBRARY: &[&str] = &[
    "norm(x)",
    "exp(-dot(x, x))",
    "sin(x1)*cos(x2)*exp(-2*nu*t)",
    "vec(sin(x1)*cos(x2), -cos(x1)*sin(x2), 0)*exp(-2*nu*t)",
    "0.25*(cos(2*x1) + cos(2*x2))*exp(-4*nu*t)",
    "x / norm(x)",
    "outer(x, w) * t + M * sin(t)",
    "transpose(outer(vec(x2, x3, x1), x))",
    "log(2 + sin(x1*x2)) + sqrt(1 + x3^2) + abs(x1 + 2)",
    "pow(1.5 + cos(x3), 1 + x1^2)",
    "comp(outer(x, w), 2, 3) + comp(M * x, 1)",
    "mat(x1, x2, x3, t, 1, x1*x2, sin(x3), 0, cos(t))",
    "dot(M, outer(x, x)) / (3 + norm(x))",
    "grad(sin(x1)*x2*x3) * t",
    "lap(vec(x1^3, x2*x3^2, exp(x1)))",
    "div(outer(x, x) * t)",
    "dt(exp(-a*t) * x)",
    "(x - w) * a^2 / norm(x - w)",
];

fn fd_derivative(e: &CompiledExpr, p: &SpaceTimePoint, wrt: Wrt, b: &Bindings) -> Option<TensorValue> {
    let h = 1e-6;
    let (mut pp, mut pm) = (*p, *p);
    match wrt {
        Wrt::X(i) => {
            pp.x[i] += h;
            pm.x[i] -= h;
        }
        Wrt::T => {
            pp.t += h;
            pm.t -= h;
        }
    }
    let (fp, fm) = (e.eval(&pp, b).ok()?, e.eval(&pm, b).ok()?);
    Some(fp.sub(&fm).unwrap().scale(0.5 / h))
}

#[test]
fn analytic_derivatives_match_central_differences() {
    let b = bindings();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0FFEE);
    let points: Vec<SpaceTimePoint> = (0..1000)
        .map(|_| {
            let x = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            pt(rng.random_range(0.0..1.0), x.into())
        })
        .filter(|p| p.x.norm() > 0.1 && (p.x - Vector3::new(0.2, -0.4, 0.9)).norm() > 0.1)
        .collect();
    assert!(points.len() > 900);
    for src in LIBRARY {
        let e = parse_with(src, &table()).unwrap();
        let f = CompiledExpr::new(&e);
        for wrt in [Wrt::X(0), Wrt::X(1), Wrt::X(2), Wrt::T] {
            let d = CompiledExpr::new(&differentiate(&e, wrt));
            for p in &points {
                let exact = d.eval(p, &b).unwrap();
                let approx = fd_derivative(&f, p, wrt, &b).unwrap();
                let err = exact.max_abs_diff(&approx);
                let scale = exact.max_abs().max(1.0);
                assert!(err / scale < 1e-6, "{src} d/{wrt:?} at {p:?}: {exact:?} vs {approx:?}");
            }
        }
    }
}

#[test]
fn library_round_trips_through_the_printer() {
    for src in LIBRARY {
        let e = parse_with(src, &table()).unwrap();
        let printed = e.to_string();
        let again = parse_with(&printed, &table()).unwrap();
        assert_eq!(again, e, "{src} -> {printed}");
        // Expanded derivative trees round-trip as well.
        let d = differentiate(&e, Wrt::X(1));
        assert_eq!(parse_with(&d.to_string(), &table()).unwrap(), d);
    }
}

#[test]
fn simplification_keeps_trees_small() {
    let e = parse_field_expr("x1 * 1 + 0 * sin(x2) - 0").unwrap();
    assert_eq!(e.to_string(), "x1");
    let d = differentiate(&parse_field_expr("sin(t) * x").unwrap(), Wrt::X(0));
    assert_eq!(d.to_string(), "(sin(t) * vec(1.0, 0.0, 0.0))");
}

/// Random well-shaped trees for fuzzing.
fn random_expr(rng: &mut ChaCha8Rng, shape: Shape, depth: u32) -> FieldExpr {
    let leaf = depth == 0 || rng.random_bool(0.25);
    let s = |rng: &mut ChaCha8Rng, d| random_expr(rng, Shape::Scalar, d);
    let v = |rng: &mut ChaCha8Rng, d| random_expr(rng, Shape::Vec3, d);
    let m = |rng: &mut ChaCha8Rng, d| random_expr(rng, Shape::Mat3, d);
    let d = depth.saturating_sub(1);
    let r = match shape {
        Shape::Scalar if leaf => match rng.random_range(0..4) {
            0 => Ok(FieldExpr::scalar((rng.random_range(-20..20) as f64) / 8.0)),
            1 => Ok(FieldExpr::coord_component(rng.random_range(0..3))),
            2 => Ok(FieldExpr::time()),
            _ => Ok(FieldExpr::symbol("a", Shape::Scalar)),
        },
        Shape::Scalar => match rng.random_range(0..9) {
            0 => FieldExpr::func([Func::Sin, Func::Cos][rng.random_range(0..2)], &s(rng, d)),
            1 => {
                let a = s(rng, d);
                FieldExpr::add(&a, &s(rng, d))
            }
            2 => {
                let a = s(rng, d);
                FieldExpr::mul(&a, &s(rng, d))
            }
            3 => {
                let a = v(rng, d);
                FieldExpr::dot(&a, &v(rng, d))
            }
            4 => FieldExpr::component(&v(rng, d), rng.random_range(0..3), None),
            5 => FieldExpr::component(&m(rng, d), rng.random_range(0..3), Some(rng.random_range(0..3))),
            6 => {
                let den = FieldExpr::add(&FieldExpr::scalar(2.5), &FieldExpr::func(Func::Cos, &s(rng, d)).unwrap());
                FieldExpr::div(&s(rng, d), &den.unwrap())
            }
            7 => Ok(FieldExpr::neg(&s(rng, d))),
            _ => FieldExpr::func(Func::Exp, &FieldExpr::func(Func::Sin, &s(rng, d)).unwrap()),
        },
        Shape::Vec3 if leaf => match rng.random_range(0..3) {
            0 => Ok(FieldExpr::coord()),
            1 => Ok(FieldExpr::vector(Vector3::new(1.0, -0.5, 0.25))),
            _ => Ok(FieldExpr::symbol("w", Shape::Vec3)),
        },
        Shape::Vec3 => match rng.random_range(0..6) {
            0 => {
                let a = v(rng, d);
                FieldExpr::sub(&a, &v(rng, d))
            }
            1 => {
                let a = s(rng, d);
                FieldExpr::mul(&a, &v(rng, d))
            }
            2 => {
                let a = m(rng, d);
                FieldExpr::mul(&a, &v(rng, d))
            }
            3 => FieldExpr::vec_build([s(rng, d), s(rng, d), s(rng, d)]),
            4 => FieldExpr::grad(&s(rng, d.min(2))),
            _ => FieldExpr::divergence(&m(rng, d.min(2))),
        },
        Shape::Mat3 if leaf => match rng.random_range(0..2) {
            0 => Ok(FieldExpr::matrix(Matrix3::new(1.0, 2.0, 0.0, -1.0, 0.5, 0.0, 0.0, 0.0, 3.0))),
            _ => Ok(FieldExpr::symbol("M", Shape::Mat3)),
        },
        Shape::Mat3 => match rng.random_range(0..5) {
            0 => {
                let a = v(rng, d);
                FieldExpr::outer(&a, &v(rng, d))
            }
            1 => FieldExpr::transpose(&m(rng, d)),
            2 => {
                let a = m(rng, d);
                FieldExpr::mul(&a, &m(rng, d))
            }
            3 => FieldExpr::grad(&v(rng, d.min(2))),
            _ => Ok(FieldExpr::laplacian(&m(rng, d.min(2)))),
        },
    };
    r.expect("generator only builds well-shaped nodes")
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn print_then_parse_is_identity(seed in any::<u64>(), depth in 0u32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [Shape::Scalar, Shape::Vec3, Shape::Mat3][(seed % 3) as usize];
        let e = random_expr(&mut rng, shape, depth);
        let again = parse_with(&e.to_string(), &table()).unwrap();
        prop_assert_eq!(again, e);
    }

    #[test]
    fn evaluation_respects_declared_shapes(seed in any::<u64>(), depth in 0u32..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let shape = [Shape::Scalar, Shape::Vec3, Shape::Mat3][(seed % 3) as usize];
        let e = random_expr(&mut rng, shape, depth);
        let p = pt(rng.random_range(0.0..1.0), [rng.random_range(-1.0..1.0), 0.4, -0.3]);
        match evaluate(&e, &p, &bindings()) {
            Ok(v) => {
                prop_assert_eq!(v.shape(), e.shape());
                prop_assert_eq!(v.components().len(), [1, 3, 9][e.shape() as usize]);
            }
            Err(EvalError::NonFinite { .. }) | Err(EvalError::Singular { .. }) => {}
            Err(other) => prop_assert!(false, "unexpected error {other}"),
        }
        // Differentiation is total: the derivative tree always builds and keeps its shape.
        prop_assert_eq!(differentiate(&e, Wrt::X(0)).shape(), e.shape());
    }
}
