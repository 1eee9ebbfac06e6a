//! Five-term closure for the divergence of the Reynolds stress and its
//! screening against the decomposed symmetries.
//!
//! `div tau = phi1 (x - x0r) + phi2 (u - u0r) + phi3 (grad u + grad u^T)(x - x0r)
//!          + phi4 (grad u)(u - u0r) + phi5 lap u`, with `u` the mean velocity.

use std::collections::BTreeMap;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::{rules, NsError};
use crate::checks::{Leg, GENERIC_VELOCITY};
use crate::expr::{
    build, parse_field_expr, parse_with, substitute, Bindings, CompiledExpr, FieldExpr, Node, Shape, SpaceTimePoint, SymbolTable,
    TensorValue,
};
use crate::frames::{transform_field, FrameTransform, NsSymmetrySpec, Viscosity};
use crate::sampling::MIN_VALID_POINTS;

/// Mean-velocity symbol in the coefficient expressions.
pub const MEAN_VELOCITY: &str = "u";
/// Indicator of three-dimensional flow: 1 in 3D, 0 in the planar limit.
pub const DIM_INDICATOR: &str = "d3";
/// Symbols every coefficient may use besides the scalar parameters.
pub const CLOSURE_SYMBOLS: [&str; 6] = ["u", "x0r", "u0r", "t0r", "nu", "d3"];

/// Offset added to `u0r` when probing the planar-limit velocity dependence.
const U0R_PROBE: [f64; 3] = [0.7, -0.4, 0.5];

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClosureRefs {
    pub t0r: f64,
    #[serde(with = "crate::expr::vec3_serde")]
    pub x0r: Vector3<f64>,
    #[serde(with = "crate::expr::vec3_serde")]
    pub u0r: Vector3<f64>,
}

impl Default for ClosureRefs {
    fn default() -> Self {
        Self { t0r: -2.0, x0r: Vector3::new(2.0, 2.0, 2.0), u0r: Vector3::zeros() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClosureModel {
    pub phi: [FieldExpr; 5],
    pub params: BTreeMap<String, f64>,
    pub refs: ClosureRefs,
    pub nu: f64,
    /// Mean velocity used when screening; any smooth field will do.
    pub mean: FieldExpr,
}

fn table() -> SymbolTable {
    SymbolTable::standard()
}

fn sym(name: &str, shape: Shape) -> FieldExpr {
    FieldExpr::symbol(name, shape)
}

fn dx() -> FieldExpr {
    build::sub(&FieldExpr::coord(), &sym("x0r", Shape::Vec3))
}

fn du() -> FieldExpr {
    build::sub(&sym(MEAN_VELOCITY, Shape::Vec3), &sym("u0r", Shape::Vec3))
}

impl ClosureModel {
    pub fn new(phi: [FieldExpr; 5], params: BTreeMap<String, f64>, refs: ClosureRefs, nu: f64) -> Result<Self, NsError> {
        for (i, f) in phi.iter().enumerate() {
            if f.shape() != Shape::Scalar {
                return Err(NsError::InvalidModel(format!("phi{} must be scalar, found {}", i + 1, f.shape())));
            }
            for (name, shape) in f.symbols() {
                if CLOSURE_SYMBOLS.contains(&name.as_str()) {
                    continue;
                }
                match params.get(&name) {
                    Some(_) if shape == Shape::Scalar => {}
                    Some(_) => return Err(NsError::InvalidModel(format!("parameter `{name}` must be scalar"))),
                    None => return Err(NsError::InvalidModel(format!("phi{}: unknown symbol `{name}`", i + 1))),
                }
            }
        }
        if let Some(k) = params.keys().find(|k| CLOSURE_SYMBOLS.contains(&k.as_str())) {
            return Err(NsError::InvalidModel(format!("parameter `{k}` shadows a closure symbol")));
        }
        if !nu.is_finite() {
            return Err(NsError::InvalidModel(format!("viscosity must be finite, found {nu}")));
        }
        let mean = parse_field_expr(GENERIC_VELOCITY).expect("generic velocity parses");
        Ok(Self { phi, params, refs, nu, mean })
    }

    /// Parse the five coefficients from the expression language.
    pub fn parse(phi: [&str; 5], params: BTreeMap<String, f64>, refs: ClosureRefs, nu: f64) -> Result<Self, NsError> {
        let mut out = Vec::with_capacity(5);
        for (i, text) in phi.iter().enumerate() {
            let e = parse_with(text, &table()).map_err(|e| NsError::InvalidModel(format!("phi{}: `{text}`: {e}", i + 1)))?;
            out.push(e);
        }
        let phi: [FieldExpr; 5] = out.try_into().expect("five slots");
        Self::new(phi, params, refs, nu)
    }

    /// A model satisfying every row of the restriction table:
    /// `c1/(t-t0r)^2`, `c2 d3 nu/|x-x0r|^2`, `c3/(t-t0r)`, `c4 d3`, `c5 nu`.
    pub fn compliant() -> Self {
        let params = BTreeMap::from([("c1", 0.3), ("c2", 0.5), ("c3", -0.4), ("c4", 0.2), ("c5", 0.7)].map(|(k, v)| (k.to_string(), v)));
        Self::parse(["c1/(t - t0r)^2", "c2*d3*nu/norm(x - x0r)^2", "c3/(t - t0r)", "c4*d3", "c5*nu"], params, ClosureRefs::default(), 0.1)
            .expect("compliant model is valid")
    }

    pub fn with_mean(mut self, mean: FieldExpr) -> Result<Self, NsError> {
        if mean.shape() != Shape::Vec3 || mean.has_symbols() {
            return Err(NsError::InvalidModel("mean velocity must be a vec3 field of x and t".into()));
        }
        self.mean = mean;
        Ok(self)
    }

    /// `true` when some coefficient refers to the dimension indicator.
    pub fn declares_planar_limit(&self) -> bool {
        self.phi.iter().any(|f| f.any(&|n| matches!(n.node(), Node::Symbol(s) if s == DIM_INDICATOR)))
    }

    /// The five-term expression over the symbol `u`.
    pub fn assembled(&self) -> FieldExpr {
        let u = sym(MEAN_VELOCITY, Shape::Vec3);
        let g = build::grad(&u);
        let [p1, p2, p3, p4, p5] = &self.phi;
        build::sum(
            [
                build::mul(p1, &dx()),
                build::mul(p2, &du()),
                build::mul(p3, &build::mul(&build::add(&g, &build::transpose(&g)), &dx())),
                build::mul(p4, &build::mul(&g, &du())),
                build::mul(p5, &FieldExpr::laplacian(&u)),
            ],
            Shape::Vec3,
        )
    }

    /// Structural check: `x`, `u` and `t` enter only through `x - x0r`,
    /// `u - u0r`, `t - t0r` and `lap u`, and vectors only through norms and
    /// mutual dot products.
    pub fn structure(&self) -> Result<(), String> {
        for (i, f) in self.phi.iter().enumerate() {
            scalar_term(f).map_err(|r| format!("phi{}: {r}", i + 1))?;
        }
        Ok(())
    }

    fn bindings(&self, refs: &ClosureRefs, nu: f64, d3: f64) -> Bindings {
        let mut b: Bindings = self.params.iter().map(|(k, v)| (k.clone(), TensorValue::Scalar(*v))).collect();
        b.insert("x0r".into(), TensorValue::Vector(refs.x0r));
        b.insert("u0r".into(), TensorValue::Vector(refs.u0r));
        b.insert("t0r".into(), TensorValue::Scalar(refs.t0r));
        b.insert("nu".into(), TensorValue::Scalar(nu));
        b.insert(DIM_INDICATOR.into(), TensorValue::Scalar(d3));
        b
    }
}

fn is_sym(e: &FieldExpr, name: &str) -> bool {
    matches!(e.node(), Node::Symbol(s) if s == name)
}

fn is_objective_vector(e: &FieldExpr) -> bool {
    match e.node() {
        Node::Sub(a, b) => (matches!(a.node(), Node::Coord) && is_sym(b, "x0r")) || (is_sym(a, MEAN_VELOCITY) && is_sym(b, "u0r")),
        Node::Laplacian(a) => is_sym(a, MEAN_VELOCITY),
        _ => false,
    }
}

fn scalar_term(e: &FieldExpr) -> Result<(), String> {
    let absolute = e.depends_on_coord() || e.depends_on_time() || e.any(&|n| is_sym(n, MEAN_VELOCITY));
    if !absolute {
        return if e.any(&|n| is_sym(n, "x0r") || is_sym(n, "u0r") || is_sym(n, "t0r")) {
            Err(format!("`{e}` uses a reference value on its own"))
        } else {
            Ok(())
        };
    }
    match e.node() {
        Node::Norm(d) if is_objective_vector(d) => Ok(()),
        Node::Dot(a, b) if is_objective_vector(a) && is_objective_vector(b) => Ok(()),
        Node::Sub(a, b) if matches!(a.node(), Node::Time) && is_sym(b, "t0r") => Ok(()),
        Node::Func(_, a) | Node::Neg(a) => scalar_term(a),
        Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) | Node::Pow(a, b)
            if a.shape() == Shape::Scalar && b.shape() == Shape::Scalar =>
        {
            scalar_term(a)?;
            scalar_term(b)
        }
        _ => Err(format!("`{e}` is not built from relative invariants")),
    }
}

/// Restriction-table factors `phi~_i = f_i phi_i`; `None` where the table
/// has no row.
pub fn restriction_factors(spec: &NsSymmetrySpec) -> Option<[f64; 5]> {
    match spec {
        NsSymmetrySpec::S1 { eps } => {
            let (e2, e4) = ((-2.0 * eps).exp(), (-4.0 * eps).exp());
            Some([e4, e2, e2, 1.0, 1.0])
        }
        NsSymmetrySpec::S3 { .. } => Some([1.0; 5]),
        NsSymmetrySpec::S4 => Some([1.0, -1.0, -1.0, 1.0, -1.0]),
        NsSymmetrySpec::S5 { a } => Some([1.0, 1.0, 1.0, 1.0, (2.0 * a).exp()]),
        NsSymmetrySpec::G(_) | NsSymmetrySpec::S2 { .. } | NsSymmetrySpec::S6 { .. } => None,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureRow {
    pub symmetry: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factors: Option<[f64; 5]>,
    /// Largest relative deviation from the restriction-table rescaling.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_residual: Option<f64>,
    /// Largest relative deviation of the assembled expression from the
    /// stress-divergence rule.
    pub assembled_residual: f64,
    pub leg: Leg,
    pub valid_points: usize,
}

/// Behaviour in the planar limit `d3 = 0`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlanarLimit {
    pub declared: bool,
    pub max_phi2: f64,
    pub max_phi4: f64,
    /// Change of `phi1`, `phi3`, `phi5` when `u0r` is shifted.
    pub velocity_dependence: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leg: Option<Leg>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureReport {
    /// `None` when the structural check passes, else the offending term.
    pub structural_violation: Option<String>,
    pub rows: Vec<ClosureRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planar_limit: Option<PlanarLimit>,
}

impl ClosureReport {
    pub fn row(&self, tag: &str) -> Option<&ClosureRow> {
        self.rows.iter().find(|r| r.symmetry == tag)
    }

    pub fn all_pass(&self) -> bool {
        self.structural_violation.is_none()
            && self.rows.iter().all(|r| r.leg.pass)
            && self.planar_limit.as_ref().is_none_or(|l| l.leg.is_none_or(|l| l.pass))
    }
}

struct Compiled {
    phi: Vec<CompiledExpr>,
    div: CompiledExpr,
}

fn compile(model: &ClosureModel, mean: &FieldExpr) -> Result<Compiled, NsError> {
    let map = BTreeMap::from([(MEAN_VELOCITY.to_string(), mean.clone())]);
    let s = |e: &FieldExpr| substitute(e, &map).map(|e| CompiledExpr::new(&e)).map_err(NsError::from);
    Ok(Compiled { phi: model.phi.iter().map(s).collect::<Result<_, _>>()?, div: s(&model.assembled())? })
}

fn scalar(c: &CompiledExpr, pt: &SpaceTimePoint, b: &Bindings) -> Option<f64> {
    c.eval(pt, b).ok()?.as_scalar()
}

fn vector(c: &CompiledExpr, pt: &SpaceTimePoint, b: &Bindings) -> Option<Vector3<f64>> {
    c.eval(pt, b).ok()?.as_vector()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1.0 + b.abs())
}

fn screen_row(model: &ClosureModel, spec: &NsSymmetrySpec, points: &[SpaceTimePoint], tol: f64) -> Result<ClosureRow, NsError> {
    let frame = FrameTransform::Symmetry(spec.clone());
    let field_rules = frame.field_rules(None)?;
    let mean_new = transform_field(&model.mean, &frame, &field_rules.velocity)?;
    let nu_new = match (field_rules.viscosity, spec) {
        (Viscosity::Flip, _) => -model.nu,
        (Viscosity::Inviscid, NsSymmetrySpec::S5 { a }) => (2.0 * a).exp() * model.nu,
        _ => model.nu,
    };
    let old = compile(model, &model.mean)?;
    let new = compile(model, &mean_new)?;
    let factors = restriction_factors(spec);
    let r = &model.refs;
    let b_old = model.bindings(r, model.nu, 1.0);
    let (mut phi_res, mut div_res, mut valid) = (0.0f64, 0.0f64, 0usize);
    for p in points {
        let (tn, xn) = spec.map(p.t, &p.x);
        let pn = SpaceTimePoint::new(tn, xn);
        let refs_new = ClosureRefs {
            t0r: spec.map(r.t0r, &Vector3::zeros()).0,
            x0r: spec.map(p.t, &r.x0r).1,
            u0r: rules::velocity(spec, p.t, &r.x0r, &r.u0r),
        };
        let b_new = model.bindings(&refs_new, nu_new, 1.0);
        let row = (|| {
            let mut worst = 0.0f64;
            if let Some(f) = factors {
                for (i, fi) in f.iter().enumerate() {
                    worst = worst.max(rel(scalar(&new.phi[i], &pn, &b_new)?, fi * scalar(&old.phi[i], p, &b_old)?));
                }
            }
            let d_old = vector(&old.div, p, &b_old)?;
            let d_new = vector(&new.div, &pn, &b_new)?;
            let (m, k) = rules::stress_divergence_factor(spec, p.t);
            let expected = k * m * d_old;
            Some((worst, (d_new - expected).amax() / (1.0 + expected.amax())))
        })();
        if let Some((a, b)) = row {
            valid += 1;
            phi_res = phi_res.max(a);
            div_res = div_res.max(b);
        }
    }
    if valid < MIN_VALID_POINTS {
        return Err(NsError::Undefined { symmetry: spec.tag().to_string(), valid, required: MIN_VALID_POINTS });
    }
    let phi_residual = factors.map(|_| phi_res);
    Ok(ClosureRow {
        symmetry: spec.tag().to_string(),
        factors,
        phi_residual,
        assembled_residual: div_res,
        leg: Leg::new(div_res.max(phi_residual.unwrap_or(0.0)), tol),
        valid_points: valid,
    })
}

fn planar_limit(model: &ClosureModel, points: &[SpaceTimePoint], tol: f64) -> Result<PlanarLimit, NsError> {
    let c = compile(model, &model.mean)?;
    let shifted = ClosureRefs { u0r: model.refs.u0r + Vector3::from(U0R_PROBE), ..model.refs };
    let b = model.bindings(&model.refs, model.nu, 0.0);
    let bs = model.bindings(&shifted, model.nu, 0.0);
    let (mut p2, mut p4, mut dep, mut valid) = (0.0f64, 0.0f64, 0.0f64, 0usize);
    for p in points {
        let vals = (|| {
            let v: Vec<f64> = c.phi.iter().map(|f| scalar(f, p, &b)).collect::<Option<_>>()?;
            let w: Vec<f64> = c.phi.iter().map(|f| scalar(f, p, &bs)).collect::<Option<_>>()?;
            Some((v, w))
        })();
        let Some((v, w)) = vals else { continue };
        valid += 1;
        p2 = p2.max(v[1].abs());
        p4 = p4.max(v[3].abs());
        for i in [0, 2, 4] {
            dep = dep.max(rel(w[i], v[i]));
        }
    }
    if valid < MIN_VALID_POINTS {
        return Err(NsError::Undefined { symmetry: "S6".into(), valid, required: MIN_VALID_POINTS });
    }
    let declared = model.declares_planar_limit();
    Ok(PlanarLimit {
        declared,
        max_phi2: p2,
        max_phi4: p4,
        velocity_dependence: dep,
        leg: declared.then(|| Leg::new(p2.max(p4).max(dep), tol)),
    })
}

/// Screens a closure model against the given symmetries. S6 checks the planar
/// limit instead of a rescaling row.
pub fn screen_closure(
    model: &ClosureModel,
    specs: &[NsSymmetrySpec],
    points: &[SpaceTimePoint],
    tol: f64,
) -> Result<ClosureReport, NsError> {
    let mut rows = Vec::new();
    let mut planar = None;
    for spec in specs {
        match spec {
            NsSymmetrySpec::S6 { .. } => planar = Some(planar_limit(model, points, tol)?),
            _ => rows.push(screen_row(model, spec, points, tol)?),
        }
    }
    Ok(ClosureReport { structural_violation: model.structure().err(), rows, planar_limit: planar })
}
