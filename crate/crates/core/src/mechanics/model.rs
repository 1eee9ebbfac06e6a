//! Force laws `F(x, xdot, t; x0r, v0r, t0r)` for a single particle.

use std::collections::BTreeMap;

use nalgebra::Vector3;

use super::MechanicsError;
use crate::expr::{build, parse_with, substitute, Bindings, CompiledExpr, FieldExpr, Node, Shape, SymbolTable, TensorValue};
use crate::frames::GalileiSpec;

/// Symbol of the particle velocity in force expressions.
pub const VELOCITY: &str = "v";
/// Invariant arguments available to the scalar coefficients of an invariant model.
pub const INVARIANTS: [&str; 4] = ["dist", "speed", "radial", "elapsed"];

/// Reference values of the system. The reference point moves along
/// `x0r + x0r_rate t`, which keeps the family closed under Galilei maps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct References {
    pub x0r: Vector3<f64>,
    pub x0r_rate: Vector3<f64>,
    pub v0r: Vector3<f64>,
    pub t0r: f64,
}

impl Default for References {
    fn default() -> Self {
        Self { x0r: Vector3::zeros(), x0r_rate: Vector3::zeros(), v0r: Vector3::zeros(), t0r: 0.0 }
    }
}

impl References {
    pub fn at_rest(x0r: Vector3<f64>) -> Self {
        Self { x0r, ..Self::default() }
    }

    pub fn point(&self, t: f64) -> Vector3<f64> {
        self.x0r + self.x0r_rate * t
    }

    /// References seen from the frame `x' = R x + v t + c`, `t' = t + tau`.
    pub fn transported(&self, g: &GalileiSpec) -> Self {
        let rate = g.r * self.x0r_rate + g.v;
        Self { x0r: g.r * self.x0r + g.c - rate * g.tau, x0r_rate: rate, v0r: g.r * self.v0r + g.v, t0r: self.t0r + g.tau }
    }
}

/// Named closed-form models, kept for checks that need their parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ModelKind {
    Oscillator { kappa: f64 },
    DragGravity { a: f64, g: f64 },
    Invariant,
    Custom,
}

/// Result of the structural check on a force expression.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Structure {
    /// Built from differences to the references and their invariants only.
    Invariant,
    /// Depends on an absolute position, velocity, time or direction.
    Absolute(String),
}

#[derive(Clone, Debug)]
pub struct ForceModel {
    pub kind: ModelKind,
    /// Vector force over `x`, `t`, `v`, `x0r`, `v0r`, `t0r` and the scalar parameters.
    pub force: FieldExpr,
    pub params: BTreeMap<String, f64>,
    pub refs: References,
    pub mass: f64,
    compiled: CompiledExpr,
}

impl PartialEq for ForceModel {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
            && self.force == other.force
            && self.params == other.params
            && self.refs == other.refs
            && self.mass == other.mass
    }
}

fn table() -> SymbolTable {
    SymbolTable::standard().with(VELOCITY, Shape::Vec3).with("x0r", Shape::Vec3).with("v0r", Shape::Vec3)
}

fn dx() -> FieldExpr {
    build::sub(&FieldExpr::coord(), &FieldExpr::symbol("x0r", Shape::Vec3))
}

fn dv() -> FieldExpr {
    build::sub(&FieldExpr::symbol(VELOCITY, Shape::Vec3), &FieldExpr::symbol("v0r", Shape::Vec3))
}

fn dt() -> FieldExpr {
    build::sub(&FieldExpr::time(), &FieldExpr::symbol("t0r", Shape::Scalar))
}

fn parse(text: &str) -> Result<FieldExpr, MechanicsError> {
    parse_with(text, &table()).map_err(|e| MechanicsError::InvalidModel(format!("`{text}`: {e}")))
}

impl ForceModel {
    /// Any vector force expression.
    pub fn custom(force: FieldExpr, refs: References, mass: f64, params: BTreeMap<String, f64>) -> Result<Self, MechanicsError> {
        if force.shape() != Shape::Vec3 {
            return Err(MechanicsError::InvalidModel(format!("force must be vec3, found {}", force.shape())));
        }
        if force.contains_derivatives() {
            return Err(MechanicsError::InvalidModel("force may not contain derivatives".into()));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return Err(MechanicsError::InvalidModel(format!("mass must be positive, found {mass}")));
        }
        for (name, shape) in force.symbols() {
            let known = matches!(name.as_str(), "v" | "x0r" | "v0r" | "t0r") || params.contains_key(&name);
            if !known {
                return Err(MechanicsError::InvalidModel(format!("unknown symbol `{name}`")));
            }
            if params.contains_key(&name) && shape != Shape::Scalar {
                return Err(MechanicsError::InvalidModel(format!("parameter `{name}` must be scalar")));
            }
        }
        let compiled = CompiledExpr::new(&force);
        Ok(Self { kind: ModelKind::Custom, force, params, refs, mass, compiled })
    }

    pub fn parse_custom(text: &str, refs: References, mass: f64, params: BTreeMap<String, f64>) -> Result<Self, MechanicsError> {
        Self::custom(parse(text)?, refs, mass, params)
    }

    /// `F = f1 (x - x0r) + f2 (v - v0r)` with `f1`, `f2` over the symbols
    /// `dist`, `speed`, `radial`, `elapsed` and scalar parameters.
    pub fn invariant(
        f1: &FieldExpr,
        f2: &FieldExpr,
        refs: References,
        mass: f64,
        params: BTreeMap<String, f64>,
    ) -> Result<Self, MechanicsError> {
        for f in [f1, f2] {
            if f.shape() != Shape::Scalar || f.depends_on_coord() || f.depends_on_time() {
                return Err(MechanicsError::InvalidModel(format!("coefficient `{f}` must be a scalar of the invariants")));
            }
        }
        let map: BTreeMap<String, FieldExpr> =
            [("dist", build::norm(&dx())), ("speed", build::norm(&dv())), ("radial", build::dot(&dx(), &dv())), ("elapsed", dt())]
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect();
        let s = |f: &FieldExpr| substitute(f, &map).map_err(|e| MechanicsError::InvalidModel(e.to_string()));
        let force = build::add(&build::mul(&s(f1)?, &dx()), &build::mul(&s(f2)?, &dv()));
        let mut m = Self::custom(force, refs, mass, params)?;
        m.kind = ModelKind::Invariant;
        Ok(m)
    }

    pub fn parse_invariant(f1: &str, f2: &str, refs: References, mass: f64, params: BTreeMap<String, f64>) -> Result<Self, MechanicsError> {
        let t = INVARIANTS.iter().fold(SymbolTable::standard(), |t, n| t.with(n, Shape::Scalar));
        let p = |s: &str| parse_with(s, &t).map_err(|e| MechanicsError::InvalidModel(format!("`{s}`: {e}")));
        Self::invariant(&p(f1)?, &p(f2)?, refs, mass, params)
    }

    /// Hooke's law `F = -kappa (x - x0r)`.
    pub fn oscillator(kappa: f64, mass: f64, refs: References) -> Result<Self, MechanicsError> {
        let params = BTreeMap::from([("kappa".to_string(), kappa)]);
        let mut m = Self::parse_invariant("-kappa", "0", refs, mass, params)?;
        m.kind = ModelKind::Oscillator { kappa };
        Ok(m)
    }

    /// Gravity towards `x0r` with linear drag relative to the wind `v0r`.
    pub fn drag_gravity(a: f64, g: f64, mass: f64, refs: References) -> Result<Self, MechanicsError> {
        let params = BTreeMap::from([("a".to_string(), a), ("g".to_string(), g), ("m".to_string(), mass)]);
        let mut m = Self::parse_invariant("-m*g/dist", "-a", refs, mass, params)?;
        m.kind = ModelKind::DragGravity { a, g };
        Ok(m)
    }

    /// Far-field drag-gravity defaults: `a = m = g = 1`, centre at `(0, 0, -1e6)`, no wind.
    pub fn drag_gravity_default() -> Self {
        Self::drag_gravity(1.0, 1.0, 1.0, References::at_rest(Vector3::new(0.0, 0.0, -1e6))).expect("valid defaults")
    }

    /// The same force law with different references.
    pub fn with_refs(&self, refs: References) -> Self {
        Self { refs, ..self.clone() }
    }

    pub fn bindings(&self, t: f64, v: &Vector3<f64>) -> Bindings {
        let mut b: Bindings = self.params.iter().map(|(k, x)| (k.clone(), TensorValue::Scalar(*x))).collect();
        b.insert(VELOCITY.into(), TensorValue::Vector(*v));
        b.insert("x0r".into(), TensorValue::Vector(self.refs.point(t)));
        b.insert("v0r".into(), TensorValue::Vector(self.refs.v0r));
        b.insert("t0r".into(), TensorValue::Scalar(self.refs.t0r));
        b
    }

    pub fn force(&self, t: f64, x: &Vector3<f64>, v: &Vector3<f64>) -> Result<Vector3<f64>, MechanicsError> {
        let pt = crate::expr::SpaceTimePoint::new(t, *x);
        self.compiled
            .eval(&pt, &self.bindings(t, v))
            .ok()
            .and_then(|f| f.as_vector())
            .filter(|f| f.iter().all(|c| c.is_finite()))
            .ok_or(MechanicsError::Singular { t })
    }

    /// Structural check: positions, velocities and times may enter only as
    /// differences to the references, and those only through norms, mutual
    /// dot products or as the direction of a term.
    pub fn structure(&self) -> Structure {
        match vector_term(&self.force) {
            Ok(()) => Structure::Invariant,
            Err(reason) => Structure::Absolute(reason),
        }
    }
}

fn is_sym(e: &FieldExpr, name: &str) -> bool {
    matches!(e.node(), Node::Symbol(s) if s == name)
}

fn is_velocity(e: &FieldExpr) -> bool {
    is_sym(e, VELOCITY)
}

/// `x - x0r` or `v - v0r`.
fn is_difference(e: &FieldExpr) -> bool {
    match e.node() {
        Node::Sub(a, b) => (matches!(a.node(), Node::Coord) && is_sym(b, "x0r")) || (is_velocity(a) && is_sym(b, "v0r")),
        _ => false,
    }
}

fn absolute_free(e: &FieldExpr) -> bool {
    !e.depends_on_coord() && !e.depends_on_time() && !e.any(&|n| is_velocity(n))
}

fn scalar_term(e: &FieldExpr) -> Result<(), String> {
    if absolute_free(e) {
        return if e.any(&|n| is_sym(n, "x0r") || is_sym(n, "v0r") || is_sym(n, "t0r")) {
            Err(format!("`{e}` uses a reference value on its own"))
        } else {
            Ok(())
        };
    }
    match e.node() {
        Node::Norm(d) if is_difference(d) => Ok(()),
        Node::Dot(a, b) if is_difference(a) && is_difference(b) => Ok(()),
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

fn vector_term(e: &FieldExpr) -> Result<(), String> {
    if e.is_zero() || is_difference(e) {
        return Ok(());
    }
    match e.node() {
        Node::Add(a, b) | Node::Sub(a, b) => {
            vector_term(a)?;
            vector_term(b)
        }
        Node::Neg(a) => vector_term(a),
        Node::Mul(a, b) if a.shape() == Shape::Scalar => {
            scalar_term(a)?;
            vector_term(b)
        }
        Node::Mul(a, b) if b.shape() == Shape::Scalar => {
            vector_term(a)?;
            scalar_term(b)
        }
        Node::Div(a, b) => {
            vector_term(a)?;
            scalar_term(b)
        }
        _ => Err(format!("`{e}` has an absolute direction or position")),
    }
}
