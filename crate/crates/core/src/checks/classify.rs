//! Form-invariance, objectivity and relative objectivity of quantities.

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::quantity::{FieldLaw, FieldRole, ParamLaw, Quantity, SPIN_SYMBOL};
use super::CheckError;
use crate::expr::{build, rebuild, substitute, Bindings, CompiledExpr, FieldExpr, Node, Shape, SpaceTimePoint, TensorValue};
use crate::frames::{transform_field, velocity_rule_for, FrameTransform, VarianceRule, VelocityRule};
use crate::sampling::MIN_VALID_POINTS;

/// Default tolerance for PASS legs.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Residuals above this are unambiguous failures.
pub const FAIL_THRESHOLD: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectivityMode {
    Explicit,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Leg {
    pub pass: bool,
    pub residual: f64,
}

impl Leg {
    pub fn new(residual: f64, tol: f64) -> Self {
        Self { pass: residual <= tol, residual }
    }

    /// `true` when the leg fails by more than [`FAIL_THRESHOLD`].
    pub fn clear_fail(&self) -> bool {
        self.residual > FAIL_THRESHOLD
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LegReport {
    pub leg: Leg,
    /// Sample point (original frame) with the largest residual.
    pub witness: SpaceTimePoint,
    pub valid_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RelativeReport {
    /// Frame dependence: the quantity with and without the spin term.
    pub absolute: LegReport,
    /// Functional-form invariance between the two rotating frames.
    pub relative: LegReport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Verdict {
    pub quantity: String,
    pub transform: String,
    pub tensor: Leg,
    pub objective: Leg,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relative_objective: Option<Leg>,
    pub witness: SpaceTimePoint,
    pub tolerance: f64,
    pub mode: ObjectivityMode,
    pub valid_points: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Variant {
    Tensor,
    Objective(ObjectivityMode),
    /// Explicit objectivity with the spin term removed.
    SpinFree,
}

/// Expressions and per-point data for one quantity under one transform.
struct Setup<'a> {
    q: &'a Quantity,
    spec: &'a FrameTransform,
    old: CompiledExpr,
    rule_offset: Option<CompiledExpr>,
    field_offsets: BTreeMap<String, (f64, Option<CompiledExpr>)>,
}

fn field_rule(spec: &FrameTransform, law: &FieldLaw) -> VarianceRule {
    match law {
        FieldLaw::Rule(r) => r.clone(),
        FieldLaw::Velocity => match velocity_rule_for(spec) {
            VelocityRule::Coordinate(r) => r,
            VelocityRule::Listed { velocity, .. } => velocity,
        },
    }
}

/// Rewrite the definition into the transformed function of the tensor test:
/// constants, component selections and explicit coordinates are carried
/// along with the rule matrix `m`.
fn attach(def: &FieldExpr, m: &FieldExpr, x_old: &FieldExpr, t_old: &FieldExpr) -> FieldExpr {
    let mut memo: BTreeMap<usize, (FieldExpr, FieldExpr)> = BTreeMap::new();
    attach_rec(def, m, &build::transpose(m), x_old, t_old, &mut memo)
}

fn attach_rec(
    e: &FieldExpr,
    m: &FieldExpr,
    mt: &FieldExpr,
    x_old: &FieldExpr,
    t_old: &FieldExpr,
    memo: &mut BTreeMap<usize, (FieldExpr, FieldExpr)>,
) -> FieldExpr {
    let key = e.ptr();
    if let Some((_, r)) = memo.get(&key) {
        return r.clone();
    }
    let r = match e.node() {
        Node::Const(TensorValue::Vector(_)) => build::mul(m, e),
        Node::Const(TensorValue::Matrix(_)) => build::mul(&build::mul(m, e), mt),
        Node::Coord => build::mul(m, x_old),
        Node::Time => t_old.clone(),
        Node::Component(a, i, j) => {
            let a = attach_rec(a, m, mt, x_old, t_old, memo);
            match j {
                None => build::comp(&build::mul(mt, &a), *i, None),
                Some(j) => build::comp(&build::mul(&build::mul(mt, &a), m), *i, Some(*j)),
            }
        }
        Node::VecBuild(_) => build::mul(m, &rebuild(e, |c| attach_rec(c, m, mt, x_old, t_old, memo))),
        Node::MatBuild(_) => {
            let inner = rebuild(e, |c| attach_rec(c, m, mt, x_old, t_old, memo));
            build::mul(&build::mul(m, &inner), mt)
        }
        _ => rebuild(e, |c| attach_rec(c, m, mt, x_old, t_old, memo)),
    };
    memo.insert(key, (e.clone(), r.clone()));
    r
}

fn random_value(shape: Shape, rng: &mut ChaCha8Rng) -> TensorValue {
    let mut r = || rng.random_range(-1.0..1.0);
    match shape {
        Shape::Scalar => TensorValue::Scalar(r()),
        Shape::Vec3 => TensorValue::Vector(nalgebra::Vector3::from_fn(|_, _| r())),
        Shape::Mat3 => TensorValue::Matrix(Matrix3::from_fn(|_, _| r())),
    }
}

fn compile_offset(rule: &VarianceRule) -> Option<CompiledExpr> {
    rule.offset().map(CompiledExpr::new)
}

fn add(a: TensorValue, b: &TensorValue) -> TensorValue {
    a.sub(&b.scale(-1.0)).expect("offset shape checked")
}

impl<'a> Setup<'a> {
    fn new(q: &'a Quantity, spec: &'a FrameTransform) -> Result<Self, CheckError> {
        q.validate()?;
        let mut map = BTreeMap::new();
        for f in &q.fields {
            if let Some(e) = &f.expr {
                map.insert(f.name.clone(), e.clone());
            }
        }
        map.insert(SPIN_SYMBOL.to_string(), FieldExpr::matrix(q.spin));
        let old = CompiledExpr::new(&substitute(&q.definition, &map)?);
        let mut field_offsets = BTreeMap::new();
        for f in q.fields.iter().filter(|f| f.expr.is_none()) {
            let r = field_rule(spec, &f.law);
            field_offsets.insert(f.name.clone(), (r.multiplier, compile_offset(&r)));
        }
        Ok(Self { q, spec, old, rule_offset: compile_offset(&q.rule), field_offsets })
    }

    /// Transformed spin `M Omega M^T + Omega_R` in new coordinates.
    fn spin_tilde(&self) -> FieldExpr {
        let m = self.spec.rule_matrix_expr();
        let omega_r = self.spec.spin().unwrap_or_else(Matrix3::zeros);
        let conj = build::mul(&build::mul(&m, &FieldExpr::matrix(self.q.spin)), &build::transpose(&m));
        build::add(&conj, &FieldExpr::matrix(omega_r))
    }

    fn candidate(&self, v: Variant) -> Result<CompiledExpr, CheckError> {
        let mut map = BTreeMap::new();
        for f in &self.q.fields {
            let Some(e) = &f.expr else { continue };
            let transformed = match (v, f.role) {
                (Variant::Objective(ObjectivityMode::Full), _) => false,
                (Variant::Tensor, _) => true,
                (_, FieldRole::Inner) => true,
                (_, FieldRole::Specified) => false,
            };
            let r = if transformed { transform_field(e, self.spec, &field_rule(self.spec, &f.law))? } else { e.clone() };
            map.insert(f.name.clone(), r);
        }
        let spin = match v {
            Variant::SpinFree => FieldExpr::zero(Shape::Mat3),
            _ => self.spin_tilde(),
        };
        map.insert(SPIN_SYMBOL.to_string(), spin);
        let def = match v {
            Variant::Tensor => {
                let (ix, it) = self.spec.inverse_exprs();
                attach(&self.q.definition, &self.spec.rule_matrix_expr(), &ix, &it)
            }
            _ => self.q.definition.clone(),
        };
        Ok(CompiledExpr::new(&substitute(&def, &map)?))
    }

    /// Old and new bindings at sample point `k`.
    fn bindings(&self, k: usize, p: &SpaceTimePoint, pn: &SpaceTimePoint, v: Variant, seed: u64) -> Option<(Bindings, Bindings)> {
        let m = self.spec.rule_matrix(p.t);
        let (mut old, mut new) = (Bindings::new(), Bindings::new());
        for par in &self.q.params {
            let tv = match (par.law, v) {
                (ParamLaw::Constant, Variant::Tensor) => par.value.conjugate(&m),
                (ParamLaw::Constant, _) | (ParamLaw::Scalar, _) => par.value,
                (ParamLaw::Point, _) => {
                    let x = par.value.as_vector()?;
                    TensorValue::Vector(self.spec.map_point(&SpaceTimePoint::new(p.t, x)).x)
                }
                (ParamLaw::Vector | ParamLaw::Rank2, _) => par.value.conjugate(&m),
                (ParamLaw::Time, _) => {
                    let t0 = par.value.as_scalar()?;
                    TensorValue::Scalar(self.spec.map_point(&SpaceTimePoint::new(t0, nalgebra::Vector3::zeros())).t)
                }
            };
            old.insert(par.name.clone(), par.value);
            new.insert(par.name.clone(), tv);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        for f in self.q.fields.iter().filter(|f| f.expr.is_none()) {
            let val = random_value(f.shape, &mut rng);
            let (mult, off) = &self.field_offsets[&f.name];
            let mut tv = val.conjugate(&m).scale(*mult);
            if let Some(off) = off {
                tv = add(tv, &off.eval(pn, &new).ok()?);
            }
            old.insert(f.name.clone(), val);
            new.insert(f.name.clone(), tv);
        }
        Some((old, new))
    }

    fn predict(&self, old_value: &TensorValue, p: &SpaceTimePoint, pn: &SpaceTimePoint, nb: &Bindings) -> Option<TensorValue> {
        let m = self.spec.rule_matrix(p.t);
        let mut v = old_value.conjugate(&m).scale(self.q.rule.multiplier);
        if let Some(off) = &self.rule_offset {
            v = add(v, &off.eval(pn, nb).ok()?);
        }
        Some(v)
    }
}

/// Per-point defect `candidate - prediction`, `None` where unevaluable.
fn defects(setup: &Setup, v: Variant, points: &[SpaceTimePoint], seed: u64) -> Result<Vec<Option<TensorValue>>, CheckError> {
    let cand = setup.candidate(v)?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let pn = setup.spec.map_point(p);
            let (ob, nb) = setup.bindings(k, p, &pn, v, seed)?;
            let old = setup.old.eval(p, &ob).ok()?;
            let new = cand.eval(&pn, &nb).ok()?;
            let pred = setup.predict(&old, p, &pn, &nb)?;
            new.sub(&pred)
        })
        .collect())
}

fn reduce(points: &[SpaceTimePoint], d: impl Iterator<Item = Option<f64>>, tol: f64) -> Result<LegReport, CheckError> {
    let (mut worst, mut witness, mut valid) = (0.0f64, points.first().copied(), 0usize);
    for (p, r) in points.iter().zip(d) {
        if let Some(r) = r {
            valid += 1;
            if r > worst || (valid == 1 && r >= worst) {
                worst = r;
                witness = Some(*p);
            }
        }
    }
    if valid < MIN_VALID_POINTS {
        return Err(CheckError::TooFewPoints { valid, required: MIN_VALID_POINTS });
    }
    Ok(LegReport { leg: Leg::new(worst, tol), witness: witness.expect("points nonempty"), valid_points: valid })
}

const FREE_SEED: u64 = 0x5EED_F1E1D;

fn run(q: &Quantity, spec: &FrameTransform, points: &[SpaceTimePoint], tol: f64, v: Variant) -> Result<LegReport, CheckError> {
    let setup = Setup::new(q, spec)?;
    let d = defects(&setup, v, points, FREE_SEED)?;
    reduce(points, d.into_iter().map(|x| x.map(|t| t.max_abs())), tol)
}

/// Compares the quantity computed from its definition in the new frame with
/// the declared rule applied to its old value.
pub fn check_form_invariance(q: &Quantity, spec: &FrameTransform, points: &[SpaceTimePoint], tol: f64) -> Result<LegReport, CheckError> {
    run(q, spec, points, tol, Variant::Tensor)
}

/// Evaluates the original function at the transformed arguments and compares
/// it with the transformed value. For relative quantities this is the
/// absolute frame-dependence test: the quantity with and without its spin term.
pub fn check_objectivity(
    q: &Quantity,
    spec: &FrameTransform,
    points: &[SpaceTimePoint],
    tol: f64,
    mode: ObjectivityMode,
) -> Result<LegReport, CheckError> {
    if mode == ObjectivityMode::Full {
        if let Some(f) = q.fields.iter().find(|f| f.expr.is_none()) {
            return Err(CheckError::FullModeNeedsField(f.name.clone()));
        }
    }
    if q.is_relative() {
        return frame_dependence(q, spec, points, tol);
    }
    run(q, spec, points, tol, Variant::Objective(mode))
}

fn frame_dependence(q: &Quantity, spec: &FrameTransform, points: &[SpaceTimePoint], tol: f64) -> Result<LegReport, CheckError> {
    let setup = Setup::new(q, spec)?;
    let with = setup.candidate(Variant::Objective(ObjectivityMode::Explicit))?;
    let without = setup.candidate(Variant::SpinFree)?;
    let d = points.iter().enumerate().map(|(k, p)| {
        let pn = spec.map_point(p);
        let (_, nb) = setup.bindings(k, p, &pn, Variant::SpinFree, FREE_SEED)?;
        let a = with.eval(&pn, &nb).ok()?;
        let b = without.eval(&pn, &nb).ok()?;
        Some(a.max_abs_diff(&b))
    });
    reduce(points, d, tol)
}

/// Both relative tests for a quantity carrying the frame spin.
pub fn check_relative_objectivity(
    q: &Quantity,
    spec: &FrameTransform,
    points: &[SpaceTimePoint],
    tol: f64,
) -> Result<RelativeReport, CheckError> {
    if !q.is_relative() {
        return Err(CheckError::NotRelative(q.name.clone()));
    }
    Ok(RelativeReport {
        absolute: frame_dependence(q, spec, points, tol)?,
        relative: run(q, spec, points, tol, Variant::Objective(ObjectivityMode::Explicit))?,
    })
}

/// Per-point tensor-test defects `q~ - rule(q)`; `None` marks unevaluable points.
pub fn tensor_defects(q: &Quantity, spec: &FrameTransform, points: &[SpaceTimePoint]) -> Result<Vec<Option<TensorValue>>, CheckError> {
    defects(&Setup::new(q, spec)?, Variant::Tensor, points, FREE_SEED)
}

/// Full classification of a quantity under one transform.
pub fn classify(
    q: &Quantity,
    spec: &FrameTransform,
    points: &[SpaceTimePoint],
    tol: f64,
    mode: ObjectivityMode,
) -> Result<Verdict, CheckError> {
    let tensor = check_form_invariance(q, spec, points, tol)?;
    let (objective, relative) = if q.is_relative() {
        let r = check_relative_objectivity(q, spec, points, tol)?;
        (r.absolute, Some(r.relative))
    } else {
        (check_objectivity(q, spec, points, tol, mode)?, None)
    };
    if spec.is_coordinate() && !q.is_relative() && objective.leg.pass && !tensor.leg.pass {
        return Err(CheckError::ImplicationViolated { quantity: q.name.clone(), transform: spec.label() });
    }
    let worst = [Some(tensor), Some(objective), relative]
        .into_iter()
        .flatten()
        .filter(|l| !l.leg.pass)
        .max_by(|a, b| a.leg.residual.total_cmp(&b.leg.residual))
        .unwrap_or(tensor);
    Ok(Verdict {
        quantity: q.name.clone(),
        transform: spec.label(),
        tensor: tensor.leg,
        objective: objective.leg,
        relative_objective: relative.map(|r| r.leg),
        witness: worst.witness,
        tolerance: tol,
        mode,
        valid_points: tensor.valid_points.min(objective.valid_points),
    })
}
