//! Conversion of scenario payloads into core objects. Every failure here is
//! a schema error.

use std::collections::BTreeMap;

use invariance_core::checks::{FieldArg, FieldLaw, ObjectivityMode, Param, ParamLaw, Quantity};
use invariance_core::expr::{parse_field_expr, parse_with, FieldExpr, Shape, SymbolTable, TensorValue};
use invariance_core::frames::{skew, EuclideanSpec, FrameTransform, GalileiSpec, NsSymmetrySpec, RotationSpec, RuleKind, VarianceRule};
use invariance_core::mechanics::References;
use invariance_core::ns::{ClosureModel, ClosureRefs, Solution};
use invariance_core::sampling::random_rotation_specs;
use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::scenario::*;

pub fn v3(a: [f64; 3]) -> Vector3<f64> {
    Vector3::from(a)
}

fn expr(text: &str, what: &str) -> Result<FieldExpr, String> {
    parse_field_expr(text).map_err(|e| format!("{what}: `{text}`: {e}"))
}

fn expr_with(text: &str, table: &SymbolTable, what: &str) -> Result<FieldExpr, String> {
    parse_with(text, table).map_err(|e| format!("{what}: `{text}`: {e}"))
}

fn shape(s: ShapeName) -> Shape {
    match s {
        ShapeName::Scalar => Shape::Scalar,
        ShapeName::Vec3 => Shape::Vec3,
        ShapeName::Mat3 => Shape::Mat3,
    }
}

fn rule_kind(r: RuleName) -> RuleKind {
    match r {
        RuleName::Scalar => RuleKind::Scalar,
        RuleName::Contra1 => RuleKind::Contra1,
        RuleName::Cov1 => RuleKind::Cov1,
        RuleName::Rank2 => RuleKind::Rank2,
    }
}

pub fn mode(m: ModeName) -> ObjectivityMode {
    match m {
        ModeName::Explicit => ObjectivityMode::Explicit,
        ModeName::Full => ObjectivityMode::Full,
    }
}

fn param(p: &ParamSpec) -> Param {
    let value = match &p.value {
        Value::Scalar(s) => TensorValue::Scalar(*s),
        Value::Vector(v) => TensorValue::Vector(v3(*v)),
        Value::Matrix(m) => TensorValue::Matrix(Matrix3::from_fn(|i, j| m[i][j])),
    };
    let law = match p.law {
        ParamLawName::Constant => ParamLaw::Constant,
        ParamLawName::Point => ParamLaw::Point,
        ParamLawName::Vector => ParamLaw::Vector,
        ParamLawName::Rank2 => ParamLaw::Rank2,
        ParamLawName::Scalar => ParamLaw::Scalar,
        ParamLawName::Time => ParamLaw::Time,
    };
    Param::new(&p.name, value, law)
}

/// A quantity with its parsed definition and optional expected defect.
pub struct BuiltQuantity {
    pub quantity: Quantity,
    pub expected_defect: Option<FieldExpr>,
    pub defect_tolerance: Option<f64>,
    pub mode: Option<ObjectivityMode>,
}

pub fn quantity(q: &QuantitySpec) -> Result<BuiltQuantity, String> {
    let what = |s: &str| format!("quantity `{}` {s}", q.name);
    let params: Vec<Param> = q.params.iter().map(param).collect();
    let mut table = SymbolTable::standard();
    for p in &params {
        table.insert(&p.name, p.value.shape());
    }
    let mut fields = Vec::new();
    for f in &q.fields {
        let law = match f.law {
            LawName::Velocity => FieldLaw::Velocity,
            LawName::Scalar => FieldLaw::Rule(VarianceRule::new(RuleKind::Scalar)),
            LawName::Contra1 => FieldLaw::Rule(VarianceRule::new(RuleKind::Contra1)),
            LawName::Cov1 => FieldLaw::Rule(VarianceRule::new(RuleKind::Cov1)),
            LawName::Rank2 => FieldLaw::Rule(VarianceRule::new(RuleKind::Rank2)),
        };
        let arg = match (f.role, &f.expr) {
            (RoleName::Free, None) => {
                let s = f.shape.ok_or_else(|| what(&format!("free field `{}` needs a shape", f.name)))?;
                FieldArg::free(&f.name, shape(s), law)
            }
            (RoleName::Free, Some(_)) => return Err(what(&format!("free field `{}` takes no expression", f.name))),
            (_, None) => return Err(what(&format!("field `{}` needs an expression", f.name))),
            (role, Some(text)) => {
                let e = expr_with(text, &table, &what(&format!("field `{}`", f.name)))?;
                if let Some(s) = f.shape {
                    if shape(s) != e.shape() {
                        return Err(what(&format!("field `{}` is declared {} but has shape {}", f.name, shape(s), e.shape())));
                    }
                }
                if role == RoleName::Inner {
                    FieldArg::inner(&f.name, e, law)
                } else {
                    FieldArg::specified(&f.name, e, law)
                }
            }
        };
        fields.push(arg);
    }
    for f in &fields {
        table.insert(&f.name, f.shape);
    }
    let definition = expr_with(&q.definition, &table, &what("definition"))?;
    let kind = match &q.rule_offset {
        Some(text) => RuleKind::Inhomogeneous(expr_with(text, &table, &what("rule offset"))?),
        None => rule_kind(q.rule),
    };
    let rule = VarianceRule::scaled(kind, q.multiplier.unwrap_or(1.0));
    let mut quantity = Quantity::new(&q.name, definition, rule);
    for f in fields {
        quantity = quantity.with_field(f);
    }
    for p in params {
        quantity = quantity.with_param(p);
    }
    if let Some(s) = q.spin {
        quantity = quantity.with_spin(skew(&v3(s)));
    }
    quantity.validate().map_err(|e| what(&e.to_string()))?;
    let expected_defect =
        q.expected_defect.as_deref().map(|t| expr_with(t, &SymbolTable::standard(), &what("expected defect"))).transpose()?;
    if let Some(d) = &expected_defect {
        if d.shape() != quantity.definition.shape() {
            return Err(what(&format!("expected defect has shape {}", d.shape())));
        }
    }
    Ok(BuiltQuantity { quantity, expected_defect, defect_tolerance: q.defect_tolerance, mode: q.mode.map(mode) })
}

fn rotation_vector(r: [f64; 3]) -> Matrix3<f64> {
    Rotation3::new(v3(r)).into_inner()
}

fn galilei(rotation: [f64; 3], v: [f64; 3], c: [f64; 3], tau: f64) -> Result<GalileiSpec, String> {
    GalileiSpec::new(rotation_vector(rotation), v3(v), v3(c), tau).map_err(|e| e.to_string())
}

pub fn rotation(axis: [f64; 3], rate: f64, phase: f64) -> Result<RotationSpec, String> {
    RotationSpec::new(v3(axis), rate, phase).map_err(|e| e.to_string())
}

pub fn euclidean(axis: [f64; 3], rate: f64, phase: f64, shift: Option<&str>, tau: f64) -> Result<EuclideanSpec, String> {
    let shift = expr(shift.unwrap_or("vec(0, 0, 0)"), "shift")?;
    EuclideanSpec::new(rotation(axis, rate, phase)?, shift, tau).map_err(|e| e.to_string())
}

pub fn symmetry(s: &SymmetrySpec) -> Result<NsSymmetrySpec, String> {
    Ok(match s {
        SymmetrySpec::G { rotation, v, c, tau } => NsSymmetrySpec::G(galilei(*rotation, *v, *c, *tau)?),
        SymmetrySpec::S1 { eps } => NsSymmetrySpec::S1 { eps: finite(*eps, "eps")? },
        SymmetrySpec::S2 { f, g } => {
            let g = g.as_deref().map(|g| expr(g, "S2 g(t)")).transpose()?;
            NsSymmetrySpec::s2(expr(f, "S2 f(t)")?, g).map_err(|e| e.to_string())?
        }
        SymmetrySpec::S3 { axis } => {
            if !(1..=3).contains(axis) {
                return Err(format!("S3 axis must be 1, 2 or 3, found {axis}"));
            }
            NsSymmetrySpec::s3(axis - 1).map_err(|e| e.to_string())?
        }
        SymmetrySpec::S4 => NsSymmetrySpec::S4,
        SymmetrySpec::S5 { a } => NsSymmetrySpec::S5 { a: finite(*a, "a")? },
        SymmetrySpec::S6 { omega_z } => NsSymmetrySpec::S6 { omega_z: finite(*omega_z, "omega_z")? },
    })
}

fn finite(x: f64, what: &str) -> Result<f64, String> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("{what} must be finite"))
    }
}

pub fn transform(t: &TransformSpec) -> Result<FrameTransform, String> {
    Ok(match t {
        TransformSpec::Rotation { axis, rate, phase } => FrameTransform::Rotation(rotation(*axis, *rate, *phase)?),
        TransformSpec::Galilei { rotation, v, c, tau } => FrameTransform::Galilei(galilei(*rotation, *v, *c, *tau)?),
        TransformSpec::Euclidean { axis, rate, phase, shift, tau } => {
            FrameTransform::Euclidean(euclidean(*axis, *rate, *phase, shift.as_deref(), *tau)?)
        }
        TransformSpec::Symmetry { symmetry: s } => FrameTransform::Symmetry(symmetry(s)?),
    })
}

/// Explicit transforms followed by the seeded random rotations.
pub fn transform_set(c: &QuantityCheck, seed: u64) -> Result<Vec<FrameTransform>, String> {
    let mut out = c.transforms.iter().map(transform).collect::<Result<Vec<_>, _>>()?;
    if let Some(r) = &c.random_rotations {
        out.extend(random_rotation_specs(r.count, r.seed.unwrap_or(seed)).into_iter().map(FrameTransform::Rotation));
    }
    if out.is_empty() {
        return Err("no transforms given".into());
    }
    Ok(out)
}

pub fn solution(s: SolutionName) -> Solution {
    match s {
        SolutionName::TaylorGreen => Solution::TaylorGreen,
        SolutionName::Beltrami => Solution::Beltrami,
        SolutionName::Shear => Solution::Shear,
    }
}

pub fn references(r: &RefsSpec) -> References {
    References { x0r: v3(r.x0r), x0r_rate: v3(r.x0r_rate), v0r: v3(r.v0r), t0r: r.t0r }
}

pub fn closure_model(m: &ClosureModelSpec) -> Result<ClosureModel, String> {
    match m {
        ClosureModelSpec::Named(NamedModel::Compliant) => Ok(ClosureModel::compliant()),
        ClosureModelSpec::Custom(c) => {
            let refs = c.refs.as_ref().map_or_else(ClosureRefs::default, |r| ClosureRefs { t0r: r.t0r, x0r: v3(r.x0r), u0r: v3(r.u0r) });
            let phi: [&str; 5] = std::array::from_fn(|i| c.phi[i].as_str());
            let model = ClosureModel::parse(phi, c.params.clone(), refs, c.nu).map_err(|e| e.to_string())?;
            match &c.mean {
                Some(text) => model.with_mean(expr(text, "mean velocity")?).map_err(|e| e.to_string()),
                None => Ok(model),
            }
        }
    }
}

/// Row ids: the label itself, then `label#2`, `label#3`, ... for repeats.
pub fn unique_ids<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    labels
        .into_iter()
        .map(|l| {
            let n = seen.entry(l).or_insert(0);
            *n += 1;
            if *n == 1 {
                l.to_string()
            } else {
                format!("{l}#{n}")
            }
        })
        .collect()
}
