//! Frame transforms and the transformation of field expressions.

use std::fmt;

use nalgebra::{Matrix3, Vector3};

use super::galilei::{EuclideanSpec, GalileiSpec};
use super::rotation::RotationSpec;
use super::symmetry::NsSymmetrySpec;
use super::FrameError;
use crate::expr::{build, compose, differentiate, FieldExpr, Shape, SpaceTimePoint, Wrt};

#[derive(Clone, Debug, PartialEq)]
pub enum FrameTransform {
    Rotation(RotationSpec),
    Galilei(GalileiSpec),
    Euclidean(EuclideanSpec),
    Symmetry(NsSymmetrySpec),
}

/// Declared component law of a field.
#[derive(Clone, Debug, PartialEq)]
pub enum RuleKind {
    Scalar,
    Contra1,
    /// Covariant vector. The catalogue's rule matrices are orthogonal, so this
    /// acts like [`RuleKind::Contra1`].
    Cov1,
    Rank2,
    /// Homogeneous action by shape plus an offset written in new coordinates.
    Inhomogeneous(FieldExpr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct VarianceRule {
    pub kind: RuleKind,
    pub multiplier: f64,
}

impl VarianceRule {
    pub fn new(kind: RuleKind) -> Self {
        Self { kind, multiplier: 1.0 }
    }

    pub fn scaled(kind: RuleKind, multiplier: f64) -> Self {
        Self { kind, multiplier }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            RuleKind::Scalar => "scalar",
            RuleKind::Contra1 => "contra1",
            RuleKind::Cov1 => "cov1",
            RuleKind::Rank2 => "rank2",
            RuleKind::Inhomogeneous(_) => "inhomogeneous",
        }
    }

    pub fn offset(&self) -> Option<&FieldExpr> {
        match &self.kind {
            RuleKind::Inhomogeneous(o) => Some(o),
            _ => None,
        }
    }

    /// Default homogeneous rule for a field of this shape.
    pub fn tensor_for(shape: Shape) -> Self {
        Self::new(match shape {
            Shape::Scalar => RuleKind::Scalar,
            Shape::Vec3 => RuleKind::Contra1,
            Shape::Mat3 => RuleKind::Rank2,
        })
    }

    fn check(&self, shape: Shape) -> Result<(), FrameError> {
        let ok = match &self.kind {
            RuleKind::Scalar => shape == Shape::Scalar,
            RuleKind::Contra1 | RuleKind::Cov1 => shape == Shape::Vec3,
            RuleKind::Rank2 => shape == Shape::Mat3,
            RuleKind::Inhomogeneous(o) => o.shape() == shape,
        };
        if ok {
            Ok(())
        } else {
            Err(FrameError::IncompatibleRule { rule: self.name(), shape })
        }
    }

    /// Apply the rule to a value already expressed in new coordinates, with
    /// `m` the rule matrix.
    pub fn act(&self, value: &FieldExpr, m: &FieldExpr) -> Result<FieldExpr, FrameError> {
        self.check(value.shape())?;
        let homogeneous = match value.shape() {
            Shape::Scalar => value.clone(),
            Shape::Vec3 => build::mul(m, value),
            Shape::Mat3 => build::mul(&build::mul(m, value), &build::transpose(m)),
        };
        let scaled = build::mul(&build::scalar(self.multiplier), &homogeneous);
        Ok(match self.offset() {
            Some(o) => build::add(&scaled, o),
            None => scaled,
        })
    }
}

/// How the viscosity parameter transforms.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Viscosity {
    Keep,
    Flip,
    /// The transform is a symmetry of the inviscid equations only.
    Inviscid,
}

/// Velocity and pressure rules of a transform.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldRules {
    pub velocity: VarianceRule,
    pub pressure: VarianceRule,
    pub viscosity: Viscosity,
    /// `true` when the velocity rule follows from the coordinate map.
    pub coordinate: bool,
    /// `true` when the transform is restricted to planar flows.
    pub planar: bool,
}

/// Either the velocity rule induced by a coordinate transformation or a
/// marker that the transform carries its own listed field rules.
#[derive(Clone, Debug, PartialEq)]
pub enum VelocityRule {
    Coordinate(VarianceRule),
    Listed { velocity: VarianceRule, pressure: VarianceRule },
}

impl FrameTransform {
    pub fn label(&self) -> String {
        self.to_string()
    }

    /// `true` for pure space-time coordinate transformations with `t~ = t + const`.
    pub fn is_coordinate(&self) -> bool {
        match self {
            FrameTransform::Symmetry(s) => {
                matches!(s, NsSymmetrySpec::G(_) | NsSymmetrySpec::S3 { .. })
            }
            _ => true,
        }
    }

    pub fn map_point(&self, pt: &SpaceTimePoint) -> SpaceTimePoint {
        match self {
            FrameTransform::Rotation(r) => SpaceTimePoint::new(pt.t, r.q(pt.t) * pt.x),
            FrameTransform::Galilei(g) => g.map(pt),
            FrameTransform::Euclidean(e) => e.map(pt),
            FrameTransform::Symmetry(s) => {
                let (t, x) = s.map(pt.t, &pt.x);
                SpaceTimePoint::new(t, x)
            }
        }
    }

    pub fn map_point_inv(&self, pt: &SpaceTimePoint) -> SpaceTimePoint {
        match self {
            FrameTransform::Rotation(r) => SpaceTimePoint::new(pt.t, r.q(pt.t).transpose() * pt.x),
            FrameTransform::Galilei(g) => g.inverse().map(pt),
            FrameTransform::Euclidean(e) => {
                let t = pt.t - e.tau;
                SpaceTimePoint::new(t, e.r(t).transpose() * (pt.x - e.c(t)))
            }
            FrameTransform::Symmetry(s) => {
                let (t, x) = s.inverse().map(pt.t, &pt.x);
                SpaceTimePoint::new(t, x)
            }
        }
    }

    /// `dx~/dx` at old time `t`.
    pub fn jacobian(&self, t: f64) -> Matrix3<f64> {
        match self {
            FrameTransform::Rotation(r) => r.q(t),
            FrameTransform::Galilei(g) => g.r,
            FrameTransform::Euclidean(e) => e.r(t),
            FrameTransform::Symmetry(s) => s.jacobian(t),
        }
    }

    /// `(x~, t~)` as expressions of old `(x, t)`.
    pub fn forward_exprs(&self) -> (FieldExpr, FieldExpr) {
        let (x, t) = (FieldExpr::coord(), FieldExpr::time());
        match self {
            FrameTransform::Rotation(r) => (build::mul(&r.q_expr(&t), &x), t),
            FrameTransform::Galilei(g) => NsSymmetrySpec::G(*g).forward_exprs(),
            FrameTransform::Euclidean(e) => {
                (build::add(&build::mul(&e.rotation.q_expr(&t), &x), e.shift.expr()), build::add(&t, &build::scalar(e.tau)))
            }
            FrameTransform::Symmetry(s) => s.forward_exprs(),
        }
    }

    /// `(x, t)` as expressions of new `(x~, t~)`.
    pub fn inverse_exprs(&self) -> (FieldExpr, FieldExpr) {
        let (x, t) = (FieldExpr::coord(), FieldExpr::time());
        match self {
            FrameTransform::Rotation(r) => (build::mul(&build::transpose(&r.q_expr(&t)), &x), t),
            FrameTransform::Galilei(g) => NsSymmetrySpec::G(g.inverse()).forward_exprs(),
            FrameTransform::Euclidean(e) => {
                let t_old = build::sub(&t, &build::scalar(e.tau));
                let c = compose(e.shift.expr(), &x, &t_old);
                let rt = build::transpose(&e.rotation.q_expr(&t_old));
                (build::mul(&rt, &build::sub(&x, &c)), t_old)
            }
            FrameTransform::Symmetry(s) => s.inverse_exprs(),
        }
    }

    /// Orthogonal matrix acting on vector and tensor components, written in
    /// the new coordinates.
    pub fn rule_matrix_expr(&self) -> FieldExpr {
        let t = FieldExpr::time();
        match self {
            FrameTransform::Rotation(r) => r.q_expr(&t),
            FrameTransform::Galilei(g) => FieldExpr::matrix(g.r),
            FrameTransform::Euclidean(e) => e.rotation.q_expr(&build::sub(&t, &build::scalar(e.tau))),
            FrameTransform::Symmetry(s) => s.rule_matrix_expr(),
        }
    }

    /// Numeric rule matrix at old time `t`.
    pub fn rule_matrix(&self, t: f64) -> Matrix3<f64> {
        match self {
            FrameTransform::Symmetry(NsSymmetrySpec::S1 { .. } | NsSymmetrySpec::S5 { .. }) => Matrix3::identity(),
            _ => self.jacobian(t),
        }
    }

    /// `dx~/dt` at fixed `x`, written in the new coordinates.
    pub fn frame_velocity_expr(&self) -> FieldExpr {
        let (fx, _) = self.forward_exprs();
        let (ix, it) = self.inverse_exprs();
        compose(&differentiate(&fx, Wrt::T), &ix, &it)
    }

    /// Spin of the new frame relative to the old one, `Q Qdot^T`, if the
    /// transform is a rotation with constant rate.
    pub fn spin(&self) -> Option<Matrix3<f64>> {
        match self {
            FrameTransform::Rotation(r) => Some(r.spin()),
            FrameTransform::Euclidean(e) => Some(e.rotation.spin()),
            FrameTransform::Galilei(_) => Some(Matrix3::zeros()),
            FrameTransform::Symmetry(NsSymmetrySpec::S6 { omega_z }) => Some(NsSymmetrySpec::s6_rotation(*omega_z).spin()),
            FrameTransform::Symmetry(NsSymmetrySpec::G(_) | NsSymmetrySpec::S3 { .. }) => Some(Matrix3::zeros()),
            FrameTransform::Symmetry(_) => None,
        }
    }

    /// Velocity and pressure rules. `psi` is the stream function of the
    /// flow (old coordinates), required by S6 only.
    pub fn field_rules(&self, psi: Option<&FieldExpr>) -> Result<FieldRules, FrameError> {
        let coordinate = |planar| FieldRules {
            velocity: VarianceRule::new(RuleKind::Inhomogeneous(self.frame_velocity_expr())),
            pressure: VarianceRule::new(RuleKind::Scalar),
            viscosity: Viscosity::Keep,
            coordinate: true,
            planar,
        };
        let listed = |velocity, pressure, viscosity| FieldRules { velocity, pressure, viscosity, coordinate: false, planar: false };
        let s = match self {
            FrameTransform::Symmetry(s) => s,
            _ => return Ok(coordinate(false)),
        };
        Ok(match s {
            NsSymmetrySpec::G(_) | NsSymmetrySpec::S3 { .. } => coordinate(false),
            NsSymmetrySpec::S1 { eps } => listed(
                VarianceRule::scaled(RuleKind::Contra1, (-eps).exp()),
                VarianceRule::scaled(RuleKind::Scalar, (-2.0 * eps).exp()),
                Viscosity::Keep,
            ),
            NsSymmetrySpec::S2 { f, g } => listed(
                VarianceRule::new(RuleKind::Inhomogeneous(differentiate(f.expr(), Wrt::T))),
                VarianceRule::new(RuleKind::Inhomogeneous(NsSymmetrySpec::s2_pressure_offset(f, g))),
                Viscosity::Keep,
            ),
            NsSymmetrySpec::S4 => {
                listed(VarianceRule::scaled(RuleKind::Contra1, -1.0), VarianceRule::new(RuleKind::Scalar), Viscosity::Flip)
            }
            NsSymmetrySpec::S5 { a } => listed(
                VarianceRule::scaled(RuleKind::Contra1, a.exp()),
                VarianceRule::scaled(RuleKind::Scalar, (2.0 * a).exp()),
                Viscosity::Inviscid,
            ),
            NsSymmetrySpec::S6 { omega_z } => {
                let psi = psi.ok_or(FrameError::MissingStreamFunction)?;
                if psi.shape() != Shape::Scalar {
                    return Err(FrameError::IncompatibleRule { rule: "stream function", shape: psi.shape() });
                }
                let (ix, it) = self.inverse_exprs();
                let x = FieldExpr::coord();
                let w = *omega_z;
                // Centrifugal potential of the planar radius only.
                let planar = build::mul(&FieldExpr::matrix(Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, 0.0))), &x);
                let regauge = build::add(
                    &build::mul(&build::scalar(0.5 * w * w), &build::dot(&planar, &planar)),
                    &build::mul(&build::scalar(2.0 * w), &compose(psi, &ix, &it)),
                );
                let mut r = coordinate(true);
                r.pressure = VarianceRule::new(RuleKind::Inhomogeneous(regauge));
                r.coordinate = false;
                r
            }
        })
    }
}

impl fmt::Display for FrameTransform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = |v: &Vector3<f64>| format!("[{}, {}, {}]", v.x, v.y, v.z);
        match self {
            FrameTransform::Rotation(r) => {
                write!(f, "rotation(axis={}, rate={}, phase={})", v(&r.axis), r.rate, r.phase)
            }
            FrameTransform::Galilei(g) => write!(f, "galilei(v={}, c={}, tau={})", v(&g.v), v(&g.c), g.tau),
            FrameTransform::Euclidean(e) => {
                write!(f, "euclidean(axis={}, rate={}, c={}, tau={})", v(&e.rotation.axis), e.rotation.rate, e.shift.expr(), e.tau)
            }
            FrameTransform::Symmetry(s) => match s {
                NsSymmetrySpec::G(g) => write!(f, "G(c1={}, c2={}, c0={})", v(&g.v), v(&g.c), g.tau),
                NsSymmetrySpec::S1 { eps } => write!(f, "S1(eps={eps})"),
                NsSymmetrySpec::S2 { f: p, g } => write!(f, "S2(f={}, g={})", p.expr(), g.expr()),
                NsSymmetrySpec::S3 { axis } => write!(f, "S3(axis={})", axis + 1),
                NsSymmetrySpec::S4 => write!(f, "S4"),
                NsSymmetrySpec::S5 { a } => write!(f, "S5(a={a})"),
                NsSymmetrySpec::S6 { omega_z } => write!(f, "S6(omega_z={omega_z})"),
            },
        }
    }
}

/// Transformed field `phi~(x~, t~)`: the field composed with the inverse map,
/// acted on by the rule matrix and multiplier, plus any offset.
pub fn transform_field(expr: &FieldExpr, spec: &FrameTransform, rule: &VarianceRule) -> Result<FieldExpr, FrameError> {
    rule.check(expr.shape())?;
    let (ix, it) = spec.inverse_exprs();
    let composed = compose(expr, &ix, &it);
    rule.act(&composed, &spec.rule_matrix_expr())
}

/// The velocity rule `u~ = (dx~/dx) u + dx~/dt` for coordinate
/// transformations; the listed rules otherwise. In the listed S6 pressure
/// rule the stream function appears as the free symbol `psi`.
pub fn velocity_rule_for(spec: &FrameTransform) -> VelocityRule {
    if spec.is_coordinate() {
        return VelocityRule::Coordinate(VarianceRule::new(RuleKind::Inhomogeneous(spec.frame_velocity_expr())));
    }
    let psi = FieldExpr::symbol("psi", Shape::Scalar);
    let r = spec.field_rules(Some(&psi)).expect("stream function supplied");
    VelocityRule::Listed { velocity: r.velocity, pressure: r.pressure }
}
