//! The Lie point symmetries of the incompressible Navier-Stokes equations.

use nalgebra::{Matrix3, Vector3};

use super::galilei::{GalileiSpec, TimePath};
use super::rotation::RotationSpec;
use super::FrameError;
use crate::expr::{build, differentiate, FieldExpr, Shape, SpaceTimePoint, Wrt};

/// Times at which the S2 acceleration is probed for the non-vanishing condition.
const ACCEL_PROBES: usize = 41;

#[derive(Clone, Debug, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum NsSymmetrySpec {
    /// Galilei group: `t~ = t + c0`, `x~ = A x + c1 t + c2`, `u~ = A u + c1`.
    G(GalileiSpec),
    /// Scaling: `(t, x, u, p) -> (e^{2 eps} t, e^eps x, e^{-eps} u, e^{-2 eps} p)`.
    S1 { eps: f64 },
    /// Generalized Galilei: `x~ = x + f(t)`, `u~ = u + fdot`, `p~ = p - x . fddot + g`.
    S2 { f: TimePath, g: TimePath },
    /// Reflection of coordinate `axis` (zero-based).
    S3 { axis: usize },
    /// Time reversal with `nu~ = -nu`.
    S4,
    /// Scaling admitted by the Euler equations only: `e^a x`, `e^a u`, `e^{2a} p`.
    S5 { a: f64 },
    /// Planar rotation with axial spin component `omega_z` and pressure regauge.
    S6 { omega_z: f64 },
}

impl NsSymmetrySpec {
    pub fn s2(f: FieldExpr, g: Option<FieldExpr>) -> Result<Self, FrameError> {
        let f = TimePath::new(f, Shape::Vec3, "f(t)")?;
        let g = match g {
            Some(g) => TimePath::new(g, Shape::Scalar, "g(t)")?,
            None => TimePath::zero(Shape::Scalar),
        };
        let probe = (0..ACCEL_PROBES).map(|k| -2.0 + 4.0 * k as f64 / (ACCEL_PROBES - 1) as f64);
        if !probe.map(|t| f.vector_accel(t).amax()).any(|a| a > 1e-12) {
            return Err(FrameError::ZeroAcceleration);
        }
        Ok(NsSymmetrySpec::S2 { f, g })
    }

    pub fn s3(axis: usize) -> Result<Self, FrameError> {
        if axis > 2 {
            return Err(FrameError::BadAxis(axis));
        }
        Ok(NsSymmetrySpec::S3 { axis })
    }

    pub fn tag(&self) -> &'static str {
        match self {
            NsSymmetrySpec::G(_) => "G",
            NsSymmetrySpec::S1 { .. } => "S1",
            NsSymmetrySpec::S2 { .. } => "S2",
            NsSymmetrySpec::S3 { .. } => "S3",
            NsSymmetrySpec::S4 => "S4",
            NsSymmetrySpec::S5 { .. } => "S5",
            NsSymmetrySpec::S6 { .. } => "S6",
        }
    }

    /// The rotation carried by S6: angle `-omega_z t` about `e3`, so that the
    /// axial component of `Q Qdot^T` is `omega_z`.
    pub fn s6_rotation(omega_z: f64) -> RotationSpec {
        RotationSpec::about_z(-omega_z)
    }

    pub fn reflection(axis: usize) -> Matrix3<f64> {
        let mut m = Matrix3::identity();
        m[(axis, axis)] = -1.0;
        m
    }

    pub fn inverse(&self) -> NsSymmetrySpec {
        match self {
            NsSymmetrySpec::G(g) => NsSymmetrySpec::G(g.inverse()),
            NsSymmetrySpec::S1 { eps } => NsSymmetrySpec::S1 { eps: -eps },
            NsSymmetrySpec::S2 { f, g } => {
                // f' = -f, g' = -g - f . fddot keeps the pressure exact.
                let fe = f.expr();
                let fdd = differentiate(&differentiate(fe, Wrt::T), Wrt::T);
                let g_inv = build::sub(&FieldExpr::neg(g.expr()), &build::dot(fe, &fdd));
                NsSymmetrySpec::S2 {
                    f: TimePath::new(FieldExpr::neg(fe), Shape::Vec3, "f(t)").expect("negated path"),
                    g: TimePath::new(g_inv, Shape::Scalar, "g(t)").expect("inverse gauge"),
                }
            }
            NsSymmetrySpec::S3 { axis } => NsSymmetrySpec::S3 { axis: *axis },
            NsSymmetrySpec::S4 => NsSymmetrySpec::S4,
            NsSymmetrySpec::S5 { a } => NsSymmetrySpec::S5 { a: -a },
            NsSymmetrySpec::S6 { omega_z } => NsSymmetrySpec::S6 { omega_z: -omega_z },
        }
    }

    /// Forward map of `(x, t)`.
    pub fn map(&self, t: f64, x: &Vector3<f64>) -> (f64, Vector3<f64>) {
        match self {
            NsSymmetrySpec::G(g) => {
                let p = g.map(&SpaceTimePoint::new(t, *x));
                (p.t, p.x)
            }
            NsSymmetrySpec::S1 { eps } => ((2.0 * eps).exp() * t, eps.exp() * x),
            NsSymmetrySpec::S2 { f, .. } => (t, x + f.vector(t)),
            NsSymmetrySpec::S3 { axis } => (t, Self::reflection(*axis) * x),
            NsSymmetrySpec::S4 => (-t, *x),
            NsSymmetrySpec::S5 { a } => (t, a.exp() * x),
            NsSymmetrySpec::S6 { omega_z } => (t, Self::s6_rotation(*omega_z).q(t) * x),
        }
    }

    /// Forward map as expressions `(x~(x, t), t~(x, t))`.
    pub fn forward_exprs(&self) -> (FieldExpr, FieldExpr) {
        let (x, t) = (FieldExpr::coord(), FieldExpr::time());
        let s = build::scalar;
        match self {
            NsSymmetrySpec::G(g) => (
                build::sum(
                    [build::mul(&FieldExpr::matrix(g.r), &x), build::mul(&t, &FieldExpr::vector(g.v)), FieldExpr::vector(g.c)],
                    Shape::Vec3,
                ),
                build::add(&t, &s(g.tau)),
            ),
            NsSymmetrySpec::S1 { eps } => (build::mul(&s(eps.exp()), &x), build::mul(&s((2.0 * eps).exp()), &t)),
            NsSymmetrySpec::S2 { f, .. } => (build::add(&x, f.expr()), t),
            NsSymmetrySpec::S3 { axis } => (build::mul(&FieldExpr::matrix(Self::reflection(*axis)), &x), t),
            NsSymmetrySpec::S4 => (x, FieldExpr::neg(&t)),
            NsSymmetrySpec::S5 { a } => (build::mul(&s(a.exp()), &x), t),
            NsSymmetrySpec::S6 { omega_z } => (build::mul(&Self::s6_rotation(*omega_z).q_expr(&t), &x), t),
        }
    }

    /// Inverse map as expressions `(x(x~, t~), t(x~, t~))`, written in the
    /// new coordinates.
    pub fn inverse_exprs(&self) -> (FieldExpr, FieldExpr) {
        let (x, t) = (FieldExpr::coord(), FieldExpr::time());
        match self {
            NsSymmetrySpec::S2 { f, .. } => (build::sub(&x, f.expr()), t),
            NsSymmetrySpec::S6 { omega_z } => {
                let q = Self::s6_rotation(*omega_z).q_expr(&t);
                (build::mul(&build::transpose(&q), &x), t)
            }
            other => other.inverse().forward_exprs(),
        }
    }

    /// Spatial Jacobian `dx~/dx`.
    pub fn jacobian(&self, t: f64) -> Matrix3<f64> {
        match self {
            NsSymmetrySpec::G(g) => g.r,
            NsSymmetrySpec::S1 { eps } => Matrix3::identity() * eps.exp(),
            NsSymmetrySpec::S2 { .. } | NsSymmetrySpec::S4 => Matrix3::identity(),
            NsSymmetrySpec::S3 { axis } => Self::reflection(*axis),
            NsSymmetrySpec::S5 { a } => Matrix3::identity() * a.exp(),
            NsSymmetrySpec::S6 { omega_z } => Self::s6_rotation(*omega_z).q(t),
        }
    }

    /// Orthogonal part of the field action, written in the new time.
    pub fn rule_matrix_expr(&self) -> FieldExpr {
        match self {
            NsSymmetrySpec::G(g) => FieldExpr::matrix(g.r),
            NsSymmetrySpec::S3 { axis } => FieldExpr::matrix(Self::reflection(*axis)),
            NsSymmetrySpec::S6 { omega_z } => Self::s6_rotation(*omega_z).q_expr(&FieldExpr::time()),
            _ => FieldExpr::matrix(Matrix3::identity()),
        }
    }

    /// `S2` pressure offset `-(x~ - f) . fddot + g` in new coordinates.
    pub(crate) fn s2_pressure_offset(f: &TimePath, g: &TimePath) -> FieldExpr {
        let x_old = build::sub(&FieldExpr::coord(), f.expr());
        let fdd = differentiate(&differentiate(f.expr(), Wrt::T), Wrt::T);
        build::sub(g.expr(), &build::dot(&x_old, &fdd))
    }
}
