//! Galilei and Euclidean (time-dependent) changes of frame.

use std::fmt;

use nalgebra::{Matrix3, Vector3};

use super::rotation::RotationSpec;
use super::FrameError;
use crate::expr::{differentiate, CompiledExpr, FieldExpr, Shape, SpaceTimePoint, Wrt};

/// Orthogonality and orientation tolerance for stored rotation matrices.
pub const ORTHO_TOL: f64 = 1e-12;

pub(crate) fn check_rotation(r: &Matrix3<f64>) -> Result<(), FrameError> {
    let defect = (r * r.transpose() - Matrix3::identity()).amax();
    if !r.iter().all(|c| c.is_finite()) || defect > ORTHO_TOL || (r.determinant() - 1.0).abs() > ORTHO_TOL {
        return Err(FrameError::NotRotation { defect });
    }
    Ok(())
}

/// `x' = R x + v t + c`, `t' = t + tau` with constant `R`, `v`, `c`, `tau`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GalileiSpec {
    pub r: Matrix3<f64>,
    pub v: Vector3<f64>,
    pub c: Vector3<f64>,
    pub tau: f64,
}

impl GalileiSpec {
    pub fn new(r: Matrix3<f64>, v: Vector3<f64>, c: Vector3<f64>, tau: f64) -> Result<Self, FrameError> {
        check_rotation(&r)?;
        if !(v.iter().chain(c.iter()).all(|x| x.is_finite()) && tau.is_finite()) {
            return Err(FrameError::NonFinite("galilei"));
        }
        Ok(Self { r, v, c, tau })
    }

    pub fn identity() -> Self {
        Self { r: Matrix3::identity(), v: Vector3::zeros(), c: Vector3::zeros(), tau: 0.0 }
    }

    pub fn boost(v: Vector3<f64>) -> Self {
        Self { v, ..Self::identity() }
    }

    pub fn map(&self, pt: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint::new(pt.t + self.tau, self.r * pt.x + self.v * pt.t + self.c)
    }

    /// `other` applied after `self`.
    pub fn then(&self, other: &GalileiSpec) -> GalileiSpec {
        GalileiSpec {
            r: other.r * self.r,
            v: other.r * self.v + other.v,
            c: other.r * self.c + other.v * self.tau + other.c,
            tau: self.tau + other.tau,
        }
    }

    pub fn inverse(&self) -> GalileiSpec {
        let rt = self.r.transpose();
        GalileiSpec { r: rt, v: -(rt * self.v), c: rt * (self.v * self.tau - self.c), tau: -self.tau }
    }
}

/// A smooth vector or scalar path of time with its first two derivatives.
#[derive(Clone)]
pub struct TimePath {
    expr: FieldExpr,
    value: CompiledExpr,
    rate: CompiledExpr,
    accel: CompiledExpr,
}

impl fmt::Debug for TimePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TimePath({})", self.expr)
    }
}

impl PartialEq for TimePath {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr
    }
}

impl TimePath {
    pub fn new(expr: FieldExpr, shape: Shape, what: &'static str) -> Result<Self, FrameError> {
        if expr.shape() != shape {
            return Err(FrameError::PathShape { what, expected: shape, found: expr.shape() });
        }
        if expr.depends_on_coord() || expr.has_symbols() {
            return Err(FrameError::PathNotOfTime(what));
        }
        let d1 = differentiate(&expr, Wrt::T);
        let d2 = differentiate(&d1, Wrt::T);
        Ok(Self { value: CompiledExpr::new(&expr), rate: CompiledExpr::new(&d1), accel: CompiledExpr::new(&d2), expr })
    }

    pub fn zero(shape: Shape) -> Self {
        Self::new(FieldExpr::zero(shape), shape, "zero").expect("zero path")
    }

    pub fn expr(&self) -> &FieldExpr {
        &self.expr
    }

    fn at(c: &CompiledExpr, t: f64) -> crate::expr::TensorValue {
        c.eval(&SpaceTimePoint::new(t, Vector3::zeros()), &Default::default())
            .unwrap_or_else(|_| crate::expr::TensorValue::zero(c.shape()).scale(f64::NAN))
    }

    pub fn value(&self, t: f64) -> crate::expr::TensorValue {
        Self::at(&self.value, t)
    }

    pub fn rate(&self, t: f64) -> crate::expr::TensorValue {
        Self::at(&self.rate, t)
    }

    pub fn accel(&self, t: f64) -> crate::expr::TensorValue {
        Self::at(&self.accel, t)
    }

    pub fn vector(&self, t: f64) -> Vector3<f64> {
        self.value(t).as_vector().unwrap_or(Vector3::repeat(f64::NAN))
    }

    pub fn vector_rate(&self, t: f64) -> Vector3<f64> {
        self.rate(t).as_vector().unwrap_or(Vector3::repeat(f64::NAN))
    }

    pub fn vector_accel(&self, t: f64) -> Vector3<f64> {
        self.accel(t).as_vector().unwrap_or(Vector3::repeat(f64::NAN))
    }
}

/// `x* = R(t) x + c(t)`, `t* = t + tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct EuclideanSpec {
    pub rotation: RotationSpec,
    pub shift: TimePath,
    pub tau: f64,
}

impl EuclideanSpec {
    pub fn new(rotation: RotationSpec, shift: FieldExpr, tau: f64) -> Result<Self, FrameError> {
        if !tau.is_finite() {
            return Err(FrameError::NonFinite("euclidean"));
        }
        Ok(Self { rotation, shift: TimePath::new(shift, Shape::Vec3, "c(t)")?, tau })
    }

    pub fn rotating(rotation: RotationSpec) -> Self {
        Self { rotation, shift: TimePath::zero(Shape::Vec3), tau: 0.0 }
    }

    pub fn r(&self, t: f64) -> Matrix3<f64> {
        self.rotation.q(t)
    }

    pub fn r_dot(&self, t: f64) -> Matrix3<f64> {
        self.rotation.q_dot(t)
    }

    pub fn r_ddot(&self, t: f64) -> Matrix3<f64> {
        self.rotation.q_ddot(t)
    }

    pub fn c(&self, t: f64) -> Vector3<f64> {
        self.shift.vector(t)
    }

    pub fn c_dot(&self, t: f64) -> Vector3<f64> {
        self.shift.vector_rate(t)
    }

    pub fn c_ddot(&self, t: f64) -> Vector3<f64> {
        self.shift.vector_accel(t)
    }

    pub fn map(&self, pt: &SpaceTimePoint) -> SpaceTimePoint {
        SpaceTimePoint::new(pt.t + self.tau, self.r(pt.t) * pt.x + self.c(pt.t))
    }

    /// Velocity transport `xdot* = R xdot + Rdot x + cdot` at old time `t`.
    pub fn map_velocity(&self, t: f64, x: &Vector3<f64>, xdot: &Vector3<f64>) -> Vector3<f64> {
        self.r(t) * xdot + self.r_dot(t) * x + self.c_dot(t)
    }
}
