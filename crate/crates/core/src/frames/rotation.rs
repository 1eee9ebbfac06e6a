//! Uniform rotations about a fixed axis.

use nalgebra::{Matrix3, Unit, Vector3};

use super::FrameError;
use crate::expr::{build, FieldExpr, Func};

/// Skew matrix `[a]x` with `[a]x y = a x y`.
pub fn skew(a: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0)
}

/// Axial vector of an antisymmetric matrix, inverse of [`skew`].
pub fn axial(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)] - m[(1, 2)], m[(0, 2)] - m[(2, 0)], m[(1, 0)] - m[(0, 1)]) * 0.5
}

/// Rotation `Q(t) = exp((phase + rate t) [axis]x)`, evaluated in closed form.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotationSpec {
    pub axis: Unit<Vector3<f64>>,
    pub rate: f64,
    pub phase: f64,
}

impl RotationSpec {
    pub fn new(axis: Vector3<f64>, rate: f64, phase: f64) -> Result<Self, FrameError> {
        if !(rate.is_finite() && phase.is_finite()) {
            return Err(FrameError::NonFinite("rotation"));
        }
        let axis = Unit::try_new(axis, 1e-12).ok_or(FrameError::ZeroAxis)?;
        Ok(Self { axis, rate, phase })
    }

    pub fn identity() -> Self {
        Self { axis: Vector3::z_axis(), rate: 0.0, phase: 0.0 }
    }

    pub fn about_z(rate: f64) -> Self {
        Self { axis: Vector3::z_axis(), rate, phase: 0.0 }
    }

    pub fn angle(&self, t: f64) -> f64 {
        self.phase + self.rate * t
    }

    fn k(&self) -> Matrix3<f64> {
        skew(&self.axis)
    }

    pub fn q(&self, t: f64) -> Matrix3<f64> {
        let (k, th) = (self.k(), self.angle(t));
        Matrix3::identity() + k * th.sin() + k * k * (1.0 - th.cos())
    }

    pub fn q_dot(&self, t: f64) -> Matrix3<f64> {
        let (k, th) = (self.k(), self.angle(t));
        (k * th.cos() + k * k * th.sin()) * self.rate
    }

    pub fn q_ddot(&self, t: f64) -> Matrix3<f64> {
        let (k, th) = (self.k(), self.angle(t));
        (k * k * th.cos() - k * th.sin()) * (self.rate * self.rate)
    }

    /// Spin `Omega = Q Qdot^T`, constant and antisymmetric.
    pub fn spin(&self) -> Matrix3<f64> {
        -self.k() * self.rate
    }

    /// `Q` as an expression of a scalar angle expression.
    pub fn q_of_angle(&self, angle: &FieldExpr) -> FieldExpr {
        let k = self.k();
        let s = build::func(Func::Sin, angle);
        let c = build::sub(&build::scalar(1.0), &build::func(Func::Cos, angle));
        build::sum(
            [FieldExpr::matrix(Matrix3::identity()), build::mul(&s, &FieldExpr::matrix(k)), build::mul(&c, &FieldExpr::matrix(k * k))],
            crate::expr::Shape::Mat3,
        )
    }

    /// `Q` as an expression of the time expression `t`.
    pub fn q_expr(&self, t: &FieldExpr) -> FieldExpr {
        let angle = build::add(&build::scalar(self.phase), &build::mul(&build::scalar(self.rate), t));
        self.q_of_angle(&angle)
    }
}
