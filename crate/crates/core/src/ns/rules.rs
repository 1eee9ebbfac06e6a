//! Pointwise action of the symmetries on velocity and pressure values.

use nalgebra::{Matrix3, Vector3};

use crate::frames::NsSymmetrySpec;

/// Homogeneous part `kappa M(t)` of the velocity rule; the fluctuation rule.
pub fn velocity_factor(spec: &NsSymmetrySpec, t: f64) -> (Matrix3<f64>, f64) {
    let id = Matrix3::identity();
    match spec {
        NsSymmetrySpec::G(g) => (g.r, 1.0),
        NsSymmetrySpec::S1 { eps } => (id, (-eps).exp()),
        NsSymmetrySpec::S2 { .. } => (id, 1.0),
        NsSymmetrySpec::S3 { axis } => (NsSymmetrySpec::reflection(*axis), 1.0),
        NsSymmetrySpec::S4 => (id, -1.0),
        NsSymmetrySpec::S5 { a } => (id, a.exp()),
        NsSymmetrySpec::S6 { omega_z } => (NsSymmetrySpec::s6_rotation(*omega_z).q(t), 1.0),
    }
}

/// Multiplier of the homogeneous pressure rule.
pub fn pressure_factor(spec: &NsSymmetrySpec) -> f64 {
    match spec {
        NsSymmetrySpec::S1 { eps } => (-2.0 * eps).exp(),
        NsSymmetrySpec::S5 { a } => (2.0 * a).exp(),
        _ => 1.0,
    }
}

/// Transformed velocity of a full (instantaneous) field value at `(t, x)`.
pub fn velocity(spec: &NsSymmetrySpec, t: f64, x: &Vector3<f64>, u: &Vector3<f64>) -> Vector3<f64> {
    let (m, k) = velocity_factor(spec, t);
    let offset = match spec {
        NsSymmetrySpec::G(g) => g.v,
        NsSymmetrySpec::S2 { f, .. } => f.vector_rate(t),
        NsSymmetrySpec::S6 { omega_z } => NsSymmetrySpec::s6_rotation(*omega_z).q_dot(t) * x,
        _ => Vector3::zeros(),
    };
    k * m * u + offset
}

/// Transformed pressure of a full field value; `psi` is the stream function
/// value, used by S6 only.
pub fn pressure(spec: &NsSymmetrySpec, t: f64, x: &Vector3<f64>, p: f64, psi: f64) -> f64 {
    let base = pressure_factor(spec) * p;
    match spec {
        NsSymmetrySpec::S2 { f, g } => base - x.dot(&f.vector_accel(t)) + g.value(t).as_scalar().expect("scalar path"),
        NsSymmetrySpec::S6 { omega_z } => {
            let xn = spec.map(t, x).1;
            base + 0.5 * omega_z * omega_z * xn.xy().norm_squared() + 2.0 * omega_z * psi
        }
        _ => base,
    }
}

/// Decomposed pressure-fluctuation rule.
pub fn pressure_fluctuation(spec: &NsSymmetrySpec, p: f64, psi: f64) -> f64 {
    let base = pressure_factor(spec) * p;
    match spec {
        NsSymmetrySpec::S6 { omega_z } => base + 2.0 * omega_z * psi,
        _ => base,
    }
}

/// Divergence-of-stress rule `(M, kappa)`: `div~ tau~ = kappa M div tau`.
pub fn stress_divergence_factor(spec: &NsSymmetrySpec, t: f64) -> (Matrix3<f64>, f64) {
    let (m, _) = velocity_factor(spec, t);
    let scale = match spec {
        NsSymmetrySpec::S1 { eps } => (-3.0 * eps).exp(),
        NsSymmetrySpec::S5 { a } => a.exp(),
        _ => 1.0,
    };
    (m, scale)
}
