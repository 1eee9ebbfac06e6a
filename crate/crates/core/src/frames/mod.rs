//! Catalogue of frame changes and Navier-Stokes symmetries: coordinate maps,
//! inverses, Jacobians and field transformation rules.

mod galilei;
mod rotation;
mod symmetry;
mod transform;

use thiserror::Error;

use crate::expr::Shape;

pub use galilei::{EuclideanSpec, GalileiSpec, TimePath, ORTHO_TOL};
pub use rotation::{axial, skew, RotationSpec};
pub use symmetry::NsSymmetrySpec;
pub use transform::{transform_field, velocity_rule_for, FieldRules, FrameTransform, RuleKind, VarianceRule, VelocityRule, Viscosity};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FrameError {
    #[error("rotation axis must be nonzero")]
    ZeroAxis,
    #[error("matrix is not a proper rotation (orthogonality defect {defect:e})")]
    NotRotation { defect: f64 },
    #[error("non-finite parameter in {0} spec")]
    NonFinite(&'static str),
    #[error("{what} must be a {expected} expression, found {found}")]
    PathShape { what: &'static str, expected: Shape, found: Shape },
    #[error("{0} must depend on t only")]
    PathNotOfTime(&'static str),
    #[error("S2 requires a path f(t) with nonvanishing second derivative")]
    ZeroAcceleration,
    #[error("reflection axis {0} out of range (expected 1..3)")]
    BadAxis(usize),
    #[error("rule {rule} cannot act on a {shape} field")]
    IncompatibleRule { rule: &'static str, shape: Shape },
    #[error("S6 pressure regauge needs the stream function psi")]
    MissingStreamFunction,
}
