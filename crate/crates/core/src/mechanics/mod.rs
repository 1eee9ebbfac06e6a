//! Newtonian mechanics of a single particle: constitutive force laws,
//! integration, Galilei and Euclidean frame changes and inertial forces.

mod model;
mod noninertial;
mod trajectory;

use thiserror::Error;

pub use model::{ForceModel, ModelKind, References, Structure, INVARIANTS, VELOCITY};
pub use noninertial::{
    check_force_frame_indifference, check_galilean_covariance, check_noninertial_closure, inertial_force, CovarianceReport, InertialTerms,
    RefConvention, CLOSURE_TOL,
};
pub use trajectory::{integrate, transform_trajectory, FrameChange, State, Trajectory};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum MechanicsError {
    #[error("time step must be positive and finite, found {0}")]
    NonPositiveStep(f64),
    #[error("force is singular or non-finite at t = {t}")]
    Singular { t: f64 },
    #[error("invalid force model: {0}")]
    InvalidModel(String),
    #[error("trajectory times are not uniform at sample {index}")]
    NonUniform { index: usize },
    #[error("trajectory has {0} samples, at least 5 are needed")]
    TooShort(usize),
}
