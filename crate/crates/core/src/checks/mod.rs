//! Classifiers separating form-invariance (the tensor property) from
//! frame-indifference, plus curvilinear-chart and geometric invariance checks.

mod catalogue;
mod classify;
mod geometry;
mod quantity;

use thiserror::Error;

use crate::expr::SubstError;
use crate::frames::FrameError;

pub use catalogue::{
    classification_catalogue, composite_norm, definition, reference_spin, CatalogueEntry, Expectation, ANISOTROPIC_POTENTIAL,
    GENERIC_VELOCITY, ISOTROPIC_POTENTIAL,
};
pub use classify::{
    check_form_invariance, check_objectivity, check_relative_objectivity, classify, tensor_defects, Leg, LegReport, ObjectivityMode,
    RelativeReport, Verdict, DEFAULT_TOL, FAIL_THRESHOLD,
};
pub use geometry::{
    check_covariant_derivative, christoffel_transform, geometric_invariance_suite, Chart, ChartMap, Christoffel, CovariantReport,
    GeometricCase, GeometricReport, INVARIANT_TOL,
};
pub use quantity::{FieldArg, FieldLaw, FieldRole, Param, ParamLaw, Quantity, SPIN_SYMBOL};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum CheckError {
    #[error("invalid quantity: {0}")]
    Invalid(String),
    #[error("symbol `{0}` is not declared as a field or parameter")]
    Undeclared(String),
    #[error("free field `{0}` has no closed form and cannot be differentiated")]
    FreeFieldDifferentiated(String),
    #[error("only {valid} valid sample points, {required} required")]
    TooFewPoints { valid: usize, required: usize },
    #[error("full objectivity mode needs a specified expression for field `{0}`")]
    FullModeNeedsField(String),
    #[error("quantity `{0}` carries no spin term")]
    NotRelative(String),
    #[error("quantity `{quantity}` is objective but not a tensor under coordinate transform {transform}")]
    ImplicationViolated { quantity: String, transform: String },
    #[error("singular chart Jacobian at ({0}, {1}, {2})")]
    SingularJacobian(f64, f64, f64),
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Subst(#[from] SubstError),
}
