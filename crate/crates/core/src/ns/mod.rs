//! Incompressible Navier-Stokes equations: exact solutions, symmetry
//! verdicts, Reynolds ensembles and closure screening.

mod closure;
mod ensemble;
mod flow;
pub mod rules;
mod symmetry;

use thiserror::Error;

use crate::expr::SubstError;
use crate::frames::FrameError;

pub use closure::{
    restriction_factors, screen_closure, ClosureModel, ClosureRefs, ClosureReport, ClosureRow, PlanarLimit, CLOSURE_SYMBOLS, DIM_INDICATOR,
    MEAN_VELOCITY,
};
pub use ensemble::{check_decomposed_symmetry, reynolds_tau, DecomposedReport, Ensemble, Mode, ENSEMBLE_SEED, ENSEMBLE_SIZE};
pub use flow::{ns_residual, Dim, FlowState, ResidualOperator, Solution, CERTIFY_TOL, DEFAULT_NU, SHEAR_RATE};
pub use symmetry::{check_ns_symmetry, check_rotation_control, NsVerdict};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NsError {
    #[error("invalid flow state: {0}")]
    InvalidState(String),
    #[error("`{name}` is not an exact solution (residual {residual:e})")]
    NotASolution { name: String, residual: f64 },
    #[error("`{0}` has not been certified as a solution")]
    NotCertified(String),
    #[error("planar flow `{0}` needs a stream function")]
    MissingStreamFunction(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("{transform} holds for the Euler equations only, but nu = {nu}")]
    Viscous { transform: String, nu: f64 },
    #[error("singular point: {0}")]
    Singular(String),
    #[error("only {valid} valid points, at least {required} required")]
    TooFewPoints { valid: usize, required: usize },
    #[error("ensemble needs at least two realizations, found {0}")]
    EmptyEnsemble(usize),
    #[error("ensemble not solenoidal (divergence amplitude {0:e})")]
    NotSolenoidal(f64),
    #[error("invalid closure model: {0}")]
    InvalidModel(String),
    #[error("closure undefined on the {symmetry}-transformed arguments ({valid} valid points, {required} required)")]
    Undefined { symmetry: String, valid: usize, required: usize },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Subst(#[from] SubstError),
}
