//! Symmetry verdicts: the residual of the transformed state at the
//! transformed points.

use serde::Serialize;

use super::flow::{Dim, FlowState, ResidualOperator};
use super::NsError;
use crate::checks::Leg;
use crate::expr::SpaceTimePoint;
use crate::frames::{transform_field, FrameTransform, NsSymmetrySpec, RotationSpec, Viscosity};
use crate::sampling::MIN_VALID_POINTS;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NsVerdict {
    pub solution: String,
    pub transform: String,
    /// Largest residual component of the transformed state.
    pub leg: Leg,
    pub max_continuity: f64,
    pub max_momentum: f64,
    /// Viscosity used for the transformed residual.
    pub nu: f64,
    /// The transform is not a symmetry and leaves frame terms in the equations.
    pub picks_up_frame_terms: bool,
    pub witness: SpaceTimePoint,
    pub valid_points: usize,
    pub tolerance: f64,
}

fn run(state: &FlowState, spec: &FrameTransform, points: &[SpaceTimePoint], tol: f64) -> Result<NsVerdict, NsError> {
    if !state.is_certified() {
        return Err(NsError::NotCertified(state.name.clone()));
    }
    if matches!(spec, FrameTransform::Symmetry(NsSymmetrySpec::S6 { .. })) && state.dim != Dim::Two {
        return Err(NsError::Dimension(format!("{} needs a planar flow, `{}` is 3D", spec.label(), state.name)));
    }
    let rules = spec.field_rules(state.psi.as_ref())?;
    let nu = match rules.viscosity {
        Viscosity::Keep => state.nu,
        Viscosity::Flip => -state.nu,
        Viscosity::Inviscid if state.nu == 0.0 => 0.0,
        Viscosity::Inviscid => return Err(NsError::Viscous { transform: spec.label(), nu: state.nu }),
    };
    let u = transform_field(&state.u, spec, &rules.velocity)?;
    let p = transform_field(&state.p, spec, &rules.pressure)?;
    let op = ResidualOperator::new(&u, &p, nu)?;
    let (mut cont, mut mom, mut witness, mut valid) = (0.0f64, 0.0f64, None, 0usize);
    for p in points {
        let Ok((c, m)) = op.at(&spec.map_point(p)) else { continue };
        valid += 1;
        if witness.is_none() || c.abs().max(m.amax()) > cont.max(mom) {
            witness = Some(*p);
        }
        cont = cont.max(c.abs());
        mom = mom.max(m.amax());
    }
    if valid < MIN_VALID_POINTS {
        return Err(NsError::TooFewPoints { valid, required: MIN_VALID_POINTS });
    }
    let leg = Leg::new(cont.max(mom), tol);
    Ok(NsVerdict {
        solution: state.name.clone(),
        transform: spec.label(),
        leg,
        max_continuity: cont,
        max_momentum: mom,
        nu,
        picks_up_frame_terms: !matches!(spec, FrameTransform::Symmetry(_)) && !leg.pass,
        witness: witness.expect("valid points"),
        valid_points: valid,
        tolerance: tol,
    })
}

/// Builds the transformed fields per the listed rules of `spec` and checks
/// that they solve the transformed equations.
pub fn check_ns_symmetry(state: &FlowState, spec: &NsSymmetrySpec, points: &[SpaceTimePoint], tol: f64) -> Result<NsVerdict, NsError> {
    run(state, &FrameTransform::Symmetry(spec.clone()), points, tol)
}

/// Time-dependent rotation with the coordinate velocity rule and a scalar
/// pressure, without any regauge. It is not a symmetry for 3D flows.
pub fn check_rotation_control(
    state: &FlowState,
    rotation: &RotationSpec,
    points: &[SpaceTimePoint],
    tol: f64,
) -> Result<NsVerdict, NsError> {
    run(state, &FrameTransform::Rotation(*rotation), points, tol)
}
