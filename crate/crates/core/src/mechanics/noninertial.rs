//! Frame-indifference of force laws, Galilean covariance of solutions and
//! the inertial forces of Euclidean frame changes.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::model::{ForceModel, ModelKind};
use super::trajectory::{integrate, transform_trajectory, FrameChange, State, Trajectory};
use super::MechanicsError;
use crate::checks::{Leg, LegReport};
use crate::expr::SpaceTimePoint;
use crate::frames::{EuclideanSpec, GalileiSpec};

/// Default tolerance of the non-inertial closure residual.
pub const CLOSURE_TOL: f64 = 1e-5;

const VELOCITY_SEED: u64 = 0x7E10C17E;

/// How reference values are treated by a frame change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RefConvention {
    /// Mapped like the position, velocity and time they refer to.
    Transported,
    /// Kept at their original values.
    Frozen,
}

/// Which inertial-force terms enter the non-inertial equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InertialTerms {
    Full,
    /// Without the contribution `-a R Rdot^T (x* - c)` of the drag law.
    WithoutDragTerm,
}

fn worst(residuals: impl Iterator<Item = (SpaceTimePoint, Option<f64>)>, tol: f64) -> Result<LegReport, MechanicsError> {
    let mut best: Option<(f64, SpaceTimePoint)> = None;
    let mut valid = 0;
    for (p, r) in residuals {
        if let Some(r) = r {
            valid += 1;
            if best.is_none_or(|(w, _)| r > w) {
                best = Some((r, p));
            }
        }
    }
    let (r, p) = best.ok_or(MechanicsError::TooShort(0))?;
    Ok(LegReport { leg: Leg::new(r, tol), witness: p, valid_points: valid })
}

/// Tests `F(x', xdot', t'; refs') = R F(x, xdot, t; refs)` at the sample
/// points, with seeded particle velocities.
pub fn check_force_frame_indifference(
    model: &ForceModel,
    g: &GalileiSpec,
    points: &[SpaceTimePoint],
    tol: f64,
    convention: RefConvention,
) -> Result<LegReport, MechanicsError> {
    let moved = match convention {
        RefConvention::Transported => model.with_refs(model.refs.transported(g)),
        RefConvention::Frozen => model.clone(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(VELOCITY_SEED);
    let change = FrameChange::Galilei(*g);
    let res: Vec<_> = points
        .iter()
        .map(|p| {
            let v = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            let s = change.map_state(&State::new(p.t, p.x, v));
            let r = (|| {
                let f = model.force(p.t, &p.x, &v).ok()?;
                let f2 = moved.force(s.t, &s.x, &s.v).ok()?;
                Some((f2 - g.r * f).amax())
            })();
            (*p, r)
        })
        .collect();
    worst(res.into_iter(), tol)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovarianceReport {
    /// Largest state difference between the mapped solution and the
    /// solution of the mapped problem.
    pub residual: f64,
    /// `dt^4` times the state magnitude.
    pub scale: f64,
    pub pass: bool,
}

/// Integrates the problem, maps the solution with `g`, and compares it with
/// the solution of the mapped problem (transported references, mapped
/// initial state). Passes within ten times the `dt^4` error scale.
pub fn check_galilean_covariance(
    model: &ForceModel,
    ic: State,
    dt: f64,
    n_steps: usize,
    g: &GalileiSpec,
) -> Result<CovarianceReport, MechanicsError> {
    let change = FrameChange::Galilei(*g);
    let mapped = transform_trajectory(&integrate(model, ic, dt, n_steps)?, &change);
    let moved = model.with_refs(model.refs.transported(g));
    let direct = integrate(&moved, change.map_state(&ic), dt, n_steps)?;
    let (mut residual, mut size) = (0.0f64, 0.0f64);
    for (a, b) in mapped.samples.iter().zip(&direct.samples) {
        residual = residual.max((a.x - b.x).amax()).max((a.v - b.v).amax());
        size = size.max(a.x.amax()).max(a.v.amax());
    }
    let scale = dt.powi(4) * (1.0 + size);
    Ok(CovarianceReport { residual, scale, pass: residual <= 10.0 * scale })
}

/// `m cddot - m R Rddot^T (x* - c) - 2 m R Rdot^T (xdot* - cdot) - a R Rdot^T (x* - c)`
/// at the starred state.
pub fn inertial_force(spec: &EuclideanSpec, state: &State, m: f64, a: f64) -> Vector3<f64> {
    inertial_terms(spec, state, m, a, InertialTerms::Full)
}

fn inertial_terms(spec: &EuclideanSpec, s: &State, m: f64, a: f64, terms: InertialTerms) -> Vector3<f64> {
    let t = s.t - spec.tau;
    let (r, rd, rdd) = (spec.r(t), spec.r_dot(t), spec.r_ddot(t));
    let (c, cd, cdd) = (spec.c(t), spec.c_dot(t), spec.c_ddot(t));
    let rel = s.x - c;
    let mut f = cdd * m - r * rdd.transpose() * rel * m - r * rd.transpose() * (s.v - cd) * (2.0 * m);
    if terms == InertialTerms::Full {
        f -= r * rd.transpose() * rel * a;
    }
    f
}

/// Maps an inertial drag-gravity solution with `spec` and evaluates the
/// starred equation of motion along the path, with the acceleration taken
/// from fourth-order central differences of the mapped positions.
pub fn check_noninertial_closure(
    model: &ForceModel,
    spec: &EuclideanSpec,
    traj: &Trajectory,
    tol: f64,
    terms: InertialTerms,
) -> Result<LegReport, MechanicsError> {
    let ModelKind::DragGravity { a, g } = model.kind else {
        return Err(MechanicsError::InvalidModel("the closure check needs the drag-gravity model".into()));
    };
    let n = traj.samples.len();
    if n < 5 {
        return Err(MechanicsError::TooShort(n));
    }
    let m = model.mass;
    let star = transform_trajectory(traj, &FrameChange::Euclidean(spec.clone())).samples;
    let h2 = 12.0 * traj.dt * traj.dt;
    let res = (2..n - 2).map(|k| {
        let s = &star[k];
        let acc = (-star[k + 2].x + star[k + 1].x * 16.0 - s.x * 30.0 + star[k - 1].x * 16.0 - star[k - 2].x) / h2;
        let t = s.t - spec.tau;
        let x0r = spec.r(t) * model.refs.point(t) + spec.c(t);
        let v0r = spec.r(t) * model.refs.v0r + spec.c_dot(t);
        let d = s.x - x0r;
        let rhs = -(s.v - v0r) * a - d * (m * g / d.norm()) + inertial_terms(spec, s, m, a, terms);
        let r = (acc * m - rhs).amax();
        (SpaceTimePoint::new(s.t, s.x), r.is_finite().then_some(r))
    });
    worst(res, tol)
}
