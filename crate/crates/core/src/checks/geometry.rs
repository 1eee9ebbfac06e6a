//! Curvilinear charts, affine connections and the covariant derivative, plus
//! the geometric invariance cases for points, differences and differentials.

use std::f64::consts::PI;

use nalgebra::{Matrix3, Matrix4, Vector3, Vector4};
use serde::Serialize;

use super::classify::{Leg, LegReport, FAIL_THRESHOLD};
use super::CheckError;
use crate::expr::{build, compose, differentiate, CompiledExpr, FieldExpr, Func, Shape, SpaceTimePoint, TensorValue, Wrt};
use crate::frames::RotationSpec;
use crate::sampling::{sample_points, MIN_VALID_POINTS};

/// Residual bound for an exact geometric invariance.
pub const INVARIANT_TOL: f64 = 1e-10;

/// Chart coordinates `y` with a closed-form Cartesian position `X(y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Chart {
    Identity,
    /// `y = (r, theta, phi)`, polar angle `theta` from the third axis.
    Spherical,
    /// `y = (rho, phi, z)`.
    Cylindrical,
    /// `X = R y` for a fixed rotation `R`.
    FrozenRotation(Matrix3<f64>),
}

impl Chart {
    pub fn name(&self) -> &'static str {
        match self {
            Chart::Identity => "identity",
            Chart::Spherical => "spherical",
            Chart::Cylindrical => "cylindrical",
            Chart::FrozenRotation(_) => "rotation",
        }
    }

    /// `X(y)` as an expression in the coordinate `x = y`.
    pub fn to_cartesian_expr(&self) -> FieldExpr {
        let y = FieldExpr::coord_component;
        let (sin, cos) = (|e: &FieldExpr| build::func(Func::Sin, e), |e: &FieldExpr| build::func(Func::Cos, e));
        match self {
            Chart::Identity => FieldExpr::coord(),
            Chart::Spherical => {
                let (r, th, ph) = (y(0), y(1), y(2));
                let rs = build::mul(&r, &sin(&th));
                build::vec3([build::mul(&rs, &cos(&ph)), build::mul(&rs, &sin(&ph)), build::mul(&r, &cos(&th))])
            }
            Chart::Cylindrical => {
                let (rho, ph) = (y(0), y(1));
                build::vec3([build::mul(&rho, &cos(&ph)), build::mul(&rho, &sin(&ph)), y(2)])
            }
            Chart::FrozenRotation(r) => build::mul(&FieldExpr::matrix(*r), &FieldExpr::coord()),
        }
    }

    /// Chart coordinates of a Cartesian point.
    pub fn from_cartesian(&self, x: &Vector3<f64>) -> Vector3<f64> {
        match self {
            Chart::Identity => *x,
            Chart::Spherical => {
                let r = x.norm();
                Vector3::new(r, (x.z / r).clamp(-1.0, 1.0).acos(), x.y.atan2(x.x))
            }
            Chart::Cylindrical => Vector3::new(x.x.hypot(x.y), x.y.atan2(x.x), x.z),
            Chart::FrozenRotation(r) => r.transpose() * x,
        }
    }

    /// Seeded chart-coordinate samples away from the coordinate singularities.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<SpaceTimePoint> {
        let lerp = |u: f64, a: f64, b: f64| a + 0.5 * (u + 1.0) * (b - a);
        sample_points(n, seed)
            .into_iter()
            .map(|p| {
                let u = p.x;
                let y = match self {
                    Chart::Identity | Chart::FrozenRotation(_) => u,
                    Chart::Spherical => Vector3::new(lerp(u.x, 0.5, 2.0), lerp(u.y, 0.3, PI - 0.3), lerp(u.z, -PI, PI)),
                    Chart::Cylindrical => Vector3::new(lerp(u.x, 0.5, 2.0), lerp(u.y, -PI, PI), u.z),
                };
                SpaceTimePoint::new(0.0, y)
            })
            .collect()
    }

    /// Closed-form connection of the chart for a flat Cartesian space.
    pub fn reference_christoffel(&self, y: &Vector3<f64>) -> Christoffel {
        let mut g = Christoffel::zero();
        match self {
            Chart::Identity | Chart::FrozenRotation(_) => {}
            Chart::Spherical => {
                let (r, th) = (y.x, y.y);
                let (s, c) = th.sin_cos();
                g.0[0][1][1] = -r;
                g.0[0][2][2] = -r * s * s;
                g.set_sym(1, 0, 1, 1.0 / r);
                g.0[1][2][2] = -s * c;
                g.set_sym(2, 0, 2, 1.0 / r);
                g.set_sym(2, 1, 2, c / s);
            }
            Chart::Cylindrical => {
                g.0[0][1][1] = -y.x;
                g.set_sym(1, 0, 1, 1.0 / y.x);
            }
        }
        g
    }
}

/// Connection coefficients `G[mu][alpha][beta]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Christoffel(pub [[[f64; 3]; 3]; 3]);

impl Christoffel {
    pub fn zero() -> Self {
        Self([[[0.0; 3]; 3]; 3])
    }

    fn set_sym(&mut self, mu: usize, a: usize, b: usize, v: f64) {
        self.0[mu][a][b] = v;
        self.0[mu][b][a] = v;
    }

    pub fn get(&self, mu: usize, a: usize, b: usize) -> f64 {
        self.0[mu][a][b]
    }

    pub fn max_abs_diff(&self, other: &Christoffel) -> f64 {
        let mut m = 0.0f64;
        for mu in 0..3 {
            for a in 0..3 {
                for b in 0..3 {
                    m = m.max((self.0[mu][a][b] - other.0[mu][a][b]).abs());
                }
            }
        }
        m
    }
}

/// Compiled position, Jacobian `J_ij = dX_i/dy_j` and second derivatives of a chart.
pub struct ChartMap {
    pub chart: Chart,
    position: CompiledExpr,
    jacobian: CompiledExpr,
    hessians: [CompiledExpr; 3],
}

impl ChartMap {
    pub fn new(chart: Chart) -> Self {
        let x = chart.to_cartesian_expr();
        let hessians = std::array::from_fn(|i| {
            let xi = build::comp(&x, i, None);
            CompiledExpr::new(&build::grad(&build::grad(&xi)))
        });
        Self { chart, position: CompiledExpr::new(&x), jacobian: CompiledExpr::new(&build::grad(&x)), hessians }
    }

    fn eval(e: &CompiledExpr, y: &Vector3<f64>) -> TensorValue {
        e.eval(&SpaceTimePoint::new(0.0, *y), &Default::default()).expect("chart expressions are closed")
    }

    pub fn position(&self, y: &Vector3<f64>) -> Vector3<f64> {
        Self::eval(&self.position, y).as_vector().expect("vec3")
    }

    pub fn jacobian(&self, y: &Vector3<f64>) -> Matrix3<f64> {
        Self::eval(&self.jacobian, y).as_matrix().expect("mat3")
    }

    /// `H[rho][(alpha, beta)] = d^2 X_rho / dy_alpha dy_beta`.
    pub fn second_derivatives(&self, y: &Vector3<f64>) -> [Matrix3<f64>; 3] {
        std::array::from_fn(|k| Self::eval(&self.hessians[k], y).as_matrix().expect("mat3"))
    }
}

/// Connection in chart coordinates at `y`, given the Cartesian connection
/// `gamma` at `X(y)`: `G~ = J^-1 (J J gamma + d^2 X)`.
#[allow(clippy::needless_range_loop)]
pub fn christoffel_transform(gamma: &Christoffel, map: &ChartMap, y: &Vector3<f64>) -> Result<Christoffel, CheckError> {
    let j = map.jacobian(y);
    let jinv = j.try_inverse().filter(|_| j.determinant().abs() > 1e-12).ok_or(CheckError::SingularJacobian(y.x, y.y, y.z))?;
    let h = map.second_derivatives(y);
    let mut inner = [[[0.0; 3]; 3]; 3];
    for rho in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                let mut s = h[rho][(a, b)];
                for sg in 0..3 {
                    for tu in 0..3 {
                        s += j[(sg, a)] * j[(tu, b)] * gamma.0[rho][sg][tu];
                    }
                }
                inner[rho][a][b] = s;
            }
        }
    }
    let mut out = Christoffel::zero();
    for mu in 0..3 {
        for a in 0..3 {
            for b in 0..3 {
                out.0[mu][a][b] = (0..3).map(|rho| jinv[(mu, rho)] * inner[rho][a][b]).sum();
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CovariantReport {
    /// Covariant derivative against the rank-2 covariant rule.
    pub covariant: LegReport,
    /// Bare partial derivative against the same rule.
    pub partial: LegReport,
}

/// Tests the rank-2 covariant law for the derivative of a Cartesian covector
/// field `a` expressed in `chart`, with and without the connection term.
/// Points are chart coordinates.
pub fn check_covariant_derivative(
    a: &FieldExpr,
    chart: &Chart,
    points: &[SpaceTimePoint],
    tol: f64,
) -> Result<CovariantReport, CheckError> {
    if a.shape() != Shape::Vec3 || a.has_symbols() {
        return Err(CheckError::Invalid(format!("covector field must be a closed vec3 expression, found {a}")));
    }
    let map = ChartMap::new(*chart);
    let x = chart.to_cartesian_expr();
    let jt = build::transpose(&build::grad(&x));
    let a_tilde = build::mul(&jt, &compose(a, &x, &FieldExpr::time()));
    let a_tilde_c = CompiledExpr::new(&a_tilde);
    let partial = CompiledExpr::new(&build::grad(&a_tilde));
    let d = compose(&build::grad(a), &x, &FieldExpr::time());
    let pred = CompiledExpr::new(&build::mul(&build::mul(&jt, &d), &build::transpose(&jt)));
    let b = Default::default();
    let mut cov = Vec::with_capacity(points.len());
    let mut part = Vec::with_capacity(points.len());
    for p in points {
        let g = christoffel_transform(&Christoffel::zero(), &map, &p.x)?;
        let vals = (|| {
            let at = a_tilde_c.eval(p, &b).ok()?.as_vector()?;
            let dp = partial.eval(p, &b).ok()?.as_matrix()?;
            let pr = pred.eval(p, &b).ok()?.as_matrix()?;
            let c = Matrix3::from_fn(|al, be| dp[(al, be)] - (0..3).map(|mu| g.0[mu][al][be] * at[mu]).sum::<f64>());
            let ok = c.iter().chain(dp.iter()).chain(pr.iter()).all(|v| v.is_finite());
            ok.then(|| ((c - pr).amax(), (dp - pr).amax()))
        })();
        cov.push(vals.map(|v| v.0));
        part.push(vals.map(|v| v.1));
    }
    Ok(CovariantReport { covariant: reduce(points, &cov, tol)?, partial: reduce(points, &part, tol)? })
}

fn reduce(points: &[SpaceTimePoint], r: &[Option<f64>], tol: f64) -> Result<LegReport, CheckError> {
    let mut worst: Option<(f64, SpaceTimePoint)> = None;
    let mut valid = 0;
    for (p, r) in points.iter().zip(r) {
        if let Some(r) = *r {
            valid += 1;
            if worst.is_none_or(|(w, _)| r > w) {
                worst = Some((r, *p));
            }
        }
    }
    match worst {
        Some((w, p)) if valid >= MIN_VALID_POINTS => Ok(LegReport { leg: Leg::new(w, tol), witness: p, valid_points: valid }),
        _ => Err(CheckError::TooFewPoints { valid, required: MIN_VALID_POINTS }),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometricCase {
    pub frame: String,
    pub object: String,
    pub expected_invariant: bool,
    /// Largest reconstruction error of the object over the sample.
    pub residual: f64,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GeometricReport {
    pub points: usize,
    pub cases: Vec<GeometricCase>,
}

impl GeometricReport {
    pub fn all_match(&self) -> bool {
        self.cases.iter().all(|c| c.matches)
    }

    pub fn case(&self, frame: &str, object: &str) -> Option<&GeometricCase> {
        self.cases.iter().find(|c| c.frame == frame && c.object == object)
    }
}

const SUITE_POINTS: usize = 100;
const SUITE_SEED: u64 = 0xA11CE;

fn case(frame: &str, object: &str, expected_invariant: bool, residuals: impl Iterator<Item = f64>) -> GeometricCase {
    let residual = residuals.fold(0.0f64, f64::max);
    let matches = if expected_invariant { residual <= INVARIANT_TOL } else { residual > FAIL_THRESHOLD };
    GeometricCase { frame: frame.into(), object: object.into(), expected_invariant, residual, matches }
}

/// Rotation of the time-dependent frame case.
pub(crate) fn suite_rotation() -> RotationSpec {
    RotationSpec::new(Vector3::new(1.0, 1.0, 1.0), 1.0, 0.0).expect("nonzero axis")
}

/// Observes points, differences and differentials from a sequence of frames
/// and reports which objects are reconstructed unchanged from the new
/// components and basis. Components relative to a basis `g~_i = (A^-T)_i^j g_j`
/// reconstruct the vector `A^-1 x~` in the original basis.
pub fn geometric_invariance_suite() -> GeometricReport {
    let pts = sample_points(SUITE_POINTS, SUITE_SEED);
    let step = Vector3::new(0.3, -0.2, 0.1);
    let mut cases = Vec::new();

    let a = Matrix3::new(2.0, 0.5, 0.0, -0.3, 1.0, 0.4, 0.1, 0.0, 1.5);
    let ainv = a.try_inverse().expect("invertible");
    cases.push(case("linear", "point", true, pts.iter().map(|p| (ainv * (a * p.x) - p.x).amax())));
    cases.push(case("linear", "difference", true, pts.iter().map(|p| (ainv * (a * (p.x + step) - a * p.x) - step).amax())));

    let b = Vector3::new(1.0, 0.0, 0.0);
    cases.push(case("shift", "point", false, pts.iter().map(|p| ((p.x + b) - p.x).amax())));
    cases.push(case("shift", "difference", true, pts.iter().map(|p| (((p.x + step + b) - (p.x + b)) - step).amax())));

    // Curvilinear frame: spherical coordinates y*(x) with local basis
    // g*_i(x) = (K^T)_i^j g_j, K = dX/dy* the chart Jacobian.
    let chart = Chart::Spherical;
    let map = ChartMap::new(chart);
    let ys = chart.sample(SUITE_POINTS, SUITE_SEED);
    let recon = |x: &Vector3<f64>| {
        let y = chart.from_cartesian(x);
        map.jacobian(&y) * y
    };
    cases.push(case(
        "curvilinear",
        "difference",
        false,
        ys.iter().map(|p| {
            let x1 = map.position(&p.x);
            let x2 = x1 + step;
            (recon(&x2) - recon(&x1) - step).amax()
        }),
    ));
    cases.push(case(
        "curvilinear",
        "differential",
        true,
        ys.iter().map(|p| {
            let k = map.jacobian(&p.x);
            let dy = k.try_inverse().expect("regular chart point") * step;
            (k * dy - step).amax()
        }),
    ));

    // Time-dependent frame x~ = A(t) x: the 3D differential picks up A' x dt.
    let rot = suite_rotation();
    cases.push(case(
        "time-dependent",
        "differential",
        false,
        pts.iter().map(|p| {
            let (q, qd) = (rot.q(p.t), rot.q_dot(p.t));
            let dt = 1.0;
            let dx_new = q * step + qd * p.x * dt;
            (q.transpose() * dx_new - step).norm()
        }),
    ));
    cases.push(case(
        "time-dependent 4D",
        "differential",
        true,
        pts.iter().map(|p| {
            let lam = lambda(&rot, p);
            let dx4 = Vector4::new(1.0, step.x, step.y, step.z);
            let back = lam.try_inverse().expect("invertible 4D Jacobian") * (lam * dx4);
            (back - dx4).amax()
        }),
    ));
    cases.push(velocity_4d_case(&rot, &pts));
    GeometricReport { points: SUITE_POINTS, cases }
}

/// Jacobian of `(t, x) -> (t, A(t) x)`.
fn lambda(rot: &RotationSpec, p: &SpaceTimePoint) -> Matrix4<f64> {
    let (q, qd) = (rot.q(p.t), rot.q_dot(p.t));
    let col0 = qd * p.x;
    Matrix4::from_fn(|i, j| match (i, j) {
        (0, 0) => 1.0,
        (0, _) => 0.0,
        (_, 0) => col0[i - 1],
        _ => q[(i - 1, j - 1)],
    })
}

/// The space-time velocity `(1, u)` of a straight trajectory, observed in
/// the rotating frame by differentiating the mapped path, against `Lambda (1, u)`.
fn velocity_4d_case(rot: &RotationSpec, pts: &[SpaceTimePoint]) -> GeometricCase {
    let u = Vector3::new(0.7, -0.4, 0.25);
    let q_t = rot.q_expr(&FieldExpr::time());
    let residuals = pts.iter().map(|p| {
        let path =
            build::add(&FieldExpr::vector(p.x), &build::mul(&FieldExpr::vector(u), &build::sub(&FieldExpr::time(), &build::scalar(p.t))));
        let mapped = build::mul(&q_t, &path);
        let vel = CompiledExpr::new(&differentiate(&mapped, Wrt::T));
        let observed = vel.eval(p, &Default::default()).ok().and_then(|v| v.as_vector()).expect("closed path");
        let predicted = lambda(rot, p) * Vector4::new(1.0, u.x, u.y, u.z);
        let obs4 = Vector4::new(1.0, observed.x, observed.y, observed.z);
        (obs4 - predicted).amax()
    });
    case("time-dependent 4D", "velocity", true, residuals)
}
