//! Exact solutions of the incompressible Navier-Stokes equations and the
//! residual operator.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::NsError;
use crate::expr::{build, parse_field_expr, CompiledExpr, FieldExpr, Shape, SpaceTimePoint};
use crate::sampling::default_points;

/// Both residuals of a library solution stay below this at the default points.
pub const CERTIFY_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Dim {
    #[serde(rename = "2d")]
    Two,
    #[serde(rename = "3d")]
    Three,
}

/// Names of the shipped solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Solution {
    TaylorGreen,
    Beltrami,
    Shear,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub name: String,
    pub u: FieldExpr,
    pub p: FieldExpr,
    /// Kinematic viscosity; negative after time reversal.
    pub nu: f64,
    pub dim: Dim,
    /// Stream function with `dpsi = -u2 dx1 + u1 dx2` (planar flows).
    pub psi: Option<FieldExpr>,
    certified: bool,
}

/// Pointwise residuals `div u` and `dt u + (u . grad) u + grad p - nu lap u`.
#[derive(Clone, Debug)]
pub struct ResidualOperator {
    continuity: CompiledExpr,
    momentum: CompiledExpr,
}

impl ResidualOperator {
    pub fn new(u: &FieldExpr, p: &FieldExpr, nu: f64) -> Result<Self, NsError> {
        if u.shape() != Shape::Vec3 || p.shape() != Shape::Scalar {
            return Err(NsError::InvalidState(format!("u must be vec3 and p scalar, found {} and {}", u.shape(), p.shape())));
        }
        if u.has_symbols() || p.has_symbols() {
            return Err(NsError::InvalidState("flow fields may only depend on x and t".into()));
        }
        let div = FieldExpr::divergence(u).expect("vector field");
        let grad_u = build::grad(u);
        let momentum = build::sum(
            [
                FieldExpr::time_derivative(u),
                build::mul(&grad_u, u),
                build::grad(p),
                build::mul(&build::scalar(-nu), &FieldExpr::laplacian(u)),
            ],
            Shape::Vec3,
        );
        Ok(Self { continuity: CompiledExpr::new(&div), momentum: CompiledExpr::new(&momentum) })
    }

    pub fn at(&self, pt: &SpaceTimePoint) -> Result<(f64, Vector3<f64>), NsError> {
        let b = Default::default();
        let sing = |e: crate::expr::EvalError| NsError::Singular(format!("{e} at t={}, x={:?}", pt.t, pt.x.as_slice()));
        let c = self.continuity.eval(pt, &b).map_err(sing)?.as_scalar().expect("scalar");
        let m = self.momentum.eval(pt, &b).map_err(sing)?.as_vector().expect("vector");
        Ok((c, m))
    }
}

/// `(continuity, momentum)` residuals of a state at one point.
pub fn ns_residual(state: &FlowState, pt: &SpaceTimePoint) -> Result<(f64, Vector3<f64>), NsError> {
    ResidualOperator::new(&state.u, &state.p, state.nu)?.at(pt)
}

fn parse(text: &str) -> FieldExpr {
    parse_field_expr(text).unwrap_or_else(|e| panic!("library expression `{text}`: {e}"))
}

impl FlowState {
    /// A state that has not been certified as a solution.
    pub fn new(name: &str, u: FieldExpr, p: FieldExpr, nu: f64, dim: Dim, psi: Option<FieldExpr>) -> Result<Self, NsError> {
        if !nu.is_finite() {
            return Err(NsError::InvalidState(format!("viscosity must be finite, found {nu}")));
        }
        ResidualOperator::new(&u, &p, nu)?;
        if let Some(psi) = &psi {
            if psi.shape() != Shape::Scalar || psi.has_symbols() {
                return Err(NsError::InvalidState("stream function must be a scalar of x and t".into()));
            }
        }
        Ok(Self { name: name.into(), u, p, nu, dim, psi, certified: false })
    }

    pub fn is_certified(&self) -> bool {
        self.certified
    }

    /// Largest residual (and stream-function defect, for planar states) over
    /// the default points.
    pub fn max_residual(&self) -> Result<f64, NsError> {
        let op = ResidualOperator::new(&self.u, &self.p, self.nu)?;
        let stream = match (&self.psi, self.dim) {
            (Some(psi), Dim::Two) => {
                let u = &self.u;
                let c = |i| build::comp(u, i, None);
                let g = build::grad(psi);
                let defect = build::sub(&g, &build::vec3([FieldExpr::neg(&c(1)), c(0), build::scalar(0.0)]));
                Some(CompiledExpr::new(&defect))
            }
            _ => None,
        };
        let mut worst = 0.0f64;
        for pt in default_points() {
            let (c, m) = op.at(&pt)?;
            worst = worst.max(c.abs()).max(m.amax());
            if let Some(s) = &stream {
                let d = s.eval(&pt, &Default::default()).map_err(|e| NsError::Singular(e.to_string()))?;
                worst = worst.max(d.max_abs());
            }
        }
        Ok(worst)
    }

    /// Certify the state as an exact solution at the default points.
    pub fn certify(mut self) -> Result<Self, NsError> {
        if self.dim == Dim::Two && self.psi.is_none() {
            return Err(NsError::MissingStreamFunction(self.name.clone()));
        }
        let residual = self.max_residual()?;
        if residual > CERTIFY_TOL {
            return Err(NsError::NotASolution { name: self.name.clone(), residual });
        }
        self.certified = true;
        Ok(self)
    }

    /// Planar Taylor-Green vortex.
    pub fn taylor_green(nu: f64) -> Result<Self, NsError> {
        let e = |k: f64| format!("exp({}*t)", -k * nu);
        let u = parse(&format!("vec(sin(x1)*cos(x2)*{0}, -cos(x1)*sin(x2)*{0}, 0)", e(2.0)));
        let p = parse(&format!("0.25*(cos(2*x1) + cos(2*x2))*{}", e(4.0)));
        let psi = parse(&format!("sin(x1)*sin(x2)*{}", e(2.0)));
        Self::new("taylor_green", u, p, nu, Dim::Two, Some(psi))?.certify()
    }

    /// ABC flow with `(A, B, C) = (1, 0.8, 0.6)`, a Beltrami field decaying
    /// as `exp(-nu t)` with `p = -|u|^2 / 2`.
    pub fn beltrami(nu: f64) -> Result<Self, NsError> {
        let u = parse(&format!("exp({}*t)*vec(sin(x3) + 0.6*cos(x2), 0.8*sin(x1) + cos(x3), 0.6*sin(x2) + 0.8*cos(x1))", -nu));
        let p = build::mul(&build::scalar(-0.5), &build::dot(&u, &u));
        Self::new("beltrami", u, p, nu, Dim::Three, None)?.certify()
    }

    /// Steady rigid shear `u = (gamma x2, 0, 0)`, `p = 0`.
    pub fn shear(gamma: f64, nu: f64) -> Result<Self, NsError> {
        let u = parse(&format!("vec({gamma}*x2, 0, 0)"));
        Self::new("shear", u, FieldExpr::scalar(0.0), nu, Dim::Three, None)?.certify()
    }

    /// A library solution with its default parameters.
    pub fn library(which: Solution, nu: f64) -> Result<Self, NsError> {
        match which {
            Solution::TaylorGreen => Self::taylor_green(nu),
            Solution::Beltrami => Self::beltrami(nu),
            Solution::Shear => Self::shear(SHEAR_RATE, nu),
        }
    }
}

/// Default shear rate of the library shear flow.
pub const SHEAR_RATE: f64 = 1.5;
/// Default viscosity of the library solutions.
pub const DEFAULT_NU: f64 = 0.1;
