//! The classification matrix of scalar, vector and rank-2 quantities under
//! rotations, with the expected outcome of each leg.

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

use super::classify::{Verdict, FAIL_THRESHOLD};
use super::quantity::{FieldArg, FieldLaw, Quantity};
use crate::expr::{parse_with, FieldExpr, Shape, SymbolTable};
use crate::frames::{skew, RuleKind, VarianceRule};

/// Generic time-dependent velocity with nonvanishing `lap(dL11/dx1)`.
pub const GENERIC_VELOCITY: &str = "vec(x1^3 + x3*sin(x2) + t*x2, x3^2*cos(x1) - x1*x2, x1*x2*exp(t) + x3)";

/// Non-isotropic potential for the gradient row.
pub const ANISOTROPIC_POTENTIAL: &str = "x1^2*x2 + sin(x3)";
/// Isotropic potential for the gradient row.
pub const ISOTROPIC_POTENTIAL: &str = "exp(-0.5*dot(x,x))";

/// Expected outcome of each leg; `None` where the leg does not apply.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Expectation {
    pub tensor: bool,
    pub objective: bool,
    pub relative: Option<bool>,
}

impl Expectation {
    /// A verdict matches when every PASS leg is within its tolerance and
    /// every FAIL leg exceeds the fail threshold.
    pub fn matches(&self, v: &Verdict) -> bool {
        let leg = |want: bool, pass: bool, r: f64| if want { pass } else { r > FAIL_THRESHOLD };
        leg(self.tensor, v.tensor.pass, v.tensor.residual)
            && leg(self.objective, v.objective.pass, v.objective.residual)
            && match (self.relative, v.relative_objective) {
                (None, None) => true,
                (Some(want), Some(l)) => leg(want, l.pass, l.residual),
                _ => false,
            }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CatalogueEntry {
    pub quantity: Quantity,
    pub expected: Expectation,
}

/// Spin of the original frame for the relative quantities.
pub fn reference_spin() -> Matrix3<f64> {
    skew(&Vector3::new(0.3, -0.5, 0.4))
}

fn table() -> SymbolTable {
    SymbolTable::standard().with("phi", Shape::Scalar).with("f", Shape::Vec3)
}

/// Parse a definition over the catalogue symbols `u`, `phi`, `f` and `Omega`.
pub fn definition(text: &str) -> FieldExpr {
    parse_with(text, &table()).unwrap_or_else(|e| panic!("catalogue expression `{text}`: {e}"))
}

fn rule(kind: RuleKind) -> VarianceRule {
    VarianceRule::new(kind)
}

fn with_velocity(q: Quantity, u: &FieldExpr) -> Quantity {
    q.with_field(FieldArg::inner("u", u.clone(), FieldLaw::Velocity))
}

fn potential(name: &str, phi: &str) -> Quantity {
    Quantity::new(name, definition("grad(phi)"), rule(RuleKind::Cov1)).with_field(FieldArg::specified(
        "phi",
        definition(phi),
        FieldLaw::Rule(rule(RuleKind::Scalar)),
    ))
}

/// All rows with the generic velocity `u`.
pub fn classification_catalogue(u: &FieldExpr) -> Vec<CatalogueEntry> {
    let e = |tensor, objective, relative| Expectation { tensor, objective, relative };
    let vel = |name: &str, def: &str, kind: RuleKind| with_velocity(Quantity::new(name, definition(def), rule(kind)), u);
    let spin = reference_spin();
    vec![
        CatalogueEntry { quantity: Quantity::new("phi", definition("norm(x)"), rule(RuleKind::Scalar)), expected: e(true, true, None) },
        CatalogueEntry { quantity: potential("G", ANISOTROPIC_POTENTIAL), expected: e(true, false, None) },
        CatalogueEntry { quantity: potential("G_iso", ISOTROPIC_POTENTIAL), expected: e(true, true, None) },
        CatalogueEntry { quantity: vel("u", "u", RuleKind::Contra1), expected: e(false, false, None) },
        CatalogueEntry { quantity: vel("u_Omega", "u + Omega*x", RuleKind::Contra1).with_spin(spin), expected: e(true, false, Some(true)) },
        CatalogueEntry { quantity: vel("S", "0.5*(grad(u) + transpose(grad(u)))", RuleKind::Rank2), expected: e(true, true, None) },
        CatalogueEntry { quantity: vel("W", "0.5*(grad(u) - transpose(grad(u)))", RuleKind::Rank2), expected: e(false, false, None) },
        CatalogueEntry {
            quantity: vel("W_Omega", "0.5*((grad(u) + Omega) - transpose(grad(u) + Omega))", RuleKind::Rank2).with_spin(spin),
            expected: e(true, false, Some(true)),
        },
        CatalogueEntry {
            quantity: vel("Z", "outer(vec(1,0,0), vec(1,0,0))*lap(comp(grad(u),1,1))", RuleKind::Rank2),
            expected: e(true, false, None),
        },
    ]
}

/// `norm(f)` with the inner field `f = (x1, 0, 0)`.
pub fn composite_norm() -> Quantity {
    Quantity::new("norm_f", definition("norm(f)"), rule(RuleKind::Scalar)).with_field(FieldArg::inner(
        "f",
        definition("vec(x1, 0, 0)"),
        FieldLaw::Rule(rule(RuleKind::Contra1)),
    ))
}
