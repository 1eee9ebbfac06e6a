//! Quantities under test: a defining expression over named fields and
//! parameters, with the component law it is claimed to obey.

use nalgebra::Matrix3;

use super::CheckError;
use crate::expr::{FieldExpr, Node, Shape, TensorValue};
use crate::frames::VarianceRule;

/// Symbol standing for the spin of the frame in relative quantities.
pub const SPIN_SYMBOL: &str = "Omega";

/// Transformation law of a field argument.
#[derive(Clone, Debug, PartialEq)]
pub enum FieldLaw {
    /// The transform's velocity rule.
    Velocity,
    Rule(VarianceRule),
}

/// How a field argument enters the explicit objectivity test.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FieldRole {
    /// An inner field variable: replaced by its transformed version.
    Inner,
    /// Part of the function's own coordinate dependence: kept as given.
    Specified,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldArg {
    pub name: String,
    pub shape: Shape,
    /// Closed form in the original frame. Without one the field is sampled
    /// as a random value per point and may not be differentiated.
    pub expr: Option<FieldExpr>,
    pub law: FieldLaw,
    pub role: FieldRole,
}

impl FieldArg {
    pub fn inner(name: &str, expr: FieldExpr, law: FieldLaw) -> Self {
        Self { name: name.into(), shape: expr.shape(), expr: Some(expr), law, role: FieldRole::Inner }
    }

    pub fn specified(name: &str, expr: FieldExpr, law: FieldLaw) -> Self {
        Self { name: name.into(), shape: expr.shape(), expr: Some(expr), law, role: FieldRole::Specified }
    }

    pub fn free(name: &str, shape: Shape, law: FieldLaw) -> Self {
        Self { name: name.into(), shape, expr: None, law, role: FieldRole::Inner }
    }
}

/// Transformation law of a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamLaw {
    /// A fixed number of the constitutive law; not transformed.
    Constant,
    /// Reference position, mapped like a point at the current time.
    Point,
    /// Reference direction or vector, mapped by the rule matrix.
    Vector,
    /// Reference rank-2 tensor, conjugated by the rule matrix.
    Rank2,
    /// Reference scalar, unchanged.
    Scalar,
    /// Reference time, shifted like the time coordinate.
    Time,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub value: TensorValue,
    pub law: ParamLaw,
}

impl Param {
    pub fn new(name: &str, value: TensorValue, law: ParamLaw) -> Self {
        Self { name: name.into(), value, law }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Quantity {
    pub name: String,
    pub definition: FieldExpr,
    pub rule: VarianceRule,
    pub fields: Vec<FieldArg>,
    pub params: Vec<Param>,
    /// Spin `Omega` of the original frame, used by relative quantities.
    pub spin: Matrix3<f64>,
}

impl Quantity {
    pub fn new(name: &str, definition: FieldExpr, rule: VarianceRule) -> Self {
        Self { name: name.into(), definition, rule, fields: Vec::new(), params: Vec::new(), spin: Matrix3::zeros() }
    }

    pub fn with_field(mut self, f: FieldArg) -> Self {
        self.fields.push(f);
        self
    }

    pub fn with_param(mut self, p: Param) -> Self {
        self.params.push(p);
        self
    }

    pub fn with_spin(mut self, spin: Matrix3<f64>) -> Self {
        self.spin = spin;
        self
    }

    /// Add a relative redefinition offset to the definition.
    pub fn with_offset(mut self, offset: &FieldExpr) -> Result<Self, CheckError> {
        self.definition = FieldExpr::add(&self.definition, offset)
            .map_err(|e| CheckError::Invalid(format!("offset does not match the quantity: {e}")))?;
        Ok(self)
    }

    /// A quantity is relative when its definition involves the frame spin.
    pub fn is_relative(&self) -> bool {
        self.definition.symbols().iter().any(|(n, _)| n == SPIN_SYMBOL)
    }

    pub fn field(&self, name: &str) -> Option<&FieldArg> {
        self.fields.iter().find(|f| f.name == name)
    }

    pub fn param(&self, name: &str) -> Option<&Param> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Check that every symbol is declared with the right shape, that the
    /// rule fits the definition and that free fields are never differentiated.
    pub fn validate(&self) -> Result<(), CheckError> {
        for (name, shape) in self.definition.symbols() {
            let declared = if name == SPIN_SYMBOL {
                Some(Shape::Mat3)
            } else if let Some(f) = self.field(&name) {
                Some(f.shape)
            } else {
                self.param(&name).map(|p| p.value.shape())
            };
            match declared {
                None => return Err(CheckError::Undeclared(name)),
                Some(s) if s != shape => {
                    return Err(CheckError::Invalid(format!("`{name}` is used as {shape} but declared {s}")));
                }
                _ => {}
            }
        }
        for f in &self.fields {
            if let Some(e) = &f.expr {
                if e.shape() != f.shape {
                    return Err(CheckError::Invalid(format!("field `{}` expression has shape {}", f.name, e.shape())));
                }
                if e.symbols().iter().any(|(n, _)| self.field(n).is_some() || n == SPIN_SYMBOL) {
                    return Err(CheckError::Invalid(format!("field `{}` may only depend on x, t and parameters", f.name)));
                }
            }
        }
        let rule_ok = match self.rule.kind {
            crate::frames::RuleKind::Scalar => self.definition.shape() == Shape::Scalar,
            crate::frames::RuleKind::Contra1 | crate::frames::RuleKind::Cov1 => self.definition.shape() == Shape::Vec3,
            crate::frames::RuleKind::Rank2 => self.definition.shape() == Shape::Mat3,
            crate::frames::RuleKind::Inhomogeneous(ref o) => o.shape() == self.definition.shape(),
        };
        if !rule_ok {
            return Err(CheckError::Invalid(format!("rule {} does not fit a {} quantity", self.rule.name(), self.definition.shape())));
        }
        let free: Vec<&str> = self.fields.iter().filter(|f| f.expr.is_none()).map(|f| f.name.as_str()).collect();
        let mut bad = None;
        self.definition.visit(&mut |e| {
            let is_deriv = matches!(e.node(), Node::Grad(_) | Node::Divergence(_) | Node::Laplacian(_) | Node::TimeDerivative(_));
            if is_deriv && bad.is_none() {
                bad = e.symbols().into_iter().map(|(n, _)| n).find(|n| free.contains(&n.as_str()));
            }
        });
        match bad {
            Some(name) => Err(CheckError::FreeFieldDifferentiated(name)),
            None => Ok(()),
        }
    }
}
