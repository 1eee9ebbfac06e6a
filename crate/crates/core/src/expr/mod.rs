//! Expression language for scalar, vector and matrix fields of (x, t):
//! tree, parser, printer, analytic differentiation and evaluation.

mod diff;
mod eval;
mod node;
mod parse;
mod print;
mod subst;
mod value;

pub use diff::{differentiate, expand_derivatives, Wrt};
pub use eval::{evaluate, Bindings, CompiledExpr, EvalError, SINGULARITY_RADIUS};
pub use node::{ExprNode, FieldExpr, Func, Node, ShapeError};
pub use parse::{parse_field_expr, parse_with, ParseError, SymbolTable, RESERVED};
pub use subst::{compose, rewrite, substitute, SubstError};
pub use value::{Shape, SpaceTimePoint, TensorValue};

pub(crate) use value::vec3_serde;

pub(crate) use diff::rebuild;
pub(crate) use node::build;
