//! Pretty-printer producing text that parses back to an equal tree.

use std::fmt::{self, Write};

use super::node::{FieldExpr, Node};
use super::value::TensorValue;

fn number(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.is_sign_negative() {
        write!(f, "(-{:?})", -v)
    } else {
        write!(f, "{v:?}")
    }
}

fn list(f: &mut fmt::Formatter<'_>, name: &str, items: &[f64]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (k, v) in items.iter().enumerate() {
        if k > 0 {
            f.write_str(", ")?;
        }
        number(f, *v)?;
    }
    f.write_char(')')
}

fn call(f: &mut fmt::Formatter<'_>, name: &str, args: &[&FieldExpr]) -> fmt::Result {
    write!(f, "{name}(")?;
    for (k, a) in args.iter().enumerate() {
        if k > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{a}")?;
    }
    f.write_char(')')
}

impl fmt::Display for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Const(TensorValue::Scalar(v)) => number(f, *v),
            Node::Const(TensorValue::Vector(v)) => list(f, "vec", v.as_slice()),
            Node::Const(TensorValue::Matrix(m)) => {
                let rows: Vec<f64> = (0..9).map(|k| m[(k / 3, k % 3)]).collect();
                list(f, "mat", &rows)
            }
            Node::Coord => f.write_char('x'),
            Node::Time => f.write_char('t'),
            Node::Symbol(name) => f.write_str(name),
            Node::Func(func, a) => call(f, func.name(), &[a]),
            Node::Pow(a, b) => call(f, "pow", &[a, b]),
            Node::Neg(a) => write!(f, "(-{a})"),
            Node::Add(a, b) => write!(f, "({a} + {b})"),
            Node::Sub(a, b) => write!(f, "({a} - {b})"),
            Node::Mul(a, b) => write!(f, "({a} * {b})"),
            Node::Div(a, b) => write!(f, "({a} / {b})"),
            Node::Dot(a, b) => call(f, "dot", &[a, b]),
            Node::Outer(a, b) => call(f, "outer", &[a, b]),
            Node::Transpose(a) => call(f, "transpose", &[a]),
            Node::Norm(a) => call(f, "norm", &[a]),
            Node::Grad(a) => call(f, "grad", &[a]),
            Node::Divergence(a) => call(f, "div", &[a]),
            Node::Laplacian(a) => call(f, "lap", &[a]),
            Node::TimeDerivative(a) => call(f, "dt", &[a]),
            Node::Component(a, i, j) => {
                if matches!(a.node(), Node::Coord) && j.is_none() {
                    return write!(f, "x{}", i + 1);
                }
                match j {
                    Some(j) => write!(f, "comp({a}, {}, {})", i + 1, j + 1),
                    None => write!(f, "comp({a}, {})", i + 1),
                }
            }
            Node::VecBuild(c) => call(f, "vec", &c.iter().collect::<Vec<_>>()),
            Node::MatBuild(c) => call(f, "mat", &c.iter().collect::<Vec<_>>()),
        }
    }
}
