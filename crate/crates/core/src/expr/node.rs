use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use super::value::{Shape, TensorValue};

/// Scalar functions of one scalar argument.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    pub fn apply(self, a: f64) -> f64 {
        match self {
            Func::Sin => a.sin(),
            Func::Cos => a.cos(),
            Func::Exp => a.exp(),
            Func::Log => a.ln(),
            Func::Sqrt => a.sqrt(),
            Func::Abs => a.abs(),
        }
    }
}

/// Node kinds of the expression tree. Component indices are zero-based.
#[derive(Debug, PartialEq)]
pub enum Node {
    Const(TensorValue),
    Coord,
    Time,
    Symbol(String),
    Func(Func, FieldExpr),
    Pow(FieldExpr, FieldExpr),
    Neg(FieldExpr),
    Add(FieldExpr, FieldExpr),
    Sub(FieldExpr, FieldExpr),
    Mul(FieldExpr, FieldExpr),
    Div(FieldExpr, FieldExpr),
    Dot(FieldExpr, FieldExpr),
    Outer(FieldExpr, FieldExpr),
    Transpose(FieldExpr),
    Norm(FieldExpr),
    Grad(FieldExpr),
    Divergence(FieldExpr),
    Laplacian(FieldExpr),
    TimeDerivative(FieldExpr),
    Component(FieldExpr, usize, Option<usize>),
    VecBuild(Box<[FieldExpr; 3]>),
    MatBuild(Box<[FieldExpr; 9]>),
}

#[derive(Debug)]
pub struct ExprNode {
    pub node: Node,
    pub shape: Shape,
    flags: u8,
}

impl PartialEq for ExprNode {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.flags == other.flags && self.node == other.node
    }
}

const HAS_COORD: u8 = 1;
const HAS_TIME: u8 = 2;
const HAS_SYMBOL: u8 = 4;
const HAS_DERIV: u8 = 8;

/// Immutable, shape-checked expression for a scalar, vector or matrix field of (x, t).
#[derive(Clone)]
pub struct FieldExpr(pub(crate) Arc<ExprNode>);

impl PartialEq for FieldExpr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || *self.0 == *other.0
    }
}

impl fmt::Debug for FieldExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "FieldExpr({self})")
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
#[error("shape mismatch in `{op}`: {message}")]
pub struct ShapeError {
    pub op: String,
    pub message: String,
}

fn shape_err(op: &str, message: String) -> ShapeError {
    ShapeError { op: op.to_string(), message }
}

impl FieldExpr {
    pub fn node(&self) -> &Node {
        &self.0.node
    }

    pub fn shape(&self) -> Shape {
        self.0.shape
    }

    pub(crate) fn ptr(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    fn raw(node: Node, shape: Shape) -> FieldExpr {
        let own = match &node {
            Node::Coord => HAS_COORD,
            Node::Time => HAS_TIME,
            Node::Symbol(_) => HAS_SYMBOL,
            Node::Grad(_) | Node::Divergence(_) | Node::Laplacian(_) | Node::TimeDerivative(_) => HAS_DERIV,
            _ => 0,
        };
        let mut e = ExprNode { node, shape, flags: own };
        let children = FieldExpr::children_of(&e.node);
        e.flags = children.iter().fold(own, |acc, c| acc | c.0.flags);
        FieldExpr(Arc::new(e))
    }

    pub fn constant(v: TensorValue) -> FieldExpr {
        let shape = v.shape();
        Self::raw(Node::Const(v), shape)
    }

    pub fn scalar(s: f64) -> FieldExpr {
        Self::constant(TensorValue::Scalar(s))
    }

    pub fn vector(v: Vector3<f64>) -> FieldExpr {
        Self::constant(TensorValue::Vector(v))
    }

    pub fn matrix(m: Matrix3<f64>) -> FieldExpr {
        Self::constant(TensorValue::Matrix(m))
    }

    pub fn zero(shape: Shape) -> FieldExpr {
        Self::constant(TensorValue::zero(shape))
    }

    pub fn coord() -> FieldExpr {
        Self::raw(Node::Coord, Shape::Vec3)
    }

    pub fn time() -> FieldExpr {
        Self::raw(Node::Time, Shape::Scalar)
    }

    pub fn symbol(name: &str, shape: Shape) -> FieldExpr {
        Self::raw(Node::Symbol(name.to_string()), shape)
    }

    /// `comp(x, i)` with a zero-based index.
    pub fn coord_component(i: usize) -> FieldExpr {
        Self::raw(Node::Component(Self::coord(), i, None), Shape::Scalar)
    }

    pub fn as_const(&self) -> Option<&TensorValue> {
        match self.node() {
            Node::Const(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(|v| v.is_zero())
    }

    fn is_scalar_const(&self, value: f64) -> bool {
        matches!(self.as_const(), Some(TensorValue::Scalar(s)) if *s == value)
    }

    /// Children in evaluation order.
    pub fn children(&self) -> Vec<&FieldExpr> {
        Self::children_of(self.node())
    }

    fn children_of(node: &Node) -> Vec<&FieldExpr> {
        match node {
            Node::Const(_) | Node::Coord | Node::Time | Node::Symbol(_) => vec![],
            Node::Func(_, a)
            | Node::Neg(a)
            | Node::Transpose(a)
            | Node::Norm(a)
            | Node::Grad(a)
            | Node::Divergence(a)
            | Node::Laplacian(a)
            | Node::TimeDerivative(a)
            | Node::Component(a, _, _) => vec![a],
            Node::Pow(a, b)
            | Node::Add(a, b)
            | Node::Sub(a, b)
            | Node::Mul(a, b)
            | Node::Div(a, b)
            | Node::Dot(a, b)
            | Node::Outer(a, b) => vec![a, b],
            Node::VecBuild(c) => c.iter().collect(),
            Node::MatBuild(c) => c.iter().collect(),
        }
    }

    /// Visit every distinct node once (shared subtrees are not revisited).
    pub fn visit(&self, f: &mut dyn FnMut(&FieldExpr)) {
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![self.clone()];
        while let Some(e) = stack.pop() {
            if !seen.insert(e.ptr()) {
                continue;
            }
            f(&e);
            stack.extend(e.children().into_iter().cloned());
        }
    }

    /// True when any node satisfies the predicate.
    pub fn any(&self, pred: &dyn Fn(&FieldExpr) -> bool) -> bool {
        let mut found = false;
        self.visit(&mut |e| found = found || pred(e));
        found
    }

    pub fn depends_on_coord(&self) -> bool {
        self.0.flags & HAS_COORD != 0
    }

    pub fn depends_on_time(&self) -> bool {
        self.0.flags & HAS_TIME != 0
    }

    pub fn has_symbols(&self) -> bool {
        self.0.flags & HAS_SYMBOL != 0
    }

    pub fn contains_derivatives(&self) -> bool {
        self.0.flags & HAS_DERIV != 0
    }

    /// Free symbol names with their shapes, sorted by name.
    pub fn symbols(&self) -> Vec<(String, Shape)> {
        let mut out = std::collections::BTreeMap::new();
        if self.has_symbols() {
            self.visit(&mut |e| {
                if let Node::Symbol(name) = e.node() {
                    out.insert(name.clone(), e.shape());
                }
            });
        }
        out.into_iter().collect()
    }

    /// Number of distinct nodes in the expression graph.
    pub fn node_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }

    // ----- checked constructors -------------------------------------------------

    pub fn func(f: Func, a: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if a.shape() != Shape::Scalar {
            return Err(shape_err(f.name(), format!("argument must be scalar, got {}", a.shape())));
        }
        if let Some(TensorValue::Scalar(s)) = a.as_const() {
            let r = f.apply(*s);
            if r.is_finite() {
                return Ok(Self::scalar(r));
            }
        }
        Ok(Self::raw(Node::Func(f, a.clone()), Shape::Scalar))
    }

    pub fn pow(a: &FieldExpr, b: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if a.shape() != Shape::Scalar || b.shape() != Shape::Scalar {
            return Err(shape_err("pow", format!("operands must be scalar, got {} and {}", a.shape(), b.shape())));
        }
        if b.is_scalar_const(1.0) {
            return Ok(a.clone());
        }
        if b.is_scalar_const(0.0) {
            return Ok(Self::scalar(1.0));
        }
        if let (Some(TensorValue::Scalar(x)), Some(TensorValue::Scalar(y))) = (a.as_const(), b.as_const()) {
            let r = x.powf(*y);
            if r.is_finite() {
                return Ok(Self::scalar(r));
            }
        }
        Ok(Self::raw(Node::Pow(a.clone(), b.clone()), Shape::Scalar))
    }

    pub fn neg(a: &FieldExpr) -> FieldExpr {
        if let Some(v) = a.as_const() {
            return Self::constant(v.scale(-1.0));
        }
        if let Node::Neg(inner) = a.node() {
            return inner.clone();
        }
        Self::raw(Node::Neg(a.clone()), a.shape())
    }

    pub fn add(a: &FieldExpr, b: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if a.shape() != b.shape() {
            return Err(shape_err("+", format!("cannot add {} and {}", a.shape(), b.shape())));
        }
        if a.is_zero() {
            return Ok(b.clone());
        }
        if b.is_zero() {
            return Ok(a.clone());
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Ok(Self::constant(fold_add(x, y, 1.0)));
        }
        Ok(Self::raw(Node::Add(a.clone(), b.clone()), a.shape()))
    }

    pub fn sub(a: &FieldExpr, b: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if a.shape() != b.shape() {
            return Err(shape_err("-", format!("cannot subtract {} from {}", b.shape(), a.shape())));
        }
        if b.is_zero() {
            return Ok(a.clone());
        }
        if a.is_zero() {
            return Ok(Self::neg(b));
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Ok(Self::constant(fold_add(x, y, -1.0)));
        }
        Ok(Self::raw(Node::Sub(a.clone(), b.clone()), a.shape()))
    }

    pub fn mul(a: &FieldExpr, b: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        use Shape::*;
        let shape = match (a.shape(), b.shape()) {
            (Scalar, s) | (s, Scalar) => s,
            (Mat3, Vec3) => Vec3,
            (Mat3, Mat3) => Mat3,
            (x, y) => {
                return Err(shape_err("*", format!("cannot multiply {x} by {y} (use dot or outer)")));
            }
        };
        if a.is_zero() || b.is_zero() {
            return Ok(Self::zero(shape));
        }
        if a.is_scalar_const(1.0) {
            return Ok(b.clone());
        }
        if b.is_scalar_const(1.0) {
            return Ok(a.clone());
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Ok(Self::constant(fold_mul(x, y)));
        }
        Ok(Self::raw(Node::Mul(a.clone(), b.clone()), shape))
    }

    pub fn div(a: &FieldExpr, b: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if b.shape() != Shape::Scalar {
            return Err(shape_err("/", format!("divisor must be scalar, got {}", b.shape())));
        }
        if b.is_scalar_const(1.0) {
            return Ok(a.clone());
        }
        if a.is_zero() && !b.is_zero() {
            return Ok(a.clone());
        }
        if let (Some(x), Some(TensorValue::Scalar(y))) = (a.as_const(), b.as_const()) {
            if *y != 0.0 {
                return Ok(Self::constant(x.scale(1.0 / y)));
            }
        }
        Ok(Self::raw(Node::Div(a.clone(), b.clone()), a.shape()))
    }

    pub fn dot(a: &FieldExpr, b: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if a.shape() != b.shape() || a.shape() == Shape::Scalar {
            return Err(shape_err("dot", format!("operands must be two vectors or two matrices, got {} and {}", a.shape(), b.shape())));
        }
        if a.is_zero() || b.is_zero() {
            return Ok(Self::scalar(0.0));
        }
        if let (Some(x), Some(y)) = (a.as_const(), b.as_const()) {
            return Ok(Self::scalar(fold_dot(x, y)));
        }
        Ok(Self::raw(Node::Dot(a.clone(), b.clone()), Shape::Scalar))
    }

    pub fn outer(a: &FieldExpr, b: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if a.shape() != Shape::Vec3 || b.shape() != Shape::Vec3 {
            return Err(shape_err("outer", format!("operands must be vectors, got {} and {}", a.shape(), b.shape())));
        }
        if a.is_zero() || b.is_zero() {
            return Ok(Self::zero(Shape::Mat3));
        }
        if let (Some(TensorValue::Vector(x)), Some(TensorValue::Vector(y))) = (a.as_const(), b.as_const()) {
            return Ok(Self::matrix(x * y.transpose()));
        }
        Ok(Self::raw(Node::Outer(a.clone(), b.clone()), Shape::Mat3))
    }

    pub fn transpose(a: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if a.shape() != Shape::Mat3 {
            return Err(shape_err("transpose", format!("operand must be a matrix, got {}", a.shape())));
        }
        if let Some(TensorValue::Matrix(m)) = a.as_const() {
            return Ok(Self::matrix(m.transpose()));
        }
        if let Node::Transpose(inner) = a.node() {
            return Ok(inner.clone());
        }
        Ok(Self::raw(Node::Transpose(a.clone()), Shape::Mat3))
    }

    pub fn norm(a: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        if a.shape() == Shape::Scalar {
            return Err(shape_err("norm", "operand must be a vector or matrix, got scalar".into()));
        }
        if let Some(v) = a.as_const() {
            return Ok(Self::scalar(fold_dot(v, v).sqrt()));
        }
        Ok(Self::raw(Node::Norm(a.clone()), Shape::Scalar))
    }

    pub fn grad(a: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        let shape = match a.shape() {
            Shape::Scalar => Shape::Vec3,
            Shape::Vec3 => Shape::Mat3,
            Shape::Mat3 => return Err(shape_err("grad", "gradient of a matrix field would be rank 3".into())),
        };
        if a.as_const().is_some() {
            return Ok(Self::zero(shape));
        }
        Ok(Self::raw(Node::Grad(a.clone()), shape))
    }

    pub fn divergence(a: &FieldExpr) -> Result<FieldExpr, ShapeError> {
        let shape = match a.shape() {
            Shape::Vec3 => Shape::Scalar,
            Shape::Mat3 => Shape::Vec3,
            Shape::Scalar => return Err(shape_err("div", "divergence needs a vector or matrix field".into())),
        };
        if a.as_const().is_some() {
            return Ok(Self::zero(shape));
        }
        Ok(Self::raw(Node::Divergence(a.clone()), shape))
    }

    pub fn laplacian(a: &FieldExpr) -> FieldExpr {
        if a.as_const().is_some() {
            return Self::zero(a.shape());
        }
        Self::raw(Node::Laplacian(a.clone()), a.shape())
    }

    pub fn time_derivative(a: &FieldExpr) -> FieldExpr {
        if a.as_const().is_some() {
            return Self::zero(a.shape());
        }
        Self::raw(Node::TimeDerivative(a.clone()), a.shape())
    }

    /// Component selection with zero-based indices.
    pub fn component(a: &FieldExpr, i: usize, j: Option<usize>) -> Result<FieldExpr, ShapeError> {
        if i > 2 || j.is_some_and(|j| j > 2) {
            return Err(shape_err("comp", "component index out of range 1..3".into()));
        }
        match (a.shape(), j) {
            (Shape::Vec3, None) | (Shape::Mat3, Some(_)) => {}
            (s, _) => {
                return Err(shape_err("comp", format!("index count does not match operand shape {s}")));
            }
        }
        match (a.node(), j) {
            (Node::Const(TensorValue::Vector(v)), None) => return Ok(Self::scalar(v[i])),
            (Node::Const(TensorValue::Matrix(m)), Some(j)) => return Ok(Self::scalar(m[(i, j)])),
            (Node::VecBuild(c), None) => return Ok(c[i].clone()),
            (Node::MatBuild(c), Some(j)) => return Ok(c[3 * i + j].clone()),
            _ => {}
        }
        Ok(Self::raw(Node::Component(a.clone(), i, j), Shape::Scalar))
    }

    pub fn vec_build(c: [FieldExpr; 3]) -> Result<FieldExpr, ShapeError> {
        if c.iter().any(|e| e.shape() != Shape::Scalar) {
            return Err(shape_err("vec", "entries must be scalar".into()));
        }
        if let [Some(a), Some(b), Some(d)] = [c[0].as_const(), c[1].as_const(), c[2].as_const()] {
            if let (Some(a), Some(b), Some(d)) = (a.as_scalar(), b.as_scalar(), d.as_scalar()) {
                return Ok(Self::vector(Vector3::new(a, b, d)));
            }
        }
        Ok(Self::raw(Node::VecBuild(Box::new(c)), Shape::Vec3))
    }

    /// Matrix from nine scalar entries in row-major order.
    pub fn mat_build(c: [FieldExpr; 9]) -> Result<FieldExpr, ShapeError> {
        if c.iter().any(|e| e.shape() != Shape::Scalar) {
            return Err(shape_err("mat", "entries must be scalar".into()));
        }
        let consts: Option<Vec<f64>> = c.iter().map(|e| e.as_const().and_then(|v| v.as_scalar())).collect();
        if let Some(v) = consts {
            return Ok(Self::matrix(Matrix3::from_row_slice(&v)));
        }
        Ok(Self::raw(Node::MatBuild(Box::new(c)), Shape::Mat3))
    }
}

fn fold_add(x: &TensorValue, y: &TensorValue, sign: f64) -> TensorValue {
    match (x, y) {
        (TensorValue::Scalar(a), TensorValue::Scalar(b)) => TensorValue::Scalar(a + sign * b),
        (TensorValue::Vector(a), TensorValue::Vector(b)) => TensorValue::Vector(a + b * sign),
        (TensorValue::Matrix(a), TensorValue::Matrix(b)) => TensorValue::Matrix(a + b * sign),
        _ => unreachable!("shapes checked by caller"),
    }
}

pub(crate) fn fold_mul(x: &TensorValue, y: &TensorValue) -> TensorValue {
    match (x, y) {
        (TensorValue::Scalar(a), other) => other.scale(*a),
        (other, TensorValue::Scalar(b)) => other.scale(*b),
        (TensorValue::Matrix(a), TensorValue::Vector(b)) => TensorValue::Vector(a * b),
        (TensorValue::Matrix(a), TensorValue::Matrix(b)) => TensorValue::Matrix(a * b),
        _ => unreachable!("shapes checked by caller"),
    }
}

pub(crate) fn fold_dot(x: &TensorValue, y: &TensorValue) -> f64 {
    match (x, y) {
        (TensorValue::Vector(a), TensorValue::Vector(b)) => a.dot(b),
        (TensorValue::Matrix(a), TensorValue::Matrix(b)) => a.component_mul(b).sum(),
        _ => unreachable!("shapes checked by caller"),
    }
}

/// Internal builders for trees whose shapes are consistent by construction.
pub(crate) mod build {
    use super::*;

    fn ok(r: Result<FieldExpr, ShapeError>) -> FieldExpr {
        r.unwrap_or_else(|e| panic!("internal expression built with inconsistent shapes: {e}"))
    }

    pub fn add(a: &FieldExpr, b: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::add(a, b))
    }
    pub fn sub(a: &FieldExpr, b: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::sub(a, b))
    }
    pub fn mul(a: &FieldExpr, b: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::mul(a, b))
    }
    pub fn div(a: &FieldExpr, b: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::div(a, b))
    }
    pub fn dot(a: &FieldExpr, b: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::dot(a, b))
    }
    pub fn outer(a: &FieldExpr, b: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::outer(a, b))
    }
    pub fn transpose(a: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::transpose(a))
    }
    pub fn norm(a: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::norm(a))
    }
    pub fn grad(a: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::grad(a))
    }
    pub fn func(f: Func, a: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::func(f, a))
    }
    pub fn pow(a: &FieldExpr, b: &FieldExpr) -> FieldExpr {
        ok(FieldExpr::pow(a, b))
    }
    pub fn comp(a: &FieldExpr, i: usize, j: Option<usize>) -> FieldExpr {
        ok(FieldExpr::component(a, i, j))
    }
    pub fn vec3(c: [FieldExpr; 3]) -> FieldExpr {
        ok(FieldExpr::vec_build(c))
    }
    pub fn mat3(c: [FieldExpr; 9]) -> FieldExpr {
        ok(FieldExpr::mat_build(c))
    }
    pub fn scalar(s: f64) -> FieldExpr {
        FieldExpr::scalar(s)
    }
    pub fn sum(terms: impl IntoIterator<Item = FieldExpr>, shape: Shape) -> FieldExpr {
        terms.into_iter().fold(FieldExpr::zero(shape), |acc, t| add(&acc, &t))
    }
}
