//! Pointwise evaluation. Expressions are lowered once into a flat instruction
//! list (derivatives expanded, common subexpressions shared) and then run at
//! many points.

use std::collections::{BTreeMap, HashMap};

use nalgebra::Matrix3;
use thiserror::Error;

use super::diff::expand_derivatives;
use super::node::{fold_dot, FieldExpr, Func, Node};
use super::value::{Shape, SpaceTimePoint, TensorValue};

/// Guard radius for denominators that are norms.
pub const SINGULARITY_RADIUS: f64 = 1e-12;

/// Values of free symbols.
pub type Bindings = BTreeMap<String, TensorValue>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("unbound symbol `{0}`")]
    UnboundSymbol(String),
    #[error("symbol `{name}` bound to a {found} value, expected {expected}")]
    BindingShape { name: String, expected: Shape, found: Shape },
    #[error("singular point: `{op}` has a vanishing denominator")]
    Singular { op: &'static str },
    #[error("non-finite result in `{op}`")]
    NonFinite { op: &'static str },
}

#[derive(Debug, Clone)]
enum Instr {
    Const(TensorValue),
    Coord,
    Time,
    Symbol(usize),
    Func(Func, usize),
    Pow(usize, usize),
    Neg(usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    Div(usize, usize, bool),
    Dot(usize, usize),
    Outer(usize, usize),
    Transpose(usize),
    Norm(usize),
    Comp(usize, usize, Option<usize>),
    Vec3([usize; 3]),
    Mat3([usize; 9]),
}

impl Instr {
    fn op_name(&self) -> &'static str {
        match self {
            Instr::Const(_) => "const",
            Instr::Coord => "x",
            Instr::Time => "t",
            Instr::Symbol(_) => "symbol",
            Instr::Func(f, _) => f.name(),
            Instr::Pow(..) => "pow",
            Instr::Neg(_) => "neg",
            Instr::Add(..) => "+",
            Instr::Sub(..) => "-",
            Instr::Mul(..) => "*",
            Instr::Div(..) => "/",
            Instr::Dot(..) => "dot",
            Instr::Outer(..) => "outer",
            Instr::Transpose(_) => "transpose",
            Instr::Norm(_) => "norm",
            Instr::Comp(..) => "comp",
            Instr::Vec3(_) => "vec",
            Instr::Mat3(_) => "mat",
        }
    }
}

/// Structural key used to merge identical subexpressions.
#[derive(Hash, PartialEq, Eq)]
enum Key {
    Const(Vec<u64>),
    Coord,
    Time,
    Symbol(usize),
    Op(u8, Vec<usize>, usize, usize),
}

/// An expression lowered for repeated evaluation.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    instrs: Vec<Instr>,
    symbols: Vec<(String, Shape)>,
    shape: Shape,
}

struct Lowering {
    instrs: Vec<Instr>,
    keys: HashMap<Key, usize>,
    by_ptr: HashMap<usize, (FieldExpr, usize)>,
    symbols: Vec<(String, Shape)>,
}

impl Lowering {
    fn push(&mut self, key: Key, instr: Instr) -> usize {
        if let Some(&i) = self.keys.get(&key) {
            return i;
        }
        self.instrs.push(instr);
        let i = self.instrs.len() - 1;
        self.keys.insert(key, i);
        i
    }

    fn lower(&mut self, e: &FieldExpr) -> usize {
        if let Some((_, i)) = self.by_ptr.get(&e.ptr()) {
            return *i;
        }
        let idx = match e.node() {
            Node::Const(v) => {
                let bits = v.components().iter().map(|c| c.to_bits()).collect();
                self.push(Key::Const(bits), Instr::Const(*v))
            }
            Node::Coord => self.push(Key::Coord, Instr::Coord),
            Node::Time => self.push(Key::Time, Instr::Time),
            Node::Symbol(name) => {
                let s = match self.symbols.iter().position(|(n, _)| n == name) {
                    Some(s) => s,
                    None => {
                        self.symbols.push((name.clone(), e.shape()));
                        self.symbols.len() - 1
                    }
                };
                self.push(Key::Symbol(s), Instr::Symbol(s))
            }
            Node::Func(f, a) => {
                let a = self.lower(a);
                self.push(Key::Op(1, vec![a], *f as usize, 0), Instr::Func(*f, a))
            }
            Node::Pow(a, b) => self.binary(2, a, b, Instr::Pow),
            Node::Neg(a) => {
                let a = self.lower(a);
                self.push(Key::Op(3, vec![a], 0, 0), Instr::Neg(a))
            }
            Node::Add(a, b) => self.binary(4, a, b, Instr::Add),
            Node::Sub(a, b) => self.binary(5, a, b, Instr::Sub),
            Node::Mul(a, b) => self.binary(6, a, b, Instr::Mul),
            Node::Div(a, b) => {
                let guarded = matches!(b.node(), Node::Norm(_));
                let (ia, ib) = (self.lower(a), self.lower(b));
                self.push(Key::Op(7, vec![ia, ib], 0, 0), Instr::Div(ia, ib, guarded))
            }
            Node::Dot(a, b) => self.binary(8, a, b, Instr::Dot),
            Node::Outer(a, b) => self.binary(9, a, b, Instr::Outer),
            Node::Transpose(a) => {
                let a = self.lower(a);
                self.push(Key::Op(10, vec![a], 0, 0), Instr::Transpose(a))
            }
            Node::Norm(a) => {
                let a = self.lower(a);
                self.push(Key::Op(11, vec![a], 0, 0), Instr::Norm(a))
            }
            Node::Component(a, i, j) => {
                let a = self.lower(a);
                let jj = j.map_or(3, |j| j);
                self.push(Key::Op(12, vec![a], *i, jj), Instr::Comp(a, *i, *j))
            }
            Node::VecBuild(c) => {
                let ids: Vec<usize> = c.iter().map(|x| self.lower(x)).collect();
                let arr = [ids[0], ids[1], ids[2]];
                self.push(Key::Op(13, ids, 0, 0), Instr::Vec3(arr))
            }
            Node::MatBuild(c) => {
                let ids: Vec<usize> = c.iter().map(|x| self.lower(x)).collect();
                let arr: [usize; 9] = std::array::from_fn(|k| ids[k]);
                self.push(Key::Op(14, ids, 0, 0), Instr::Mat3(arr))
            }
            Node::Grad(_) | Node::Divergence(_) | Node::Laplacian(_) | Node::TimeDerivative(_) => {
                unreachable!("derivatives are expanded before lowering")
            }
        };
        self.by_ptr.insert(e.ptr(), (e.clone(), idx));
        idx
    }

    fn binary(&mut self, tag: u8, a: &FieldExpr, b: &FieldExpr, mk: fn(usize, usize) -> Instr) -> usize {
        let (ia, ib) = (self.lower(a), self.lower(b));
        self.push(Key::Op(tag, vec![ia, ib], 0, 0), mk(ia, ib))
    }
}

impl CompiledExpr {
    pub fn new(expr: &FieldExpr) -> CompiledExpr {
        let expanded = expand_derivatives(expr);
        let mut l = Lowering { instrs: Vec::new(), keys: HashMap::new(), by_ptr: HashMap::new(), symbols: Vec::new() };
        let root = l.lower(&expanded);
        debug_assert_eq!(root, l.instrs.len() - 1, "root is lowered last");
        CompiledExpr { instrs: l.instrs, symbols: l.symbols, shape: expr.shape() }
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    /// Free symbols required by [`CompiledExpr::eval`].
    pub fn symbols(&self) -> &[(String, Shape)] {
        &self.symbols
    }

    pub fn eval(&self, pt: &SpaceTimePoint, bindings: &Bindings) -> Result<TensorValue, EvalError> {
        let mut syms = Vec::with_capacity(self.symbols.len());
        for (name, shape) in &self.symbols {
            let v = bindings.get(name).ok_or_else(|| EvalError::UnboundSymbol(name.clone()))?;
            if v.shape() != *shape {
                return Err(EvalError::BindingShape { name: name.clone(), expected: *shape, found: v.shape() });
            }
            syms.push(*v);
        }
        let mut regs: Vec<TensorValue> = Vec::with_capacity(self.instrs.len());
        for ins in &self.instrs {
            let v = step(ins, &regs, pt, &syms)?;
            if !v.is_finite() {
                return Err(EvalError::NonFinite { op: ins.op_name() });
            }
            regs.push(v);
        }
        Ok(*regs.last().expect("compiled expression is never empty"))
    }
}

fn scalar(v: &TensorValue) -> f64 {
    match v {
        TensorValue::Scalar(s) => *s,
        _ => unreachable!("shape-checked scalar operand"),
    }
}

fn step(ins: &Instr, r: &[TensorValue], pt: &SpaceTimePoint, syms: &[TensorValue]) -> Result<TensorValue, EvalError> {
    use TensorValue::*;
    Ok(match ins {
        Instr::Const(v) => *v,
        Instr::Coord => Vector(pt.x),
        Instr::Time => Scalar(pt.t),
        Instr::Symbol(s) => syms[*s],
        Instr::Func(f, a) => Scalar(f.apply(scalar(&r[*a]))),
        Instr::Pow(a, b) => Scalar(scalar(&r[*a]).powf(scalar(&r[*b]))),
        Instr::Neg(a) => r[*a].scale(-1.0),
        Instr::Add(a, b) => match (&r[*a], &r[*b]) {
            (Scalar(x), Scalar(y)) => Scalar(x + y),
            (Vector(x), Vector(y)) => Vector(x + y),
            (Matrix(x), Matrix(y)) => Matrix(x + y),
            _ => unreachable!(),
        },
        Instr::Sub(a, b) => match (&r[*a], &r[*b]) {
            (Scalar(x), Scalar(y)) => Scalar(x - y),
            (Vector(x), Vector(y)) => Vector(x - y),
            (Matrix(x), Matrix(y)) => Matrix(x - y),
            _ => unreachable!(),
        },
        Instr::Mul(a, b) => super::node::fold_mul(&r[*a], &r[*b]),
        Instr::Div(a, b, guarded) => {
            let d = scalar(&r[*b]);
            if d == 0.0 || (*guarded && d.abs() < SINGULARITY_RADIUS) {
                return Err(EvalError::Singular { op: "/" });
            }
            r[*a].scale(1.0 / d)
        }
        Instr::Dot(a, b) => Scalar(fold_dot(&r[*a], &r[*b])),
        Instr::Outer(a, b) => match (&r[*a], &r[*b]) {
            (Vector(x), Vector(y)) => Matrix(x * y.transpose()),
            _ => unreachable!(),
        },
        Instr::Transpose(a) => match &r[*a] {
            Matrix(m) => Matrix(m.transpose()),
            _ => unreachable!(),
        },
        Instr::Norm(a) => Scalar(fold_dot(&r[*a], &r[*a]).sqrt()),
        Instr::Comp(a, i, j) => match (&r[*a], j) {
            (Vector(v), None) => Scalar(v[*i]),
            (Matrix(m), Some(j)) => Scalar(m[(*i, *j)]),
            _ => unreachable!(),
        },
        Instr::Vec3(c) => Vector(nalgebra::Vector3::new(scalar(&r[c[0]]), scalar(&r[c[1]]), scalar(&r[c[2]]))),
        Instr::Mat3(c) => Matrix(Matrix3::from_fn(|i, j| scalar(&r[c[3 * i + j]]))),
    })
}

/// Evaluate an expression once. For repeated evaluation compile it with
/// [`CompiledExpr::new`].
pub fn evaluate(expr: &FieldExpr, pt: &SpaceTimePoint, bindings: &Bindings) -> Result<TensorValue, EvalError> {
    CompiledExpr::new(expr).eval(pt, bindings)
}
