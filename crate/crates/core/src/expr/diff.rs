//! Symbolic differentiation and expansion of differential operators.

use std::collections::HashMap;

use nalgebra::Vector3;

use super::node::{build, FieldExpr, Func, Node};
use super::value::Shape;

/// Differentiation variable: a Cartesian coordinate (zero-based) or time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Wrt {
    X(usize),
    T,
}

/// Analytic partial derivative of `expr`. Differential operator nodes inside
/// `expr` are expanded first, so the result is free of derivative nodes.
pub fn differentiate(expr: &FieldExpr, wrt: Wrt) -> FieldExpr {
    let mut ctx = Expander::default();
    let e = ctx.expand(expr);
    ctx.diff(&e, wrt)
}

/// Replace every grad/div/lap/dt node by its explicit analytic form.
pub fn expand_derivatives(expr: &FieldExpr) -> FieldExpr {
    Expander::default().expand(expr)
}

#[derive(Default)]
struct Expander {
    // Keys are node addresses; the source node is stored alongside the result
    // so the address cannot be reused while the cache is alive.
    expanded: HashMap<usize, (FieldExpr, FieldExpr)>,
    derivs: HashMap<(usize, Wrt), (FieldExpr, FieldExpr)>,
}

fn unit(i: usize) -> FieldExpr {
    let mut v = Vector3::zeros();
    v[i] = 1.0;
    FieldExpr::vector(v)
}

impl Expander {
    fn expand(&mut self, e: &FieldExpr) -> FieldExpr {
        if !e.contains_derivatives() {
            return e.clone();
        }
        if let Some((_, r)) = self.expanded.get(&e.ptr()) {
            return r.clone();
        }
        let r = match e.node() {
            Node::Grad(a) => {
                let a = self.expand(a);
                let d: Vec<FieldExpr> = (0..3).map(|j| self.diff(&a, Wrt::X(j))).collect();
                match a.shape() {
                    Shape::Scalar => build::vec3([d[0].clone(), d[1].clone(), d[2].clone()]),
                    _ => build::mat3(std::array::from_fn(|k| build::comp(&d[k % 3], k / 3, None))),
                }
            }
            Node::Divergence(a) => {
                let a = self.expand(a);
                let d: Vec<FieldExpr> = (0..3).map(|j| self.diff(&a, Wrt::X(j))).collect();
                match a.shape() {
                    Shape::Vec3 => build::sum((0..3).map(|j| build::comp(&d[j], j, None)), Shape::Scalar),
                    _ => build::vec3(std::array::from_fn(|i| build::sum((0..3).map(|j| build::comp(&d[j], i, Some(j))), Shape::Scalar))),
                }
            }
            Node::Laplacian(a) => {
                let a = self.expand(a);
                let terms: Vec<FieldExpr> = (0..3)
                    .map(|j| {
                        let d = self.diff(&a, Wrt::X(j));
                        self.diff(&d, Wrt::X(j))
                    })
                    .collect();
                build::sum(terms, a.shape())
            }
            Node::TimeDerivative(a) => {
                let a = self.expand(a);
                self.diff(&a, Wrt::T)
            }
            _ => rebuild(e, |c| self.expand(c)),
        };
        self.expanded.insert(e.ptr(), (e.clone(), r.clone()));
        r
    }

    /// Derivative of a derivative-free expression.
    fn diff(&mut self, e: &FieldExpr, wrt: Wrt) -> FieldExpr {
        let key = (e.ptr(), wrt);
        if let Some((_, r)) = self.derivs.get(&key) {
            return r.clone();
        }
        let r = match e.node() {
            Node::Const(_) | Node::Symbol(_) => FieldExpr::zero(e.shape()),
            Node::Coord => match wrt {
                Wrt::X(i) => unit(i),
                Wrt::T => FieldExpr::zero(Shape::Vec3),
            },
            Node::Time => FieldExpr::scalar(if wrt == Wrt::T { 1.0 } else { 0.0 }),
            Node::Func(f, a) => {
                let da = self.diff(a, wrt);
                if da.is_zero() {
                    FieldExpr::scalar(0.0)
                } else {
                    let outer = match f {
                        Func::Sin => build::func(Func::Cos, a),
                        Func::Cos => FieldExpr::neg(&build::func(Func::Sin, a)),
                        Func::Exp => e.clone(),
                        Func::Log => build::div(&build::scalar(1.0), a),
                        Func::Sqrt => build::div(&build::scalar(0.5), e),
                        Func::Abs => build::div(a, e),
                    };
                    build::mul(&outer, &da)
                }
            }
            Node::Pow(a, b) => {
                let da = self.diff(a, wrt);
                let db = self.diff(b, wrt);
                if let Some(c) = b.as_const().and_then(|v| v.as_scalar()) {
                    let lowered = build::pow(a, &build::scalar(c - 1.0));
                    build::mul(&build::mul(&build::scalar(c), &lowered), &da)
                } else {
                    // d(a^b) = a^b (b' ln a + b a'/a)
                    let t1 = build::mul(&db, &build::func(Func::Log, a));
                    let t2 = build::div(&build::mul(b, &da), a);
                    build::mul(e, &build::add(&t1, &t2))
                }
            }
            Node::Neg(a) => FieldExpr::neg(&self.diff(a, wrt)),
            Node::Add(a, b) => {
                let (da, db) = (self.diff(a, wrt), self.diff(b, wrt));
                build::add(&da, &db)
            }
            Node::Sub(a, b) => {
                let (da, db) = (self.diff(a, wrt), self.diff(b, wrt));
                build::sub(&da, &db)
            }
            Node::Mul(a, b) => {
                let (da, db) = (self.diff(a, wrt), self.diff(b, wrt));
                build::add(&build::mul(&da, b), &build::mul(a, &db))
            }
            Node::Div(a, b) => {
                let (da, db) = (self.diff(a, wrt), self.diff(b, wrt));
                if db.is_zero() {
                    build::div(&da, b)
                } else {
                    // (a/b)' = (a' - (a/b) b') / b
                    build::div(&build::sub(&da, &build::mul(e, &db)), b)
                }
            }
            Node::Dot(a, b) => {
                let (da, db) = (self.diff(a, wrt), self.diff(b, wrt));
                build::add(&build::dot(&da, b), &build::dot(a, &db))
            }
            Node::Outer(a, b) => {
                let (da, db) = (self.diff(a, wrt), self.diff(b, wrt));
                build::add(&build::outer(&da, b), &build::outer(a, &db))
            }
            Node::Transpose(a) => build::transpose(&self.diff(a, wrt)),
            Node::Norm(a) => {
                let da = self.diff(a, wrt);
                build::div(&build::dot(a, &da), e)
            }
            Node::Component(a, i, j) => build::comp(&self.diff(a, wrt), *i, *j),
            Node::VecBuild(c) => {
                let d: Vec<FieldExpr> = c.iter().map(|x| self.diff(x, wrt)).collect();
                build::vec3([d[0].clone(), d[1].clone(), d[2].clone()])
            }
            Node::MatBuild(c) => {
                let d: Vec<FieldExpr> = c.iter().map(|x| self.diff(x, wrt)).collect();
                build::mat3(std::array::from_fn(|k| d[k].clone()))
            }
            Node::Grad(_) | Node::Divergence(_) | Node::Laplacian(_) | Node::TimeDerivative(_) => {
                let x = self.expand(e);
                self.diff(&x, wrt)
            }
        };
        self.derivs.insert(key, (e.clone(), r.clone()));
        r
    }
}

/// Rebuild a node with transformed children, re-running simplification.
pub(crate) fn rebuild(e: &FieldExpr, mut f: impl FnMut(&FieldExpr) -> FieldExpr) -> FieldExpr {
    match e.node() {
        Node::Const(_) | Node::Coord | Node::Time | Node::Symbol(_) => e.clone(),
        Node::Func(func, a) => build::func(*func, &f(a)),
        Node::Pow(a, b) => {
            let a = f(a);
            build::pow(&a, &f(b))
        }
        Node::Neg(a) => FieldExpr::neg(&f(a)),
        Node::Add(a, b) => {
            let a = f(a);
            build::add(&a, &f(b))
        }
        Node::Sub(a, b) => {
            let a = f(a);
            build::sub(&a, &f(b))
        }
        Node::Mul(a, b) => {
            let a = f(a);
            build::mul(&a, &f(b))
        }
        Node::Div(a, b) => {
            let a = f(a);
            build::div(&a, &f(b))
        }
        Node::Dot(a, b) => {
            let a = f(a);
            build::dot(&a, &f(b))
        }
        Node::Outer(a, b) => {
            let a = f(a);
            build::outer(&a, &f(b))
        }
        Node::Transpose(a) => build::transpose(&f(a)),
        Node::Norm(a) => build::norm(&f(a)),
        Node::Grad(a) => FieldExpr::grad(&f(a)).expect("shape preserved"),
        Node::Divergence(a) => FieldExpr::divergence(&f(a)).expect("shape preserved"),
        Node::Laplacian(a) => FieldExpr::laplacian(&f(a)),
        Node::TimeDerivative(a) => FieldExpr::time_derivative(&f(a)),
        Node::Component(a, i, j) => build::comp(&f(a), *i, *j),
        Node::VecBuild(c) => {
            let d: Vec<FieldExpr> = c.iter().map(&mut f).collect();
            build::vec3([d[0].clone(), d[1].clone(), d[2].clone()])
        }
        Node::MatBuild(c) => {
            let d: Vec<FieldExpr> = c.iter().map(&mut f).collect();
            build::mat3(std::array::from_fn(|k| d[k].clone()))
        }
    }
}
