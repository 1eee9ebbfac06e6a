//! Substitution of symbols and coordinates.

use std::collections::{BTreeMap, HashMap};

use thiserror::Error;

use super::diff::{expand_derivatives, rebuild};
use super::node::{FieldExpr, Node};
use super::value::Shape;

#[derive(Debug, Clone, Error, PartialEq)]
#[error("cannot substitute a {found} expression for symbol `{name}` of shape {expected}")]
pub struct SubstError {
    pub name: String,
    pub expected: Shape,
    pub found: Shape,
}

/// Top-down rewrite: `f` may replace a node outright (its children are then
/// not visited); otherwise the node is rebuilt from rewritten children.
pub fn rewrite(expr: &FieldExpr, f: &mut dyn FnMut(&FieldExpr) -> Option<FieldExpr>) -> FieldExpr {
    let mut memo: HashMap<usize, (FieldExpr, FieldExpr)> = HashMap::new();
    rewrite_rec(expr, f, &mut memo)
}

fn rewrite_rec(
    e: &FieldExpr,
    f: &mut dyn FnMut(&FieldExpr) -> Option<FieldExpr>,
    memo: &mut HashMap<usize, (FieldExpr, FieldExpr)>,
) -> FieldExpr {
    if let Some((_, r)) = memo.get(&e.ptr()) {
        return r.clone();
    }
    let r = match f(e) {
        Some(r) => r,
        None => rebuild(e, |c| rewrite_rec(c, f, memo)),
    };
    memo.insert(e.ptr(), (e.clone(), r.clone()));
    r
}

/// Replace named symbols by expressions of the same shape.
pub fn substitute(expr: &FieldExpr, map: &BTreeMap<String, FieldExpr>) -> Result<FieldExpr, SubstError> {
    for (name, shape) in expr.symbols() {
        if let Some(r) = map.get(&name) {
            if r.shape() != shape {
                return Err(SubstError { name, expected: shape, found: r.shape() });
            }
        }
    }
    if !expr.has_symbols() {
        return Ok(expr.clone());
    }
    Ok(rewrite(expr, &mut |e| match e.node() {
        Node::Symbol(name) => map.get(name).cloned(),
        _ if !e.has_symbols() => Some(e.clone()),
        _ => None,
    }))
}

/// Compose a field with a coordinate map: every `x` is replaced by `x_of`
/// and every `t` by `t_of`, simultaneously. Differential operators are
/// expanded first so they keep referring to the original variables.
pub fn compose(expr: &FieldExpr, x_of: &FieldExpr, t_of: &FieldExpr) -> FieldExpr {
    assert_eq!(x_of.shape(), Shape::Vec3, "coordinate map must be vec3");
    assert_eq!(t_of.shape(), Shape::Scalar, "time map must be scalar");
    let expanded = expand_derivatives(expr);
    rewrite(&expanded, &mut |e| match e.node() {
        Node::Coord => Some(x_of.clone()),
        Node::Time => Some(t_of.clone()),
        _ if !e.depends_on_coord() && !e.depends_on_time() => Some(e.clone()),
        _ => None,
    })
}
