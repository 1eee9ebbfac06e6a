//! Recursive-descent parser for the field expression language.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | power ;
//! power   = primary [ "^" unary ] ;
//! primary = number | ident | ident "(" [ expr { "," expr } ] ")" | "(" expr ")" ;
//! ```
//!
//! Reserved identifiers: `x` (position), `t` (time), `x1`..`x3`, `u` (vector
//! field), `p` (scalar field), `pi`. Calls: `sin cos exp log sqrt abs`,
//! `pow(a, b)`, `dot outer transpose norm grad div lap dt`, `comp(e, i[, j])`
//! with 1-based indices, `vec(a, b, c)`, `mat(a11, ..., a33)` in row-major
//! order and `eye()`. Any other identifier is a parameter symbol whose shape
//! comes from the [`SymbolTable`] (scalar when not listed).

use std::collections::BTreeMap;

use nalgebra::Matrix3;
use thiserror::Error;

use super::node::{FieldExpr, Func, ShapeError};
use super::value::Shape;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ParseError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("shape error at line {line}, column {column} in `{node}`: {message}")]
    Shape { line: usize, column: usize, node: String, message: String },
}

/// Shapes of parameter symbols known to the parser.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolTable {
    shapes: BTreeMap<String, Shape>,
}

impl Default for SymbolTable {
    fn default() -> Self {
        Self::standard()
    }
}

impl SymbolTable {
    /// Table with the conventional symbols: `u`, `v`, `x0r`, `v0r`, `u0r`
    /// (vectors), `Omega` (matrix); everything else defaults to scalar.
    pub fn standard() -> Self {
        let mut shapes = BTreeMap::new();
        for v in ["u", "v", "x0r", "v0r", "u0r"] {
            shapes.insert(v.to_string(), Shape::Vec3);
        }
        shapes.insert("Omega".to_string(), Shape::Mat3);
        shapes.insert("p".to_string(), Shape::Scalar);
        Self { shapes }
    }

    pub fn empty() -> Self {
        Self { shapes: BTreeMap::new() }
    }

    pub fn with(mut self, name: &str, shape: Shape) -> Self {
        self.insert(name, shape);
        self
    }

    pub fn insert(&mut self, name: &str, shape: Shape) {
        self.shapes.insert(name.to_string(), shape);
    }

    pub fn shape_of(&self, name: &str) -> Shape {
        self.shapes.get(name).copied().unwrap_or(Shape::Scalar)
    }
}

/// Names that cannot be used as parameter symbols.
pub const RESERVED: &[&str] = &[
    "x",
    "t",
    "x1",
    "x2",
    "x3",
    "pi",
    "sin",
    "cos",
    "exp",
    "log",
    "sqrt",
    "abs",
    "pow",
    "power",
    "dot",
    "outer",
    "transpose",
    "norm",
    "grad",
    "div",
    "lap",
    "dt",
    "comp",
    "vec",
    "mat",
    "eye",
];

/// Parse with the standard symbol table.
pub fn parse_field_expr(text: &str) -> Result<FieldExpr, ParseError> {
    parse_with(text, &SymbolTable::standard())
}

pub fn parse_with(text: &str, table: &SymbolTable) -> Result<FieldExpr, ParseError> {
    let tokens = lex(text)?;
    let mut p = Parser { tokens, pos: 0, table };
    let e = p.expr()?;
    if let Some(tok) = p.peek() {
        return Err(p.syntax(tok, format!("unexpected `{}` after expression", tok.kind.describe())));
    }
    Ok(e)
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(f64),
    Ident(String),
    Op(char),
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Num(n) => n.to_string(),
            Kind::Ident(s) => s.clone(),
            Kind::Op(c) => c.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let s: String = chars[start..i].iter().collect();
            let n: f64 = s.parse().map_err(|_| ParseError::Syntax { line: tl, column: tc, message: format!("malformed number `{s}`") })?;
            col += i - start;
            out.push(Token { kind: Kind::Num(n), line: tl, column: tc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token { kind: Kind::Ident(chars[start..i].iter().collect()), line: tl, column: tc });
            continue;
        }
        if "+-*/^(),".contains(c) {
            out.push(Token { kind: Kind::Op(c), line: tl, column: tc });
            i += 1;
            col += 1;
            continue;
        }
        return Err(ParseError::Syntax { line: tl, column: tc, message: format!("unexpected character `{c}`") });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    table: &'a SymbolTable,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn peek_op(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { kind: Kind::Op(o), .. }) if *o == c)
    }

    fn end_pos(&self) -> (usize, usize) {
        match self.tokens.last() {
            Some(t) => (t.line, t.column + t.kind.describe().len()),
            None => (1, 1),
        }
    }

    fn syntax(&self, tok: &Token, message: String) -> ParseError {
        ParseError::Syntax { line: tok.line, column: tok.column, message }
    }

    fn eof(&self, what: &str) -> ParseError {
        let (line, column) = self.end_pos();
        ParseError::Syntax { line, column, message: format!("unexpected end of input, expected {what}") }
    }

    fn expect_op(&mut self, c: char) -> Result<(), ParseError> {
        match self.peek().cloned() {
            Some(Token { kind: Kind::Op(o), .. }) if o == c => {
                self.pos += 1;
                Ok(())
            }
            Some(tok) => Err(self.syntax(&tok, format!("expected `{c}`, found `{}`", tok.kind.describe()))),
            None => Err(self.eof(&format!("`{c}`"))),
        }
    }

    fn shape(tok: &Token, node: &str, r: Result<FieldExpr, ShapeError>) -> Result<FieldExpr, ParseError> {
        r.map_err(|e| ParseError::Shape { line: tok.line, column: tok.column, node: node.to_string(), message: e.message })
    }

    fn expr(&mut self) -> Result<FieldExpr, ParseError> {
        let mut lhs = self.term()?;
        while self.peek_op('+') || self.peek_op('-') {
            let tok = self.tokens[self.pos].clone();
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if tok.kind == Kind::Op('+') {
                Self::shape(&tok, "+", FieldExpr::add(&lhs, &rhs))?
            } else {
                Self::shape(&tok, "-", FieldExpr::sub(&lhs, &rhs))?
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<FieldExpr, ParseError> {
        let mut lhs = self.unary()?;
        while self.peek_op('*') || self.peek_op('/') {
            let tok = self.tokens[self.pos].clone();
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = if tok.kind == Kind::Op('*') {
                Self::shape(&tok, "*", FieldExpr::mul(&lhs, &rhs))?
            } else {
                Self::shape(&tok, "/", FieldExpr::div(&lhs, &rhs))?
            };
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<FieldExpr, ParseError> {
        if self.peek_op('-') {
            self.pos += 1;
            let e = self.unary()?;
            return Ok(FieldExpr::neg(&e));
        }
        self.power()
    }

    fn power(&mut self) -> Result<FieldExpr, ParseError> {
        let base = self.primary()?;
        if self.peek_op('^') {
            let tok = self.tokens[self.pos].clone();
            self.pos += 1;
            let exp = self.unary()?;
            return Self::shape(&tok, "^", FieldExpr::pow(&base, &exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<FieldExpr, ParseError> {
        let tok = self.peek().cloned().ok_or_else(|| self.eof("an expression"))?;
        self.pos += 1;
        match &tok.kind {
            Kind::Num(n) => Ok(FieldExpr::scalar(*n)),
            Kind::Op('(') => {
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Kind::Op(c) => Err(self.syntax(&tok, format!("unexpected `{c}`"))),
            Kind::Ident(name) => {
                if self.peek_op('(') {
                    self.pos += 1;
                    let args = self.args()?;
                    self.call(&tok, name, args)
                } else {
                    self.identifier(&tok, name)
                }
            }
        }
    }

    fn args(&mut self) -> Result<Vec<FieldExpr>, ParseError> {
        let mut args = Vec::new();
        if self.peek_op(')') {
            self.pos += 1;
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.peek_op(',') {
                self.pos += 1;
                continue;
            }
            self.expect_op(')')?;
            return Ok(args);
        }
    }

    fn identifier(&self, tok: &Token, name: &str) -> Result<FieldExpr, ParseError> {
        Ok(match name {
            "x" => FieldExpr::coord(),
            "t" => FieldExpr::time(),
            "x1" => FieldExpr::coord_component(0),
            "x2" => FieldExpr::coord_component(1),
            "x3" => FieldExpr::coord_component(2),
            "pi" => FieldExpr::scalar(std::f64::consts::PI),
            "u" => FieldExpr::symbol("u", Shape::Vec3),
            "p" => FieldExpr::symbol("p", Shape::Scalar),
            _ if RESERVED.contains(&name) => {
                return Err(self.syntax(tok, format!("`{name}` is a function and needs arguments")));
            }
            _ => FieldExpr::symbol(name, self.table.shape_of(name)),
        })
    }

    fn arity(&self, tok: &Token, name: &str, args: &[FieldExpr], n: usize) -> Result<(), ParseError> {
        if args.len() != n {
            return Err(self.syntax(tok, format!("`{name}` takes {n} argument(s), got {}", args.len())));
        }
        Ok(())
    }

    fn index(&self, tok: &Token, e: &FieldExpr) -> Result<usize, ParseError> {
        match e.as_const().and_then(|v| v.as_scalar()) {
            Some(k) if k.fract() == 0.0 && (1.0..=3.0).contains(&k) => Ok(k as usize - 1),
            _ => Err(self.syntax(tok, "component indices must be the integer literals 1, 2 or 3".into())),
        }
    }

    fn call(&self, tok: &Token, name: &str, args: Vec<FieldExpr>) -> Result<FieldExpr, ParseError> {
        if let Some(f) = Func::from_name(name) {
            self.arity(tok, name, &args, 1)?;
            return Self::shape(tok, name, FieldExpr::func(f, &args[0]));
        }
        match name {
            "pow" | "power" => {
                self.arity(tok, name, &args, 2)?;
                Self::shape(tok, name, FieldExpr::pow(&args[0], &args[1]))
            }
            "dot" => {
                self.arity(tok, name, &args, 2)?;
                Self::shape(tok, name, FieldExpr::dot(&args[0], &args[1]))
            }
            "outer" => {
                self.arity(tok, name, &args, 2)?;
                Self::shape(tok, name, FieldExpr::outer(&args[0], &args[1]))
            }
            "transpose" => {
                self.arity(tok, name, &args, 1)?;
                Self::shape(tok, name, FieldExpr::transpose(&args[0]))
            }
            "norm" => {
                self.arity(tok, name, &args, 1)?;
                Self::shape(tok, name, FieldExpr::norm(&args[0]))
            }
            "grad" => {
                self.arity(tok, name, &args, 1)?;
                Self::shape(tok, name, FieldExpr::grad(&args[0]))
            }
            "div" => {
                self.arity(tok, name, &args, 1)?;
                Self::shape(tok, name, FieldExpr::divergence(&args[0]))
            }
            "lap" => {
                self.arity(tok, name, &args, 1)?;
                Ok(FieldExpr::laplacian(&args[0]))
            }
            "dt" => {
                self.arity(tok, name, &args, 1)?;
                Ok(FieldExpr::time_derivative(&args[0]))
            }
            "comp" => {
                if args.len() != 2 && args.len() != 3 {
                    return Err(self.syntax(tok, format!("`comp` takes 2 or 3 arguments, got {}", args.len())));
                }
                let i = self.index(tok, &args[1])?;
                let j = match args.get(2) {
                    Some(e) => Some(self.index(tok, e)?),
                    None => None,
                };
                Self::shape(tok, name, FieldExpr::component(&args[0], i, j))
            }
            "vec" => {
                self.arity(tok, name, &args, 3)?;
                let [a, b, c]: [FieldExpr; 3] = args.try_into().expect("arity checked");
                Self::shape(tok, name, FieldExpr::vec_build([a, b, c]))
            }
            "mat" => {
                self.arity(tok, name, &args, 9)?;
                let arr: [FieldExpr; 9] = args.try_into().expect("arity checked");
                Self::shape(tok, name, FieldExpr::mat_build(arr))
            }
            "eye" => {
                self.arity(tok, name, &args, 0)?;
                Ok(FieldExpr::matrix(Matrix3::identity()))
            }
            _ => Err(self.syntax(tok, format!("unknown function `{name}`"))),
        }
    }
}
