//! Scalar fields given as arithmetic expression text.
//!
//! Hamiltonians, Casimirs, bracket generators and structure-matrix entries
//! all enter the crate as [`Expression`]s. An expression is parsed once and
//! is immutable afterwards; [`Expression::evaluate`] gives the value and
//! [`Expression::derive`] gives value, gradient and Hessian from a
//! second-order forward-mode jet (no finite differences).
//!
//! The grammar is closed: numbers, variables, bound parameters, `pi`, the
//! functions `sin cos exp log sqrt`, unary minus and `+ - * / ^`, with `^`
//! binding tightest and associating to the right. See `docs/grammar.ebnf`.

mod jet;
mod parse;
mod print;

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

use jet::Jet;

/// Named real constants referenced by an expression.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("syntax error at position {position}: expected one of {expected:?}")]
    Syntax {
        position: usize,
        expected: Vec<String>,
    },
    #[error("unknown identifier `{name}` at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("function `{function}` takes {expected} argument(s), got {found}")]
    Arity {
        function: String,
        expected: usize,
        found: usize,
    },
    #[error("domain error in `{subexpr}`: {reason}")]
    Domain { subexpr: String, reason: String },
    #[error("point has length {found}, expression has dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("parameter `{0}` is not bound")]
    UnboundParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl UnaryOp {
    pub(crate) fn function(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Self::Sin,
            "cos" => Self::Cos,
            "exp" => Self::Exp,
            "log" => Self::Log,
            "sqrt" => Self::Sqrt,
            _ => return None,
        })
    }

    pub(crate) fn name(self) -> &'static str {
        match self {
            Self::Neg => "-",
            Self::Sin => "sin",
            Self::Cos => "cos",
            Self::Exp => "exp",
            Self::Log => "log",
            Self::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub(crate) fn symbol(self) -> char {
        match self {
            Self::Add => '+',
            Self::Sub => '-',
            Self::Mul => '*',
            Self::Div => '/',
            Self::Pow => '^',
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(usize),
    Param(String),
    Unary(UnaryOp, Box<Node>),
    Binary(BinaryOp, Box<Node>, Box<Node>),
}

impl Node {
    fn depends_on_vars(&self) -> bool {
        match self {
            Node::Const(_) | Node::Param(_) => false,
            Node::Var(_) => true,
            Node::Unary(_, a) => a.depends_on_vars(),
            Node::Binary(_, a, b) => a.depends_on_vars() || b.depends_on_vars(),
        }
    }

    fn params_into(&self, out: &mut Vec<String>) {
        match self {
            Node::Param(p) if !out.contains(p) => out.push(p.clone()),
            Node::Unary(_, a) => a.params_into(out),
            Node::Binary(_, a, b) => {
                a.params_into(out);
                b.params_into(out);
            }
            _ => {}
        }
    }
}

/// Default coordinate names: `x, y, z` up to three dimensions, the
/// `se(2)* × R²` chart `x, y, z, q, p` in five, `x1..xn` otherwise.
pub fn default_variable_names(dim: usize) -> Vec<String> {
    match dim {
        0..=3 => ["x", "y", "z"][..dim].iter().map(|s| s.to_string()).collect(),
        5 => ["x", "y", "z", "q", "p"].iter().map(|s| s.to_string()).collect(),
        _ => (1..=dim).map(|i| format!("x{i}")).collect(),
    }
}

/// A parsed scalar field on `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dim: usize,
    names: Vec<String>,
    params: Params,
}

impl Expression {
    /// Parses `source` over `dim` variables named by [`default_variable_names`]
    /// (and always `x1..xn`).
    pub fn parse(source: &str, dim: usize, params: &Params) -> Result<Self, ExprError> {
        Self::parse_with_names(source, &default_variable_names(dim), params)
    }

    /// Parses with explicit coordinate names; `x1..xn` stay available.
    pub fn parse_with_names(
        source: &str,
        names: &[String],
        params: &Params,
    ) -> Result<Self, ExprError> {
        let root = parse::Parser::new(source, names, params).parse()?;
        let mut used = Vec::new();
        root.params_into(&mut used);
        let params = used
            .into_iter()
            .map(|p| {
                let v = params[&p];
                (p, v)
            })
            .collect();
        Ok(Self {
            root,
            dim: names.len(),
            names: names.to_vec(),
            params,
        })
    }

    /// Builds an expression directly from a tree.
    pub fn from_node(root: Node, dim: usize, params: Params) -> Result<Self, ExprError> {
        let mut used = Vec::new();
        root.params_into(&mut used);
        if let Some(p) = used.iter().find(|p| !params.contains_key(*p)) {
            return Err(ExprError::UnboundParameter(p.clone()));
        }
        Ok(Self {
            root,
            dim,
            names: default_variable_names(dim),
            params,
        })
    }

    pub fn constant(value: f64, dim: usize) -> Self {
        Self {
            root: Node::Const(value),
            dim,
            names: default_variable_names(dim),
            params: Params::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn variable_names(&self) -> &[String] {
        &self.names
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }

    /// Returns a copy with the given parameters rebound. Names the
    /// expression does not reference are ignored.
    pub fn with_params(&self, params: &Params) -> Self {
        let mut out = self.clone();
        for (k, v) in out.params.iter_mut() {
            if let Some(nv) = params.get(k) {
                *v = *nv;
            }
        }
        out
    }

    /// `self * other`, both over the same space.
    pub fn product(&self, other: &Expression) -> Expression {
        self.combine(BinaryOp::Mul, other)
    }

    pub fn combine(&self, op: BinaryOp, other: &Expression) -> Expression {
        debug_assert_eq!(self.dim, other.dim);
        let mut params = self.params.clone();
        params.extend(other.params.iter().map(|(k, v)| (k.clone(), *v)));
        Expression {
            root: Node::Binary(op, Box::new(self.root.clone()), Box::new(other.root.clone())),
            dim: self.dim,
            names: self.names.clone(),
            params,
        }
    }

    /// Integer power `self^k`.
    pub fn powi(&self, k: i32) -> Expression {
        Expression {
            root: Node::Binary(
                BinaryOp::Pow,
                Box::new(self.root.clone()),
                Box::new(Node::Const(k as f64)),
            ),
            dim: self.dim,
            names: self.names.clone(),
            params: self.params.clone(),
        }
    }

    fn check_point(&self, point: &[f64]) -> Result<(), ExprError> {
        if point.len() != self.dim {
            return Err(ExprError::DimensionMismatch {
                expected: self.dim,
                found: point.len(),
            });
        }
        Ok(())
    }

    pub fn evaluate(&self, point: &[f64]) -> Result<f64, ExprError> {
        self.check_point(point)?;
        self.eval_node(&self.root, point)
    }

    fn domain(&self, node: &Node, reason: &str) -> ExprError {
        ExprError::Domain {
            subexpr: print::node_to_string(node, &self.names),
            reason: reason.to_string(),
        }
    }

    fn lookup(&self, p: &str) -> Result<f64, ExprError> {
        self.params
            .get(p)
            .copied()
            .ok_or_else(|| ExprError::UnboundParameter(p.to_string()))
    }

    fn eval_node(&self, node: &Node, x: &[f64]) -> Result<f64, ExprError> {
        Ok(match node {
            Node::Const(c) => *c,
            Node::Var(i) => x[*i],
            Node::Param(p) => self.lookup(p)?,
            Node::Unary(op, a) => {
                let u = self.eval_node(a, x)?;
                match op {
                    UnaryOp::Neg => -u,
                    UnaryOp::Sin => u.sin(),
                    UnaryOp::Cos => u.cos(),
                    UnaryOp::Exp => u.exp(),
                    UnaryOp::Log => {
                        if u <= 0.0 {
                            return Err(self.domain(node, "log of a non-positive value"));
                        }
                        u.ln()
                    }
                    UnaryOp::Sqrt => {
                        if u < 0.0 {
                            return Err(self.domain(node, "sqrt of a negative value"));
                        }
                        u.sqrt()
                    }
                }
            }
            Node::Binary(op, a, b) => {
                let u = self.eval_node(a, x)?;
                let v = self.eval_node(b, x)?;
                match op {
                    BinaryOp::Add => u + v,
                    BinaryOp::Sub => u - v,
                    BinaryOp::Mul => u * v,
                    BinaryOp::Div => {
                        if v == 0.0 {
                            return Err(self.domain(node, "division by zero"));
                        }
                        u / v
                    }
                    BinaryOp::Pow => pow_value(u, v).map_err(|r| self.domain(node, r))?,
                }
            }
        })
    }

    /// Value, gradient and Hessian at `point`.
    pub fn derive(&self, point: &[f64]) -> Result<Derivatives, ExprError> {
        self.check_point(point)?;
        let jet = self.jet_node(&self.root, point)?;
        let n = self.dim;
        let d = Derivatives {
            value: jet.v,
            gradient: DVector::from_vec(jet.g),
            hessian: DMatrix::from_row_slice(n, n, &jet.h),
        };
        if !d.value.is_finite()
            || d.gradient.iter().any(|v| !v.is_finite())
            || d.hessian.iter().any(|v| !v.is_finite())
        {
            return Err(self.domain(&self.root, "not twice differentiable at this point"));
        }
        Ok(d)
    }

    pub fn gradient(&self, point: &[f64]) -> Result<DVector<f64>, ExprError> {
        self.derive(point).map(|d| d.gradient)
    }

    fn jet_node(&self, node: &Node, x: &[f64]) -> Result<Jet, ExprError> {
        let n = self.dim;
        Ok(match node {
            Node::Const(c) => Jet::constant(*c, n),
            Node::Var(i) => Jet::variable(x[*i], *i, n),
            Node::Param(p) => Jet::constant(self.lookup(p)?, n),
            Node::Unary(op, a) => {
                let u = self.jet_node(a, x)?;
                let v = u.v;
                match op {
                    UnaryOp::Neg => u.neg(),
                    UnaryOp::Sin => u.chain(v.sin(), v.cos(), -v.sin()),
                    UnaryOp::Cos => u.chain(v.cos(), -v.sin(), -v.cos()),
                    UnaryOp::Exp => {
                        let e = v.exp();
                        u.chain(e, e, e)
                    }
                    UnaryOp::Log => {
                        if v <= 0.0 {
                            return Err(self.domain(node, "log of a non-positive value"));
                        }
                        u.chain(v.ln(), 1.0 / v, -1.0 / (v * v))
                    }
                    UnaryOp::Sqrt => {
                        if v <= 0.0 {
                            return Err(self.domain(node, "sqrt is not differentiable at or below zero"));
                        }
                        let s = v.sqrt();
                        u.chain(s, 0.5 / s, -0.25 / (s * v))
                    }
                }
            }
            Node::Binary(op, a, b) => {
                let u = self.jet_node(a, x)?;
                match op {
                    BinaryOp::Add => u.add(&self.jet_node(b, x)?),
                    BinaryOp::Sub => u.sub(&self.jet_node(b, x)?),
                    BinaryOp::Mul => u.mul(&self.jet_node(b, x)?),
                    BinaryOp::Div => {
                        let w = self.jet_node(b, x)?;
                        if w.v == 0.0 {
                            return Err(self.domain(node, "division by zero"));
                        }
                        let r = w.v;
                        u.mul(&w.chain(1.0 / r, -1.0 / (r * r), 2.0 / (r * r * r)))
                    }
                    BinaryOp::Pow => {
                        if !b.depends_on_vars() {
                            let c = self.eval_node(b, x)?;
                            let value = pow_value(u.v, c).map_err(|r| self.domain(node, r))?;
                            let d1 = if c == 0.0 { 0.0 } else { c * pow_value(u.v, c - 1.0).map_err(|r| self.domain(node, r))? };
                            let d2 = if c == 0.0 || c == 1.0 {
                                0.0
                            } else {
                                c * (c - 1.0) * pow_value(u.v, c - 2.0).map_err(|r| self.domain(node, r))?
                            };
                            u.chain(value, d1, d2)
                        } else {
                            if u.v <= 0.0 {
                                return Err(self.domain(node, "variable exponent needs a positive base"));
                            }
                            let w = self.jet_node(b, x)?;
                            let l = u.v.ln();
                            let log_u = u.chain(l, 1.0 / u.v, -1.0 / (u.v * u.v));
                            let z = w.mul(&log_u);
                            let e = z.v.exp();
                            z.chain(e, e, e)
                        }
                    }
                }
            }
        })
    }
}

fn pow_value(u: f64, v: f64) -> Result<f64, &'static str> {
    if v.fract() == 0.0 && v.abs() < 1024.0 {
        if u == 0.0 && v < 0.0 {
            return Err("division by zero");
        }
        return Ok(u.powi(v as i32));
    }
    if u < 0.0 {
        return Err("negative base with non-integer exponent");
    }
    if u == 0.0 && v < 0.0 {
        return Err("division by zero");
    }
    Ok(u.powf(v))
}

/// Output of [`Expression::derive`].
#[derive(Debug, Clone, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub gradient: DVector<f64>,
    pub hessian: DMatrix<f64>,
}

impl core::fmt::Display for Expression {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        print::write_node(f, &self.root, &self.names)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    fn p(src: &str, dim: usize) -> Expression {
        Expression::parse(src, dim, &Params::new()).unwrap()
    }

    #[test]
    fn parse_top_node_is_sum() {
        let e = p("x^2+y^2-z^2", 3);
        assert_eq!(e.dim(), 3);
        // left-associative: (x^2 + y^2) - z^2
        assert!(matches!(e.root(), Node::Binary(BinaryOp::Sub, _, _)));
        let e = p("x^2+y^2", 3);
        assert!(matches!(e.root(), Node::Binary(BinaryOp::Add, _, _)));
    }

    #[test]
    fn se2_plus_hamiltonian_parses() {
        let mut params = Params::new();
        params.insert("a".into(), 1.0);
        let e = Expression::parse("a*z - q*y + (q^2+p^2)/2", 5, &params).unwrap();
        assert_eq!(e.dim(), 5);
        assert_eq!(e.param("a"), Some(1.0));
        // x, y, z, q, p = 0, 1, 2, 3, 4
        let v = e.evaluate(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(v, 2.0 - 3.0 + 12.5);
    }

    #[test]
    fn trailing_operator_is_syntax_error_at_end() {
        let err = Expression::parse("x +", 3, &Params::new()).unwrap_err();
        match err {
            ExprError::Syntax { position, expected } => {
                assert_eq!(position, 3);
                assert!(expected.iter().any(|e| e == "number"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_identifier_and_arity() {
        assert!(matches!(
            Expression::parse("w + 1", 3, &Params::new()),
            Err(ExprError::UnknownIdentifier { .. })
        ));
        assert!(matches!(
            Expression::parse("sin(x, y)", 3, &Params::new()),
            Err(ExprError::Arity { expected: 1, found: 2, .. })
        ));
        assert!(matches!(
            Expression::parse("x4", 3, &Params::new()),
            Err(ExprError::UnknownIdentifier { .. })
        ));
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(p("2^3^2", 1).evaluate(&[0.0]).unwrap(), 512.0);
        assert_eq!(p("-x^2", 1).evaluate(&[3.0]).unwrap(), -9.0);
        assert_eq!(p("2^-1", 1).evaluate(&[0.0]).unwrap(), 0.5);
        assert_eq!(p("1 - 2 - 3", 1).evaluate(&[0.0]).unwrap(), -4.0);
        assert_eq!(p("8 / 4 / 2", 1).evaluate(&[0.0]).unwrap(), 1.0);
        assert_eq!(p("2*3^2", 1).evaluate(&[0.0]).unwrap(), 18.0);
        assert_eq!(p("1.5e1 + .5", 1).evaluate(&[0.0]).unwrap(), 15.5);
    }

    #[test]
    fn evaluate_examples() {
        assert_eq!(p("x^2+y^2-z^2", 3).evaluate(&[1.0, 2.0, 3.0]).unwrap(), -4.0);
        assert_eq!(p("(x^2+y^2)/2", 3).evaluate(&[0.0, 0.0, 5.0]).unwrap(), 0.0);
        assert!((p("sin(x)", 3).evaluate(&[PI / 2.0, 0.3, 0.1]).unwrap() - 1.0).abs() < 1e-15);
        assert!((p("x1 + pi", 4).evaluate(&[1.0, 0.0, 0.0, 0.0]).unwrap() - (1.0 + PI)).abs() < 1e-15);
    }

    #[test]
    fn domain_errors_name_the_subexpression() {
        let err = p("1 + log(x - 2)", 1).evaluate(&[1.0]).unwrap_err();
        match err {
            ExprError::Domain { subexpr, .. } => assert_eq!(subexpr, "log(x - 2)"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(p("sqrt(x)", 1).evaluate(&[-1.0]), Err(ExprError::Domain { .. })));
        assert!(matches!(p("1/x", 1).evaluate(&[0.0]), Err(ExprError::Domain { .. })));
        assert!(matches!(p("x^0.5", 1).evaluate(&[-2.0]), Err(ExprError::Domain { .. })));
        assert!(matches!(
            p("x", 2).evaluate(&[1.0]),
            Err(ExprError::DimensionMismatch { expected: 2, found: 1 })
        ));
    }

    #[test]
    fn derive_quadratic() {
        let d = p("x^2+y^2-z^2", 3).derive(&[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(d.value, -4.0);
        assert_eq!(d.gradient.as_slice(), &[2.0, 4.0, -6.0]);
        assert_eq!(d.hessian, DMatrix::from_diagonal(&DVector::from_vec(alloc::vec![2.0, 2.0, -2.0])));
    }

    #[test]
    fn derive_cubic_vanishes_at_origin() {
        let mut params = Params::new();
        params.insert("a".into(), 1.0);
        let e = Expression::parse("(a^2*x^2 - y^2)*y", 3, &params).unwrap();
        let d = e.derive(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.value, 0.0);
        assert!(d.gradient.iter().all(|v| *v == 0.0));
        assert!(d.hessian.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn variable_exponent() {
        let e = p("x^y", 2);
        let d = e.derive(&[2.0, 3.0]).unwrap();
        let ln2 = 2f64.ln();
        assert!((d.value - 8.0).abs() < 1e-14);
        assert!((d.gradient[0] - 12.0).abs() < 1e-13);
        assert!((d.gradient[1] - 8.0 * ln2).abs() < 1e-13);
        assert!((d.hessian[(0, 1)] - (4.0 + 12.0 * ln2)).abs() < 1e-12);
        assert_eq!(d.hessian[(0, 1)], d.hessian[(1, 0)]);
    }

    #[test]
    fn with_params_rebinds() {
        let mut params = Params::new();
        params.insert("a".into(), 1.0);
        let e = Expression::parse("a*x", 1, &params).unwrap();
        params.insert("a".into(), 3.0);
        params.insert("unused".into(), 7.0);
        let e3 = e.with_params(&params);
        assert_eq!(e3.evaluate(&[2.0]).unwrap(), 6.0);
        assert!(e3.param("unused").is_none());
    }

    #[test]
    fn print_round_trips_simple_cases() {
        for src in ["x - (y - z)", "-(x*y)", "(-x)^2", "x^y^z", "2^-x", "x/(y*z)", "exp(-x^2)/sqrt(1 + y^2)"] {
            let e = p(src, 3);
            let printed = e.to_string();
            let e2 = p(&printed, 3);
            assert_eq!(e.root(), e2.root(), "{src} -> {printed}");
        }
    }
}
