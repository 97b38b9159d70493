//! Expression trees for scenario functions: polynomials in `p_l`, `z_j`
//! and `conj(z_j)` plus `abs`/`re`/`im` wrappers.
//!
//! Polynomial trees (everything except `abs`) carry exact Wirtinger
//! derivatives `∂/∂z_j`, `∂/∂z̄_j`, `∂/∂p_l` by term differentiation,
//! which the checks use as finite-difference-free oracles.

use std::fmt;

use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExprError {
    #[error("parse error at byte {at}: {message}")]
    Parse { at: usize, message: String },
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("variable {name} exceeds the chart ({detail})")]
    OutOfChart { name: String, detail: String },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(Complex64),
    /// `p_l`, zero-based.
    P(usize),
    /// `z_j`, zero-based.
    Z(usize),
    Conj(Box<Expr>),
    Abs(Box<Expr>),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

/// Differentiation variable for [`Expr::wirtinger`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    Z(usize),
    ZBar(usize),
    P(usize),
}

impl Expr {
    pub fn parse(input: &str) -> Result<Expr, ExprError> {
        Parser::new(input).parse()
    }

    /// Evaluate on model-chart coordinates `(p_1..p_2M, x_1, y_1, ...)`.
    pub fn eval(&self, m: usize, x: &[f64]) -> Complex64 {
        match self {
            Expr::Const(c) => *c,
            Expr::P(l) => Complex64::new(x[*l], 0.0),
            Expr::Z(j) => Complex64::new(x[2 * m + 2 * j], x[2 * m + 2 * j + 1]),
            Expr::Conj(e) => e.eval(m, x).conj(),
            Expr::Abs(e) => Complex64::new(e.eval(m, x).norm(), 0.0),
            Expr::Neg(e) => -e.eval(m, x),
            Expr::Add(a, b) => a.eval(m, x) + b.eval(m, x),
            Expr::Sub(a, b) => a.eval(m, x) - b.eval(m, x),
            Expr::Mul(a, b) => a.eval(m, x) * b.eval(m, x),
            Expr::Pow(e, n) => e.eval(m, x).powu(*n),
        }
    }

    /// `true` when exact derivatives exist (no `abs` nodes).
    pub fn is_polynomial(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::P(_) | Expr::Z(_) => true,
            Expr::Abs(_) => false,
            Expr::Conj(e) | Expr::Neg(e) | Expr::Pow(e, _) => e.is_polynomial(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.is_polynomial() && b.is_polynomial()
            }
        }
    }

    /// Exact Wirtinger derivative; `None` when the tree is not polynomial.
    pub fn wirtinger(&self, var: Var) -> Option<Expr> {
        let zero = || Expr::Const(Complex64::new(0.0, 0.0));
        let one = || Expr::Const(Complex64::new(1.0, 0.0));
        Some(match self {
            Expr::Const(_) => zero(),
            Expr::P(l) => match var {
                Var::P(k) if k == *l => one(),
                _ => zero(),
            },
            Expr::Z(j) => match var {
                Var::Z(k) if k == *j => one(),
                _ => zero(),
            },
            Expr::Conj(e) => {
                // ∂(conj g)/∂z = conj(∂g/∂z̄) and symmetrically.
                let inner = match var {
                    Var::Z(j) => e.wirtinger(Var::ZBar(j))?,
                    Var::ZBar(j) => e.wirtinger(Var::Z(j))?,
                    Var::P(l) => e.wirtinger(Var::P(l))?,
                };
                Expr::Conj(Box::new(inner))
            }
            Expr::Abs(_) => return None,
            Expr::Neg(e) => Expr::Neg(Box::new(e.wirtinger(var)?)),
            Expr::Add(a, b) => Expr::Add(Box::new(a.wirtinger(var)?), Box::new(b.wirtinger(var)?)),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.wirtinger(var)?), Box::new(b.wirtinger(var)?)),
            Expr::Mul(a, b) => Expr::Add(
                Box::new(Expr::Mul(Box::new(a.wirtinger(var)?), b.clone())),
                Box::new(Expr::Mul(a.clone(), Box::new(b.wirtinger(var)?))),
            ),
            Expr::Pow(e, n) => {
                if *n == 0 {
                    zero()
                } else {
                    Expr::Mul(
                        Box::new(Expr::Mul(
                            Box::new(Expr::Const(Complex64::new(*n as f64, 0.0))),
                            Box::new(Expr::Pow(e.clone(), n - 1)),
                        )),
                        Box::new(e.wirtinger(var)?),
                    )
                }
            }
        })
    }

    /// Largest `p` index used, if any.
    pub fn max_p(&self) -> Option<usize> {
        self.fold_max(&|e| match e {
            Expr::P(l) => Some(*l),
            _ => None,
        })
    }

    /// Largest `z` index used, if any.
    pub fn max_z(&self) -> Option<usize> {
        self.fold_max(&|e| match e {
            Expr::Z(j) => Some(*j),
            _ => None,
        })
    }

    fn fold_max(&self, pick: &dyn Fn(&Expr) -> Option<usize>) -> Option<usize> {
        let own = pick(self);
        let children: Vec<&Expr> = match self {
            Expr::Const(_) | Expr::P(_) | Expr::Z(_) => vec![],
            Expr::Conj(e) | Expr::Abs(e) | Expr::Neg(e) | Expr::Pow(e, _) => vec![e],
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => vec![a, b],
        };
        children
            .into_iter()
            .filter_map(|c| c.fold_max(pick))
            .chain(own)
            .max()
    }

    /// Check all variable indices against a chart of type `(m, n)`.
    pub fn check_chart(&self, m: usize, n: usize) -> Result<(), ExprError> {
        if let Some(l) = self.max_p() {
            if l >= 2 * m {
                return Err(ExprError::OutOfChart {
                    name: format!("p{}", l + 1),
                    detail: format!("chart has 2M = {} leaf coordinates", 2 * m),
                });
            }
        }
        if let Some(j) = self.max_z() {
            if j >= n {
                return Err(ExprError::OutOfChart {
                    name: format!("z{}", j + 1),
                    detail: format!("chart has N = {n} complex coordinates"),
                });
            }
        }
        Ok(())
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => {
                if c.im == 0.0 {
                    write!(f, "{}", c.re)
                } else {
                    write!(f, "({}{:+}i)", c.re, c.im)
                }
            }
            Expr::P(l) => write!(f, "p{}", l + 1),
            Expr::Z(j) => write!(f, "z{}", j + 1),
            Expr::Conj(e) => write!(f, "conj({e})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
            Expr::Neg(e) => write!(f, "-({e})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Pow(e, n) => write!(f, "({e})^{n}"),
        }
    }
}

struct Parser<'a> {
    input: &'a str,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Parser<'a> {
        Parser {
            input,
            bytes: input.as_bytes(),
            pos: 0,
        }
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ExprError> {
        Err(ExprError::Parse {
            at: self.pos,
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse(mut self) -> Result<Expr, ExprError> {
        let e = self.expr()?;
        self.skip_ws();
        if self.pos != self.bytes.len() {
            return self.error(format!(
                "unexpected trailing input '{}'",
                &self.input[self.pos..]
            ));
        }
        Ok(e)
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
            } else if self.eat(b'-') {
                acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.factor()?;
        while self.eat(b'*') {
            acc = Expr::Mul(Box::new(acc), Box::new(self.factor()?));
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.atom()?;
        if self.eat(b'^') {
            self.skip_ws();
            let start = self.pos;
            while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if start == self.pos {
                return self.error("expected an integer exponent after '^'");
            }
            let n: u32 = self.input[start..self.pos]
                .parse()
                .map_err(|e| ExprError::Parse {
                    at: start,
                    message: format!("bad exponent: {e}"),
                })?;
            return Ok(Expr::Pow(Box::new(base), n));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.peek() {
            None => self.error("unexpected end of expression"),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(b')') {
                    return self.error("expected ')'");
                }
                Ok(e)
            }
            Some(b'-') => {
                self.pos += 1;
                Ok(Expr::Neg(Box::new(self.atom()?)))
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(c) => self.error(format!("unexpected character '{}'", c as char)),
        }
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_digit()
                || self.bytes[self.pos] == b'.'
                || ((self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E')
                    && self.pos + 1 < self.bytes.len()
                    && (self.bytes[self.pos + 1].is_ascii_digit()
                        || self.bytes[self.pos + 1] == b'-'
                        || self.bytes[self.pos + 1] == b'+'))
                || ((self.bytes[self.pos] == b'-' || self.bytes[self.pos] == b'+')
                    && self.pos > start
                    && (self.bytes[self.pos - 1] == b'e' || self.bytes[self.pos - 1] == b'E')))
        {
            self.pos += 1;
        }
        let text = &self.input[start..self.pos];
        let value: f64 = text.parse().map_err(|e| ExprError::Parse {
            at: start,
            message: format!("bad number '{text}': {e}"),
        })?;
        Ok(Expr::Const(Complex64::new(value, 0.0)))
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.bytes.len()
            && (self.bytes[self.pos].is_ascii_alphanumeric() || self.bytes[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.input[start..self.pos];
        match name {
            "i" => Ok(Expr::Const(Complex64::new(0.0, 1.0))),
            "conj" | "abs" | "re" | "im" => {
                if !self.eat(b'(') {
                    return self.error(format!("expected '(' after {name}"));
                }
                let inner = self.expr()?;
                if !self.eat(b')') {
                    return self.error("expected ')'");
                }
                Ok(match name {
                    "conj" => Expr::Conj(Box::new(inner)),
                    "abs" => Expr::Abs(Box::new(inner)),
                    // re/im rewritten through conj keep exact derivatives.
                    "re" => Expr::Mul(
                        Box::new(Expr::Const(Complex64::new(0.5, 0.0))),
                        Box::new(Expr::Add(
                            Box::new(inner.clone()),
                            Box::new(Expr::Conj(Box::new(inner))),
                        )),
                    ),
                    "im" => Expr::Mul(
                        Box::new(Expr::Const(Complex64::new(0.0, -0.5))),
                        Box::new(Expr::Sub(
                            Box::new(inner.clone()),
                            Box::new(Expr::Conj(Box::new(inner))),
                        )),
                    ),
                    _ => unreachable!(),
                })
            }
            _ => {
                if let Some(rest) = name.strip_prefix('p') {
                    if let Ok(idx) = rest.parse::<usize>() {
                        if idx >= 1 {
                            return Ok(Expr::P(idx - 1));
                        }
                    }
                }
                if let Some(rest) = name.strip_prefix('z') {
                    if let Ok(idx) = rest.parse::<usize>() {
                        if idx >= 1 {
                            return Ok(Expr::Z(idx - 1));
                        }
                    }
                }
                Err(ExprError::UnknownVariable(name.to_string()))
            }
        }
    }
}
