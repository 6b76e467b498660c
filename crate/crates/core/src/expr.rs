//! Scalar fields on a chart, written in a tiny expression language.
//!
//! The grammar covers constants, coordinates `x0 … x{m-1}`, `+`, `*` and
//! `sin(..)`. Subtraction, unary minus and parentheses are accepted as
//! sugar. Symbolic differentiation introduces `cos`, which is therefore also
//! accepted by the parser so that printed derivatives parse back.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    Coord(usize),
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn coord(i: usize) -> Self {
        Expr::Coord(i)
    }

    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { src: src.as_bytes(), pos: 0 };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Coord(i) => x[*i],
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Sin(a) => a.eval(x).sin(),
            Expr::Cos(a) => a.eval(x).cos(),
        }
    }

    /// Largest coordinate index referenced, if any.
    pub fn max_coord(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Coord(i) => Some(*i),
            Expr::Add(a, b) | Expr::Mul(a, b) => match (a.max_coord(), b.max_coord()) {
                (Some(i), Some(j)) => Some(i.max(j)),
                (i, j) => i.or(j),
            },
            Expr::Sin(a) | Expr::Cos(a) => a.max_coord(),
        }
    }

    pub fn is_constant(&self) -> bool {
        self.max_coord().is_none()
    }

    /// Partial derivative with respect to coordinate `k`.
    pub fn derivative(&self, k: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Coord(i) => Expr::Const(if *i == k { 1.0 } else { 0.0 }),
            Expr::Add(a, b) => add(a.derivative(k), b.derivative(k)),
            Expr::Mul(a, b) => add(
                mul(a.derivative(k), (**b).clone()),
                mul((**a).clone(), b.derivative(k)),
            ),
            Expr::Sin(a) => mul(Expr::Cos(a.clone()), a.derivative(k)),
            Expr::Cos(a) => mul(
                Expr::Const(-1.0),
                mul(Expr::Sin(a.clone()), a.derivative(k)),
            ),
        }
    }

    pub fn gradient(&self, dim: usize) -> Vec<Expr> {
        (0..dim).map(|k| self.derivative(k)).collect()
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (Expr::Const(z), e) | (e, Expr::Const(z)) if z == 0.0 => e,
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (Expr::Const(z), _) | (_, Expr::Const(z)) if z == 0.0 => Expr::Const(0.0),
        (Expr::Const(o), e) | (e, Expr::Const(o)) if o == 1.0 => e,
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

impl std::ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::Add(Box::new(self), Box::new(rhs))
    }
}

impl std::ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Mul(Box::new(self), Box::new(rhs))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 => write!(f, "({c:?})"),
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Coord(i) => write!(f, "x{i}"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Mul(a, b) => write!(f, "{a}*{b}"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, message: &str) -> Error {
        Error::Expression {
            position: self.pos,
            message: message.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = lhs + self.term()?;
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = lhs + Expr::Const(-1.0) * self.term()?;
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.factor()?;
        while self.peek() == Some(b'*') {
            self.pos += 1;
            lhs = lhs * self.factor()?;
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Expr> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'-') => {
                self.pos += 1;
                let inner = self.factor()?;
                Ok(match inner {
                    Expr::Const(c) => Expr::Const(-c),
                    e => Expr::Const(-1.0) * e,
                })
            }
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(b'x') => {
                self.pos += 1;
                let start = self.pos;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
                if start == self.pos {
                    return Err(self.error("expected coordinate index after 'x'"));
                }
                let idx = std::str::from_utf8(&self.src[start..self.pos])
                    .ok()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| self.error("bad coordinate index"))?;
                Ok(Expr::Coord(idx))
            }
            Some(_) => {
                for (name, ctor) in [("sin", Expr::Sin as fn(Box<Expr>) -> Expr), ("cos", Expr::Cos)] {
                    if self.src[self.pos..].starts_with(name.as_bytes()) {
                        self.pos += name.len();
                        if self.peek() != Some(b'(') {
                            return Err(self.error("expected '(' after function name"));
                        }
                        self.pos += 1;
                        let arg = self.expr()?;
                        if self.peek() != Some(b')') {
                            return Err(self.error("expected ')'"));
                        }
                        self.pos += 1;
                        return Ok(ctor(Box::new(arg)));
                    }
                }
                Err(self.error("unexpected character"))
            }
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            let exp_sign = (c == b'-' || c == b'+')
                && self.pos > start
                && matches!(self.src[self.pos - 1], b'e' | b'E');
            if c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E' || exp_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        std::str::from_utf8(&self.src[start..self.pos])
            .ok()
            .and_then(|s| s.parse::<f64>().ok())
            .map(Expr::Const)
            .ok_or_else(|| Error::Expression {
                position: start,
                message: "malformed number".into(),
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_catalog_forms() {
        let e = Expr::parse("0.2*sin(x1)").unwrap();
        assert!((e.eval(&[0.0, 0.5, 0.0]) - 0.2 * 0.5f64.sin()).abs() < 1e-15);
        let lin = Expr::parse("0.1*x1 + 0.05*x2 - 0.3").unwrap();
        assert!((lin.eval(&[9.0, 1.0, 2.0]) - (0.1 + 0.1 - 0.3)).abs() < 1e-15);
        assert_eq!(Expr::parse("-2.5").unwrap(), Expr::Const(-2.5));
        assert_eq!(Expr::parse("1e-3").unwrap(), Expr::Const(1e-3));
    }

    #[test]
    fn rejects_garbage_with_position() {
        match Expr::parse("0.2*tan(x1)") {
            Err(Error::Expression { position, .. }) => assert_eq!(position, 4),
            other => panic!("unexpected {other:?}"),
        }
        assert!(Expr::parse("sin(x1").is_err());
        assert!(Expr::parse("x").is_err());
        assert!(Expr::parse("1 2").is_err());
    }

    #[test]
    fn derivative_matches_central_difference() {
        let e = Expr::parse("0.2*sin(x1*x2) + 0.3*x0*x0 + cos(x2)").unwrap();
        let x = [0.3, -0.7, 1.1];
        for k in 0..3 {
            let d = e.derivative(k).eval(&x);
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (e.eval(&xp) - e.eval(&xm)) / (2.0 * h);
            assert!((d - fd).abs() < 1e-8, "k={k}: {d} vs {fd}");
        }
    }

    #[test]
    fn display_round_trips() {
        let e = Expr::parse("0.2*sin(x1) - 3*x0").unwrap().derivative(1);
        let back = Expr::parse(&e.to_string()).unwrap();
        let x = [0.1, 0.2, 0.3];
        assert_eq!(e.eval(&x), back.eval(&x));
    }
}
