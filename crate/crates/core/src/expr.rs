//! Small arithmetic expressions for config files.
//!
//! ```text
//! expr    := ['+'|'-'] term (('+'|'-') term)*
//! term    := factor (('*'|'/') factor)*
//! factor  := primary ['^' ['+'|'-'] number]
//! primary := number | t | u | v | func '(' expr ')' | '(' expr ')'
//! func    := exp | cos | sin | abs
//! ```
//!
//! Envelopes may only mention `t`; coefficient fields may also use `u`, `v`.

use std::fmt;
use std::sync::Arc;

use crate::envelope::EnvelopeFn;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    T,
    U,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Cos,
    Sin,
    Abs,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Call(Func, Box<Node>),
    Pow(Box<Node>, f64),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
}

impl Node {
    fn eval(&self, t: f64, u: f64, v: f64) -> f64 {
        match self {
            Node::Num(x) => *x,
            Node::Var(Var::T) => t,
            Node::Var(Var::U) => u,
            Node::Var(Var::V) => v,
            Node::Call(f, a) => {
                let x = a.eval(t, u, v);
                match f {
                    Func::Exp => x.exp(),
                    Func::Cos => x.cos(),
                    Func::Sin => x.sin(),
                    Func::Abs => x.abs(),
                }
            }
            Node::Pow(b, e) => {
                let x = b.eval(t, u, v);
                if e.fract() == 0.0 && e.abs() < 1024.0 {
                    x.powi(*e as i32)
                } else {
                    x.powf(*e)
                }
            }
            Node::Neg(a) => -a.eval(t, u, v),
            Node::Add(a, b) => a.eval(t, u, v) + b.eval(t, u, v),
            Node::Sub(a, b) => a.eval(t, u, v) - b.eval(t, u, v),
            Node::Mul(a, b) => a.eval(t, u, v) * b.eval(t, u, v),
            Node::Div(a, b) => a.eval(t, u, v) / b.eval(t, u, v),
        }
    }

    fn uses(&self, var: Var) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Var(x) => *x == var,
            Node::Call(_, a) | Node::Pow(a, _) | Node::Neg(a) => a.uses(var),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => a.uses(var) || b.uses(var),
        }
    }
}

/// A parsed expression together with its source text.
#[derive(Clone)]
pub struct Expr {
    src: String,
    root: Arc<Node>,
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({})", self.src)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.root == other.root
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Self> {
        let mut p = Parser { s: src.as_bytes(), pos: 0 };
        let root = p.expr()?;
        p.skip_ws();
        if p.pos != p.s.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(Self { src: src.trim().to_string(), root: Arc::new(root) })
    }

    /// Parses an expression that may only depend on `t`.
    pub fn parse_time_only(src: &str) -> Result<Self> {
        let e = Self::parse(src)?;
        if e.uses(Var::U) || e.uses(Var::V) {
            return Err(Error::Config(format!("`{src}`: envelope may only depend on t")));
        }
        Ok(e)
    }

    pub fn eval(&self, t: f64, u: f64, v: f64) -> f64 {
        self.root.eval(t, u, v)
    }

    pub fn uses(&self, var: Var) -> bool {
        self.root.uses(var)
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    pub fn to_envelope(&self) -> EnvelopeFn {
        let root = Arc::clone(&self.root);
        EnvelopeFn::new(self.src.clone(), move |t| root.eval(t, 0.0, 0.0))
    }

    pub fn to_field(&self) -> impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static {
        let root = Arc::clone(&self.root);
        move |t, u, v| root.eval(t, u, v)
    }
}

struct Parser<'a> {
    s: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, msg: &str) -> Error {
        Error::Config(format!("`{}`: {msg} at column {}", String::from_utf8_lossy(self.s).trim(), self.pos + 1))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.s.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let mut node = if self.eat(b'-') {
            Node::Neg(Box::new(self.term()?))
        } else {
            self.eat(b'+');
            self.term()?
        };
        loop {
            if self.eat(b'+') {
                node = Node::Add(Box::new(node), Box::new(self.term()?));
            } else if self.eat(b'-') {
                node = Node::Sub(Box::new(node), Box::new(self.term()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut node = self.factor()?;
        loop {
            if self.eat(b'*') {
                node = Node::Mul(Box::new(node), Box::new(self.factor()?));
            } else if self.eat(b'/') {
                node = Node::Div(Box::new(node), Box::new(self.factor()?));
            } else {
                return Ok(node);
            }
        }
    }

    fn factor(&mut self) -> Result<Node> {
        let base = self.primary()?;
        if !self.eat(b'^') {
            return Ok(base);
        }
        let neg = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        let e = self.number().ok_or_else(|| self.err("expected a numeric exponent"))?;
        Ok(Node::Pow(Box::new(base), if neg { -e } else { e }))
    }

    fn number(&mut self) -> Option<f64> {
        self.skip_ws();
        let start = self.pos;
        let s = self.s;
        let digits = |p: &mut usize| {
            let b = *p;
            while *p < s.len() && s[*p].is_ascii_digit() {
                *p += 1;
            }
            *p > b
        };
        let mut p = self.pos;
        let mut any = digits(&mut p);
        if p < s.len() && s[p] == b'.' {
            p += 1;
            any |= digits(&mut p);
        }
        if !any {
            return None;
        }
        if p < s.len() && (s[p] == b'e' || s[p] == b'E') {
            let mut q = p + 1;
            if q < s.len() && (s[q] == b'+' || s[q] == b'-') {
                q += 1;
            }
            if digits(&mut q) {
                p = q;
            }
        }
        self.pos = p;
        std::str::from_utf8(&s[start..p]).ok()?.parse().ok()
    }

    fn ident(&mut self) -> Option<&str> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.s.len() && self.s[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        (self.pos > start).then(|| std::str::from_utf8(&self.s[start..self.pos]).unwrap())
    }

    fn primary(&mut self) -> Result<Node> {
        if self.eat(b'(') {
            let e = self.expr()?;
            if !self.eat(b')') {
                return Err(self.err("expected `)`"));
            }
            return Ok(e);
        }
        if let Some(x) = self.number() {
            return Ok(Node::Num(x));
        }
        self.skip_ws();
        let at = self.pos;
        let Some(id) = self.ident().map(str::to_owned) else {
            return Err(self.err("expected a number, variable or function"));
        };
        let func = match id.as_str() {
            "t" => return Ok(Node::Var(Var::T)),
            "u" => return Ok(Node::Var(Var::U)),
            "v" => return Ok(Node::Var(Var::V)),
            "exp" => Func::Exp,
            "cos" => Func::Cos,
            "sin" => Func::Sin,
            "abs" => Func::Abs,
            _ => {
                self.pos = at;
                return Err(self.err(&format!("unknown name `{id}`")));
            }
        };
        if !self.eat(b'(') {
            return Err(self.err("expected `(`"));
        }
        let arg = self.expr()?;
        if !self.eat(b')') {
            return Err(self.err("expected `)`"));
        }
        Ok(Node::Call(func, Box::new(arg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, t: f64) -> f64 {
        Expr::parse(s).unwrap().eval(t, 0.0, 0.0)
    }

    #[test]
    fn vocabulary() {
        assert_eq!(ev("0.1", 5.0), 0.1);
        assert_eq!(ev("t^-3", 2.0), 0.125);
        assert_eq!(ev("exp(2*t)", 0.5), 1f64.exp());
        assert_eq!(ev("1 + 0.5*cos(2*t)", 0.0), 1.5);
        assert_eq!(ev("-1 + 2*sin(3 * t)", 0.0), -1.0);
        assert_eq!(ev("2.5e-1 * t^1.5", 4.0), 2.0);
    }

    #[test]
    fn precedence_and_grouping() {
        assert_eq!(ev("1 - 2 - 3", 0.0), -4.0);
        assert_eq!(ev("2*t^2", 3.0), 18.0);
        assert_eq!(ev("-t^2", 3.0), -9.0);
        assert_eq!(ev("(1 + t)^2 / 4", 1.0), 1.0);
        assert_eq!(ev("abs(-2)", 0.0), 2.0);
    }

    #[test]
    fn state_variables() {
        let e = Expr::parse("-1 - u^2 + 0*v").unwrap();
        assert_eq!(e.eval(0.0, 3.0, 1.0), -10.0);
        assert!(e.uses(Var::U) && e.uses(Var::V) && !e.uses(Var::T));
        assert!(Expr::parse_time_only("u + t").is_err());
    }

    #[test]
    fn errors_point_at_column() {
        let err = Expr::parse("1 + foo(t)").unwrap_err().to_string();
        assert!(err.contains("unknown name `foo`") && err.contains("column 5"), "{err}");
        assert!(Expr::parse("cos t").is_err());
        assert!(Expr::parse("t^u").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
        assert!(Expr::parse("(t").is_err());
    }

    #[test]
    fn envelope_keeps_source() {
        let e = Expr::parse_time_only("  t^-0  ").unwrap().to_envelope();
        assert_eq!(e.text(), "t^-0");
        assert_eq!(e.eval(7.0), 1.0);
    }
}
