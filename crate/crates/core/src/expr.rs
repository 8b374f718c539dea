//! Closed-form scalar expressions with exact symbolic differentiation.
//!
//! Grammar (whitespace ignored):
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' ['-'|'+'] integer)?
//! atom   := number | var | func '(' expr ')' | '(' expr ')'
//! var    := 'x'<i> | 'a'<k> | 'w0' | 'w'<i> | 't' | 'pi'
//! func   := sin | cos | exp | log | sqrt | abs
//! ```

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Variables, 0-based internally; printed 1-based (`x1`, `a1`, `w1`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    X(usize),
    A(usize),
    W0,
    W(usize),
    T,
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::X(i) => write!(f, "x{}", i + 1),
            Var::A(k) => write!(f, "a{}", k + 1),
            Var::W0 => f.write_str("w0"),
            Var::W(i) => write!(f, "w{}", i + 1),
            Var::T => f.write_str("t"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Const(f64),
    Var(Var),
    Add(Expr, Expr),
    Sub(Expr, Expr),
    Mul(Expr, Expr),
    Div(Expr, Expr),
    Neg(Expr),
    Pow(Expr, i32),
    Call(Func, Expr),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Expr(Arc<Node>);

/// Values for every variable kind an expression may reference.
#[derive(Debug, Clone, Copy, Default)]
pub struct EvalContext<'a> {
    pub x: &'a [f64],
    pub a: &'a [f64],
    pub w0: f64,
    pub w: &'a [f64],
    pub t: f64,
}

impl<'a> EvalContext<'a> {
    pub fn state(x: &'a [f64]) -> Self {
        EvalContext {
            x,
            ..Default::default()
        }
    }

    pub fn with_params(x: &'a [f64], a: &'a [f64]) -> Self {
        EvalContext {
            x,
            a,
            ..Default::default()
        }
    }
}

impl Expr {
    pub fn node(&self) -> &Node {
        &self.0
    }

    fn new(n: Node) -> Self {
        Expr(Arc::new(n))
    }

    pub fn constant(c: f64) -> Self {
        Expr::new(Node::Const(c))
    }

    pub fn zero() -> Self {
        Expr::constant(0.0)
    }

    pub fn one() -> Self {
        Expr::constant(1.0)
    }

    pub fn var(v: Var) -> Self {
        Expr::new(Node::Var(v))
    }

    pub fn x(i: usize) -> Self {
        Expr::var(Var::X(i))
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node() {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            src: text.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("unexpected trailing input"));
        }
        Ok(e)
    }

    pub fn add(&self, o: &Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a + b),
            (Some(a), _) if a == 0.0 => o.clone(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Expr::new(Node::Add(self.clone(), o.clone())),
        }
    }

    pub fn sub(&self, o: &Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a - b),
            (Some(a), _) if a == 0.0 => o.neg(),
            (_, Some(b)) if b == 0.0 => self.clone(),
            _ => Expr::new(Node::Sub(self.clone(), o.clone())),
        }
    }

    pub fn mul(&self, o: &Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) => Expr::constant(a * b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 0.0 => Expr::zero(),
            (Some(a), _) if a == 1.0 => o.clone(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            (Some(a), _) if a == -1.0 => o.neg(),
            (_, Some(b)) if b == -1.0 => self.neg(),
            _ => Expr::new(Node::Mul(self.clone(), o.clone())),
        }
    }

    pub fn div(&self, o: &Expr) -> Expr {
        match (self.as_const(), o.as_const()) {
            (Some(a), Some(b)) if b != 0.0 => Expr::constant(a / b),
            (Some(a), _) if a == 0.0 => Expr::zero(),
            (_, Some(b)) if b == 1.0 => self.clone(),
            _ => Expr::new(Node::Div(self.clone(), o.clone())),
        }
    }

    pub fn neg(&self) -> Expr {
        match self.node() {
            Node::Const(c) => Expr::constant(-c),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::new(Node::Neg(self.clone())),
        }
    }

    pub fn powi(&self, n: i32) -> Expr {
        match (self.as_const(), n) {
            (_, 0) => Expr::one(),
            (_, 1) => self.clone(),
            (Some(c), _) => Expr::constant(libm::pow(c, n as f64)),
            _ => Expr::new(Node::Pow(self.clone(), n)),
        }
    }

    pub fn call(f: Func, arg: &Expr) -> Expr {
        if let Some(c) = arg.as_const() {
            let v = apply(f, c);
            if v.is_finite() {
                return Expr::constant(v);
            }
        }
        Expr::new(Node::Call(f, arg.clone()))
    }

    /// Exact partial derivative with respect to `v`.
    pub fn diff(&self, v: Var) -> Expr {
        match self.node() {
            Node::Const(_) => Expr::zero(),
            Node::Var(u) => {
                if *u == v {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Add(a, b) => a.diff(v).add(&b.diff(v)),
            Node::Sub(a, b) => a.diff(v).sub(&b.diff(v)),
            Node::Mul(a, b) => a.diff(v).mul(b).add(&a.mul(&b.diff(v))),
            Node::Div(a, b) => {
                let da = a.diff(v);
                let db = b.diff(v);
                if db.is_zero() {
                    da.div(b)
                } else {
                    da.mul(b).sub(&a.mul(&db)).div(&b.powi(2))
                }
            }
            Node::Neg(a) => a.diff(v).neg(),
            Node::Pow(a, n) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                Expr::constant(*n as f64).mul(&a.powi(n - 1)).mul(&da)
            }
            Node::Call(f, a) => {
                let da = a.diff(v);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Sin => Expr::call(Func::Cos, a),
                    Func::Cos => Expr::call(Func::Sin, a).neg(),
                    Func::Exp => self.clone(),
                    Func::Log => Expr::one().div(a),
                    Func::Sqrt => Expr::constant(0.5).div(self),
                    Func::Abs => Expr::call(Func::Sign, a),
                    Func::Sign => Expr::zero(),
                };
                outer.mul(&da)
            }
        }
    }

    pub fn eval(&self, ctx: &EvalContext<'_>) -> Result<f64> {
        let v = self.eval_raw(ctx)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::EvalDomain(format!("non-finite value of {self}")))
        }
    }

    fn eval_raw(&self, ctx: &EvalContext<'_>) -> Result<f64> {
        Ok(match self.node() {
            Node::Const(c) => *c,
            Node::Var(v) => lookup(*v, ctx)?,
            Node::Add(a, b) => a.eval_raw(ctx)? + b.eval_raw(ctx)?,
            Node::Sub(a, b) => a.eval_raw(ctx)? - b.eval_raw(ctx)?,
            Node::Mul(a, b) => {
                let l = a.eval_raw(ctx)?;
                if l == 0.0 {
                    // Still evaluate for domain errors on the right.
                    let r = b.eval_raw(ctx)?;
                    l * r
                } else {
                    l * b.eval_raw(ctx)?
                }
            }
            Node::Div(a, b) => {
                let d = b.eval_raw(ctx)?;
                if d == 0.0 {
                    return Err(Error::EvalDomain(format!("division by zero in {self}")));
                }
                a.eval_raw(ctx)? / d
            }
            Node::Neg(a) => -a.eval_raw(ctx)?,
            Node::Pow(a, n) => {
                let base = a.eval_raw(ctx)?;
                if base == 0.0 && *n < 0 {
                    return Err(Error::EvalDomain(format!("zero to a negative power in {self}")));
                }
                powi(base, *n)
            }
            Node::Call(f, a) => {
                let arg = a.eval_raw(ctx)?;
                match f {
                    Func::Log if arg <= 0.0 => {
                        return Err(Error::EvalDomain(format!("log of non-positive value in {self}")))
                    }
                    Func::Sqrt if arg < 0.0 => {
                        return Err(Error::EvalDomain(format!("sqrt of negative value in {self}")))
                    }
                    _ => apply(*f, arg),
                }
            }
        })
    }

    /// Every variable referenced, sorted and deduplicated.
    pub fn variables(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self.node() {
            Node::Const(_) => {}
            Node::Var(v) => out.push(*v),
            Node::Add(a, b) | Node::Sub(a, b) | Node::Mul(a, b) | Node::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
            Node::Neg(a) | Node::Pow(a, _) | Node::Call(_, a) => a.collect_vars(out),
        }
    }

    pub fn depends_on(&self, pred: impl Fn(Var) -> bool) -> bool {
        self.variables().into_iter().any(pred)
    }

    fn precedence(&self) -> u8 {
        match self.node() {
            Node::Add(..) | Node::Sub(..) => 1,
            Node::Mul(..) | Node::Div(..) => 2,
            Node::Neg(_) => 3,
            Node::Pow(..) => 4,
            Node::Const(c) if *c < 0.0 => 3,
            _ => 5,
        }
    }
}

fn powi(base: f64, n: i32) -> f64 {
    let mut r = 1.0;
    for _ in 0..n.unsigned_abs() {
        r *= base;
    }
    if n < 0 {
        1.0 / r
    } else {
        r
    }
}

fn apply(f: Func, v: f64) -> f64 {
    match f {
        Func::Sin => libm::sin(v),
        Func::Cos => libm::cos(v),
        Func::Exp => libm::exp(v),
        Func::Log => libm::log(v),
        Func::Sqrt => libm::sqrt(v),
        Func::Abs => libm::fabs(v),
        Func::Sign => {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                0.0
            }
        }
    }
}

fn lookup(v: Var, ctx: &EvalContext<'_>) -> Result<f64> {
    let missing = || Error::EvalDomain(format!("variable {v} has no value here"));
    match v {
        Var::X(i) => ctx.x.get(i).copied().ok_or_else(missing),
        Var::A(k) => ctx.a.get(k).copied().ok_or_else(missing),
        Var::W(i) => ctx.w.get(i).copied().ok_or_else(missing),
        Var::W0 => Ok(ctx.w0),
        Var::T => Ok(ctx.t),
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrap = |f: &mut fmt::Formatter<'_>, e: &Expr, min: u8| -> fmt::Result {
            if e.precedence() < min {
                write!(f, "({e})")
            } else {
                write!(f, "{e}")
            }
        };
        match self.node() {
            Node::Const(c) => write!(f, "{c}"),
            Node::Var(v) => write!(f, "{v}"),
            Node::Add(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" + ")?;
                wrap(f, b, 2)
            }
            Node::Sub(a, b) => {
                wrap(f, a, 1)?;
                f.write_str(" - ")?;
                wrap(f, b, 2)
            }
            Node::Mul(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("*")?;
                wrap(f, b, 3)
            }
            Node::Div(a, b) => {
                wrap(f, a, 2)?;
                f.write_str("/")?;
                wrap(f, b, 4)
            }
            Node::Neg(a) => {
                f.write_str("-")?;
                wrap(f, a, 4)
            }
            Node::Pow(a, n) => {
                wrap(f, a, 5)?;
                write!(f, "^{n}")
            }
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

impl core::str::FromStr for Expr {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Expr::parse(s)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn err(&self, reason: &str) -> Error {
        Error::ExprParse {
            offset: self.pos,
            reason: reason.to_string(),
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
                    lhs = Expr::new(Node::Add(lhs, self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Expr::new(Node::Sub(lhs, self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Expr::new(Node::Mul(lhs, self.unary()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Expr::new(Node::Div(lhs, self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(self.unary()?.neg())
            }
            Some(b'+') => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.peek() != Some(b'^') {
            return Ok(base);
        }
        self.pos += 1;
        let mut sign = 1i64;
        match self.peek() {
            Some(b'-') => {
                sign = -1;
                self.pos += 1;
            }
            Some(b'+') => self.pos += 1,
            _ => {}
        }
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("exponent must be an integer"));
        }
        let digits = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        let n: i64 = digits.parse().map_err(|_| self.err("exponent out of range"))?;
        let n = i32::try_from(sign * n).map_err(|_| self.err("exponent out of range"))?;
        Ok(Expr::new(Node::Pow(base, n)))
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected ')'"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.err("unexpected character")),
            None => Err(self.err("unexpected end of expression")),
        }
    }

    fn number(&mut self) -> Result<Expr> {
        let start = self.pos;
        let bytes = self.src;
        let mut i = self.pos;
        while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
            i += 1;
        }
        if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
            let mut j = i + 1;
            if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                j += 1;
            }
            if j < bytes.len() && bytes[j].is_ascii_digit() {
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = core::str::from_utf8(&bytes[start..i]).unwrap_or("");
        let v: f64 = text.parse().map_err(|_| self.err("malformed number"))?;
        self.pos = i;
        Ok(Expr::constant(v))
    }

    fn ident(&mut self) -> Result<Expr> {
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = core::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        let func = match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "log" => Some(Func::Log),
            "sqrt" => Some(Func::Sqrt),
            "abs" => Some(Func::Abs),
            _ => None,
        };
        if let Some(f) = func {
            if self.peek() != Some(b'(') {
                return Err(self.err("expected '(' after function name"));
            }
            self.pos += 1;
            let arg = self.expr()?;
            if self.peek() != Some(b')') {
                return Err(self.err("expected ')'"));
            }
            self.pos += 1;
            return Ok(Expr::new(Node::Call(f, arg)));
        }
        let indexed = |prefix: char| -> Option<usize> {
            let rest = name.strip_prefix(prefix)?;
            let k: usize = rest.parse().ok()?;
            (k >= 1 && !rest.starts_with('0')).then(|| k - 1)
        };
        let var = match name {
            "t" => Var::T,
            "w0" => Var::W0,
            "pi" => return Ok(Expr::constant(core::f64::consts::PI)),
            _ => {
                if let Some(i) = indexed('x') {
                    Var::X(i)
                } else if let Some(k) = indexed('a') {
                    Var::A(k)
                } else if let Some(i) = indexed('w') {
                    Var::W(i)
                } else {
                    return Err(Error::ExprParse {
                        offset: start,
                        reason: format!("unknown identifier '{name}'"),
                    });
                }
            }
        };
        Ok(Expr::var(var))
    }
}

/// Renders a list of expressions as `(e1, e2, ...)`.
pub fn tuple_string(es: &[Expr]) -> String {
    let parts: Vec<String> = es.iter().map(|e| e.to_string()).collect();
    format!("({})", parts.join(", "))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s).unwrap().eval(&EvalContext::state(x)).unwrap()
    }

    #[test]
    fn parses_and_evaluates() {
        assert_eq!(ev("1 + 2*3", &[]), 7.0);
        assert_eq!(ev("-x1^2", &[3.0]), -9.0);
        assert_eq!(ev("2^-1", &[]), 0.5);
        assert_eq!(ev("(x1 - x2)/2", &[5.0, 1.0]), 2.0);
        assert_eq!(ev("sin(x1) + exp(x2)", &[0.0, 0.0]), 1.0);
        assert_eq!(ev("1e-3 * 2", &[]), 0.002);
        assert_eq!(ev("abs(-2) + sqrt(4)", &[]), 4.0);
        let ctx = EvalContext {
            x: &[1.0],
            a: &[2.0],
            w0: 0.5,
            w: &[0.25],
            t: 3.0,
        };
        assert_eq!(Expr::parse("x1 + a1 + w0 + w1 + t").unwrap().eval(&ctx).unwrap(), 6.75);
    }

    #[test]
    fn parse_errors_carry_offsets() {
        match Expr::parse("x1 + * 2") {
            Err(Error::ExprParse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        assert!(Expr::parse("y1").is_err());
        assert!(Expr::parse("x0").is_err());
        assert!(Expr::parse("sin x1").is_err());
        assert!(Expr::parse("x1^1.5").is_err());
        assert!(Expr::parse("(x1").is_err());
    }

    #[test]
    fn domain_errors() {
        let c = EvalContext::state(&[0.0]);
        assert!(matches!(Expr::parse("1/x1").unwrap().eval(&c), Err(Error::EvalDomain(_))));
        assert!(matches!(Expr::parse("log(x1)").unwrap().eval(&c), Err(Error::EvalDomain(_))));
        assert!(matches!(Expr::parse("x2").unwrap().eval(&c), Err(Error::EvalDomain(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let srcs = [
            "x1^3*x2 - 2*x2^2 + 7",
            "sin(x1*x2) + cos(x2)",
            "exp(x1)/(1 + x2^2)",
            "log(2 + x1^2) * x2",
            "sqrt(1 + x1^2 + x2^2)",
            "x1^-2 + x2",
        ];
        let x = [0.7, -1.3];
        for s in srcs {
            let e = Expr::parse(s).unwrap();
            for i in 0..2 {
                let d = e.diff(Var::X(i)).eval(&EvalContext::state(&x)).unwrap();
                let h = 1e-6;
                let mut xp = x;
                xp[i] += h;
                let mut xm = x;
                xm[i] -= h;
                let fd = (ev(s, &xp) - ev(s, &xm)) / (2.0 * h);
                assert!((d - fd).abs() < 1e-6 * (1.0 + fd.abs()), "{s} d/dx{}: {d} vs {fd}", i + 1);
            }
        }
    }

    #[test]
    fn constant_folding() {
        let e = Expr::parse("3*x1 + 5").unwrap();
        assert_eq!(e.diff(Var::X(0)).as_const(), Some(3.0));
        assert!(e.diff(Var::X(1)).is_zero());
        assert!(Expr::parse("sin(w1)").unwrap().diff(Var::X(0)).is_zero());
    }

    #[test]
    fn display_round_trip() {
        for s in ["x1 - (x2 - x3)", "x1/(x2*x3)", "-(x1 + 1)^2", "2*sin(x1)^3", "x1^-2"] {
            let e = Expr::parse(s).unwrap();
            let back = Expr::parse(&e.to_string()).unwrap();
            let x = [0.3, 1.7, -0.4];
            assert_eq!(
                e.eval(&EvalContext::state(&x)).unwrap(),
                back.eval(&EvalContext::state(&x)).unwrap(),
                "{s} -> {e}"
            );
        }
    }

    #[test]
    fn variables_are_collected() {
        let e = Expr::parse("x2*a1 + w1 + x2").unwrap();
        assert_eq!(e.variables(), vec![Var::X(1), Var::A(0), Var::W(0)]);
    }
}
