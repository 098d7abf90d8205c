//! Tiny arithmetic language for user-supplied potentials and Hamiltonians.
//!
//! Grammar:
//!
//! ```text
//! expr   := term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := unary ('^' factor)?
//! unary  := '-'? atom
//! atom   := number | 'pi' | 'x' | 'u' | 'p' | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! Note that `-x^2` parses as `(-x)^2`, because the sign binds to the atom.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    U,
    P,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Tan,
    Exp,
    Log,
    Sqrt,
    Abs,
    /// Only produced by differentiating `abs`; not part of the surface syntax.
    Sign,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tan" => Func::Tan,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tan => "tan",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("empty expression")]
    Empty,
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("`{name}` takes exactly one argument, got {got} (offset {offset})")]
    Arity {
        name: String,
        got: usize,
        offset: usize,
    },
    #[error("variable `{name}` is not allowed here (offset {offset})")]
    DisallowedVariable { name: String, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

/// Variable bindings for evaluation.
#[derive(Debug, Clone, Copy, Default)]
pub struct Env {
    pub x: f64,
    pub u: f64,
    pub p: f64,
}

impl Env {
    pub fn new(x: f64, u: f64, p: f64) -> Self {
        Env { x, u, p }
    }
}

pub fn parse_expression(source: &str) -> Result<Expr, ParseError> {
    if source.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let mut parser = Parser {
        src: source.as_bytes(),
        pos: 0,
    };
    let e = parser.expr()?;
    parser.skip_ws();
    if parser.pos != parser.src.len() {
        return Err(parser.syntax("unexpected trailing input"));
    }
    Ok(e)
}

/// Parse and reject any variable outside `allowed`.
pub fn parse_in(source: &str, allowed: &[Var]) -> Result<Expr, ParseError> {
    let e = parse_expression(source)?;
    // Locate the offending token for a useful message.
    for v in [Var::X, Var::U, Var::P] {
        if !allowed.contains(&v) && e.uses(v) {
            let name = var_name(v);
            let offset = find_ident(source, name).unwrap_or(0);
            return Err(ParseError::DisallowedVariable {
                name: name.to_string(),
                offset,
            });
        }
    }
    Ok(e)
}

fn find_ident(source: &str, name: &str) -> Option<usize> {
    let b = source.as_bytes();
    let mut i = 0;
    while i < b.len() {
        if b[i].is_ascii_alphabetic() {
            let start = i;
            while i < b.len() && (b[i].is_ascii_alphanumeric() || b[i] == b'_') {
                i += 1;
            }
            if &source[start..i] == name {
                return Some(start);
            }
        } else {
            i += 1;
        }
    }
    None
}

fn var_name(v: Var) -> &'static str {
    match v {
        Var::X => "x",
        Var::U => "u",
        Var::P => "p",
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn syntax(&self, msg: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.pos,
            message: msg.to_string(),
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

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(b'+') => BinOp::Add,
                Some(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.factor()?;
        loop {
            let op = match self.peek() {
                Some(b'*') => BinOp::Mul,
                Some(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = Expr::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let base = self.unary()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let exp = self.factor()?;
            return Ok(Expr::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(b'-') {
            self.pos += 1;
            let a = self.atom()?;
            return Ok(Expr::Neg(Box::new(a)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            None => Err(self.syntax("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.syntax("expected `)`"));
                }
                self.pos += 1;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            Some(_) => Err(self.syntax("unexpected character")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && s[i].is_ascii_digit() {
            i += 1;
        }
        if i < s.len() && s[i] == b'.' {
            i += 1;
            while i < s.len() && s[i].is_ascii_digit() {
                i += 1;
            }
        }
        if i < s.len() && (s[i] == b'e' || s[i] == b'E') {
            let mut j = i + 1;
            if j < s.len() && (s[j] == b'+' || s[j] == b'-') {
                j += 1;
            }
            if j < s.len() && s[j].is_ascii_digit() {
                while j < s.len() && s[j].is_ascii_digit() {
                    j += 1;
                }
                i = j;
            }
        }
        let text = std::str::from_utf8(&s[start..i]).expect("ascii");
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => {
                self.pos = i;
                Ok(Expr::Num(v))
            }
            _ => Err(self.syntax("malformed number")),
        }
    }

    fn ident(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos;
        let s = self.src;
        let mut i = self.pos;
        while i < s.len() && (s[i].is_ascii_alphanumeric() || s[i] == b'_') {
            i += 1;
        }
        let name = std::str::from_utf8(&s[start..i]).expect("ascii").to_string();
        self.pos = i;
        match name.as_str() {
            "pi" => return Ok(Expr::Pi),
            "x" => return Ok(Expr::Var(Var::X)),
            "u" => return Ok(Expr::Var(Var::U)),
            "p" => return Ok(Expr::Var(Var::P)),
            _ => {}
        }
        let Some(func) = Func::from_name(&name) else {
            return Err(ParseError::UnknownIdentifier {
                name,
                offset: start,
            });
        };
        if self.peek() != Some(b'(') {
            return Err(ParseError::Arity {
                name,
                got: 0,
                offset: start,
            });
        }
        self.pos += 1;
        if self.peek() == Some(b')') {
            return Err(ParseError::Arity {
                name,
                got: 0,
                offset: start,
            });
        }
        let arg = self.expr()?;
        let mut extra = 0;
        while self.peek() == Some(b',') {
            self.pos += 1;
            self.expr()?;
            extra += 1;
        }
        if extra > 0 {
            return Err(ParseError::Arity {
                name,
                got: 1 + extra,
                offset: start,
            });
        }
        if self.peek() != Some(b')') {
            return Err(self.syntax("expected `)`"));
        }
        self.pos += 1;
        Ok(Expr::Call(func, Box::new(arg)))
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn uses(&self, v: Var) -> bool {
        match self {
            Expr::Num(_) | Expr::Pi => false,
            Expr::Var(w) => *w == v,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses(v),
            Expr::Bin(_, a, b) => a.uses(v) || b.uses(v),
        }
    }

    pub fn is_constant(&self) -> bool {
        !self.uses(Var::X) && !self.uses(Var::U) && !self.uses(Var::P)
    }

    pub fn eval(&self, env: &Env) -> Result<f64, DomainError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Pi => std::f64::consts::PI,
            Expr::Var(Var::X) => env.x,
            Expr::Var(Var::U) => env.u,
            Expr::Var(Var::P) => env.p,
            Expr::Neg(a) => -a.eval(env)?,
            Expr::Bin(op, a, b) => {
                let a = a.eval(env)?;
                let b = b.eval(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(DomainError(format!("division by zero ({a}/0)")));
                        }
                        a / b
                    }
                    BinOp::Pow => pow(a, b)?,
                }
            }
            Expr::Call(f, a) => {
                let a = a.eval(env)?;
                match f {
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Tan => a.tan(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(DomainError(format!("log of non-positive value {a}")));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < 0.0 {
                            return Err(DomainError(format!("sqrt of negative value {a}")));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Sign => {
                        if a > 0.0 {
                            1.0
                        } else if a < 0.0 {
                            -1.0
                        } else {
                            0.0
                        }
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(DomainError(format!("non-finite value in `{self}`")))
        }
    }

    /// Symbolic derivative. Only trivial zero/one folding is applied.
    pub fn diff(&self, v: Var) -> Expr {
        use Expr::*;
        match self {
            Num(_) | Pi => Num(0.0),
            Var(w) => Num(if *w == v { 1.0 } else { 0.0 }),
            Neg(a) => neg(a.diff(v)),
            Bin(BinOp::Add, a, b) => add(a.diff(v), b.diff(v)),
            Bin(BinOp::Sub, a, b) => sub(a.diff(v), b.diff(v)),
            Bin(BinOp::Mul, a, b) => add(
                mul(a.diff(v), (**b).clone()),
                mul((**a).clone(), b.diff(v)),
            ),
            Bin(BinOp::Div, a, b) => {
                // (a'b - ab') / b^2
                let num = sub(
                    mul(a.diff(v), (**b).clone()),
                    mul((**a).clone(), b.diff(v)),
                );
                div(num, powc((**b).clone(), 2.0))
            }
            Bin(BinOp::Pow, a, b) => {
                if !b.uses(v) {
                    // b a^(b-1) a'
                    let da = a.diff(v);
                    if is_zero(&da) {
                        return Num(0.0);
                    }
                    let reduced = match **b {
                        Num(k) => powc((**a).clone(), k - 1.0),
                        _ => pow_e((**a).clone(), sub((**b).clone(), Num(1.0))),
                    };
                    mul(mul((**b).clone(), reduced), da)
                } else {
                    // a^b (b' ln a + b a'/a)
                    let term = add(
                        mul(b.diff(v), call(Func::Log, (**a).clone())),
                        div(mul((**b).clone(), a.diff(v)), (**a).clone()),
                    );
                    mul(self.clone(), term)
                }
            }
            Call(f, a) => {
                let da = a.diff(v);
                if is_zero(&da) {
                    return Num(0.0);
                }
                let inner = (**a).clone();
                let outer = match f {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Tan => div(Num(1.0), powc(call(Func::Cos, inner), 2.0)),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(Num(1.0), inner),
                    Func::Sqrt => div(Num(0.5), call(Func::Sqrt, inner)),
                    Func::Abs => call(Func::Sign, inner),
                    Func::Sign => Num(0.0),
                };
                mul(outer, da)
            }
        }
    }
}

fn pow(a: f64, b: f64) -> Result<f64, DomainError> {
    if b == b.trunc() && b.abs() < 64.0 {
        if a == 0.0 && b < 0.0 {
            return Err(DomainError("zero raised to a negative power".into()));
        }
        return Ok(a.powi(b as i32));
    }
    if a < 0.0 {
        return Err(DomainError(format!(
            "negative base {a} with non-integer exponent {b}"
        )));
    }
    Ok(a.powf(b))
}

fn is_zero(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 0.0)
}

fn is_one(e: &Expr) -> bool {
    matches!(e, Expr::Num(v) if *v == 1.0)
}

fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return b;
    }
    if is_zero(&b) {
        return a;
    }
    Expr::Bin(BinOp::Add, Box::new(a), Box::new(b))
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_zero(&b) {
        return a;
    }
    if is_zero(&a) {
        return neg(b);
    }
    Expr::Bin(BinOp::Sub, Box::new(a), Box::new(b))
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) || is_zero(&b) {
        return Expr::Num(0.0);
    }
    if is_one(&a) {
        return b;
    }
    if is_one(&b) {
        return a;
    }
    Expr::Bin(BinOp::Mul, Box::new(a), Box::new(b))
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_zero(&a) {
        return Expr::Num(0.0);
    }
    if is_one(&b) {
        return a;
    }
    Expr::Bin(BinOp::Div, Box::new(a), Box::new(b))
}

fn powc(a: Expr, k: f64) -> Expr {
    if k == 1.0 {
        return a;
    }
    if k == 0.0 {
        return Expr::Num(1.0);
    }
    Expr::Bin(BinOp::Pow, Box::new(a), Box::new(Expr::Num(k)))
}

fn pow_e(a: Expr, b: Expr) -> Expr {
    Expr::Bin(BinOp::Pow, Box::new(a), Box::new(b))
}

fn call(f: Func, a: Expr) -> Expr {
    Expr::Call(f, Box::new(a))
}

// Serialization is fully parenthesized so that re-parsing reproduces the
// tree exactly, including the atom-binding unary minus.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => {
                if *v < 0.0 {
                    write!(f, "(-{:?})", -v)
                } else {
                    write!(f, "{v:?}")
                }
            }
            Expr::Pi => write!(f, "pi"),
            Expr::Var(v) => write!(f, "{}", var_name(*v)),
            Expr::Neg(a) => write!(f, "(-({a}))"),
            Expr::Bin(op, a, b) => {
                let s = match op {
                    BinOp::Add => "+",
                    BinOp::Sub => "-",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                write!(f, "({a} {s} {b})")
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
