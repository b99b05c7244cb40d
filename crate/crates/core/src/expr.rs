//! Complex-valued expression trees for coefficients and majorants.
//!
//! Grammar (lowest to highest precedence):
//!
//! ```text
//! expr  := term (('+' | '-') term)*
//! term  := unary (('*' | '/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := number | 'i' | variable | func '(' expr ')' | '(' expr ')'
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-a^b`
//! is `-(a^b)` and `2^-1` is `2^(-1)`.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Var {
    /// Position in the plane.
    Z,
    /// Value of the unknown map, `w = f(z)`.
    W,
    /// `|z|`.
    R,
    /// `arg z` in `[0, 2π)`.
    Theta,
    /// Real scalar argument, used by radial test functions.
    T,
}

impl Var {
    fn name(self) -> &'static str {
        match self {
            Var::Z => "z",
            Var::W => "w",
            Var::R => "r",
            Var::Theta => "theta",
            Var::T => "t",
        }
    }

    fn from_name(s: &str) -> Option<Var> {
        Some(match s {
            "z" => Var::Z,
            "w" => Var::W,
            "r" => Var::R,
            "theta" => Var::Theta,
            "t" => Var::T,
            _ => return None,
        })
    }
}

/// Variables accepted in coefficient and majorant expressions.
pub const PLANE_VARS: &[Var] = &[Var::Z, Var::W, Var::R, Var::Theta];
/// Variables accepted in radial test functions such as ψ(t).
pub const SCALAR_VARS: &[Var] = &[Var::T];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Conj,
    Abs,
    Re,
    Im,
    Arg,
    Sqrt,
    Log,
}

impl Func {
    const ALL: [Func; 8] = [Func::Exp, Func::Conj, Func::Abs, Func::Re, Func::Im, Func::Arg, Func::Sqrt, Func::Log];

    fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Conj => "conj",
            Func::Abs => "abs",
            Func::Re => "re",
            Func::Im => "im",
            Func::Arg => "arg",
            Func::Sqrt => "sqrt",
            Func::Log => "log",
        }
    }

    fn from_name(s: &str) -> Option<Func> {
        Func::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    ImagUnit,
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Values bound to the expression variables during evaluation.
#[derive(Debug, Clone, Copy)]
pub struct Bindings {
    pub z: Complex64,
    pub w: Complex64,
    pub t: f64,
}

impl Bindings {
    pub fn plane(z: Complex64, w: Complex64) -> Self {
        Self { z, w, t: 0.0 }
    }

    pub fn scalar(t: f64) -> Self {
        Self { z: Complex64::new(0.0, 0.0), w: Complex64::new(0.0, 0.0), t }
    }
}

/// `arg z` folded into `[0, 2π)`.
pub fn theta_of(z: Complex64) -> f64 {
    let a = z.im.atan2(z.re);
    if a < 0.0 {
        a + 2.0 * PI
    } else {
        a
    }
}

fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Num(0.0)
    }

    pub fn is_zero_constant(&self) -> bool {
        matches!(self, Expr::Num(v) if *v == 0.0)
    }

    /// True when the expression mentions `var` anywhere.
    pub fn uses(&self, var: Var) -> bool {
        match self {
            Expr::Var(v) => *v == var,
            Expr::Num(_) | Expr::ImagUnit => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.uses(var),
            Expr::Binary(_, a, b) => a.uses(var) || b.uses(var),
        }
    }

    pub fn eval(&self, b: &Bindings) -> Result<Complex64> {
        let v = self.eval_inner(b)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("non-finite value {v} from `{self}`")))
        }
    }

    fn eval_inner(&self, b: &Bindings) -> Result<Complex64> {
        Ok(match self {
            Expr::Num(v) => real(*v),
            Expr::ImagUnit => Complex64::i(),
            Expr::Var(Var::Z) => b.z,
            Expr::Var(Var::W) => b.w,
            Expr::Var(Var::R) => real(b.z.norm()),
            Expr::Var(Var::Theta) => real(theta_of(b.z)),
            Expr::Var(Var::T) => real(b.t),
            Expr::Neg(a) => -a.eval_inner(b)?,
            Expr::Binary(op, lhs, rhs) => {
                let x = lhs.eval_inner(b)?;
                let y = rhs.eval_inner(b)?;
                match op {
                    BinOp::Add => x + y,
                    BinOp::Sub => x - y,
                    BinOp::Mul => x * y,
                    BinOp::Div => {
                        if y.norm_sqr() == 0.0 {
                            return Err(Error::Eval(format!("division by zero in `{self}`")));
                        }
                        x / y
                    }
                    BinOp::Pow => power(x, y)?,
                }
            }
            Expr::Call(f, a) => {
                let x = a.eval_inner(b)?;
                match f {
                    Func::Exp => x.exp(),
                    Func::Conj => x.conj(),
                    Func::Abs => real(x.norm()),
                    Func::Re => real(x.re),
                    Func::Im => real(x.im),
                    Func::Arg => real(x.arg()),
                    Func::Sqrt => x.sqrt(),
                    Func::Log => {
                        if x.norm_sqr() == 0.0 {
                            return Err(Error::Eval("log(0)".into()));
                        }
                        x.ln()
                    }
                }
            }
        })
    }
}

fn power(base: Complex64, exponent: Complex64) -> Result<Complex64> {
    let integral = exponent.im == 0.0 && exponent.re.fract() == 0.0 && exponent.re.abs() <= 64.0;
    if base.norm_sqr() == 0.0 {
        return if exponent.im == 0.0 && exponent.re > 0.0 {
            Ok(real(0.0))
        } else if exponent.norm_sqr() == 0.0 {
            Ok(real(1.0))
        } else {
            Err(Error::Eval(format!("0 raised to {exponent}")))
        };
    }
    if integral {
        Ok(base.powi(exponent.re as i32))
    } else if exponent.im == 0.0 && base.im == 0.0 && base.re > 0.0 {
        Ok(real(base.re.powf(exponent.re)))
    } else {
        Ok(base.powc(exponent))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) if *v < 0.0 || (*v == 0.0 && v.is_sign_negative()) => write!(f, "(-{:?})", -v),
            Expr::Num(v) => write!(f, "{v:?}"),
            Expr::ImagUnit => write!(f, "i"),
            Expr::Var(v) => write!(f, "{}", v.name()),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Sym(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn skip_ws(&mut self) {
        while let Some(c) = self.src[self.pos..].chars().next() {
            if c.is_whitespace() {
                self.pos += c.len_utf8();
            } else {
                break;
            }
        }
    }

    /// Returns the next token and its byte offset.
    fn next(&mut self) -> Result<(Tok, usize)> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(c) = rest.chars().next() else {
            return Ok((Tok::End, start));
        };
        if c.is_ascii_digit() || c == '.' {
            let bytes = rest.as_bytes();
            let mut end = 0;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut e = end + 1;
                if e < bytes.len() && (bytes[e] == b'+' || bytes[e] == b'-') {
                    e += 1;
                }
                if e < bytes.len() && bytes[e].is_ascii_digit() {
                    while e < bytes.len() && bytes[e].is_ascii_digit() {
                        e += 1;
                    }
                    end = e;
                }
            }
            let text = &rest[..end];
            let v: f64 = text.parse().map_err(|_| Error::Syntax { offset: start, expected: vec!["number".into()] })?;
            self.pos += end;
            return Ok((Tok::Num(v), start));
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let end = rest
                .char_indices()
                .find(|(_, ch)| !(ch.is_ascii_alphanumeric() || *ch == '_'))
                .map(|(i, _)| i)
                .unwrap_or(rest.len());
            self.pos += end;
            return Ok((Tok::Ident(rest[..end].to_string()), start));
        }
        if "+-*/^()".contains(c) {
            self.pos += 1;
            return Ok((Tok::Sym(c), start));
        }
        Err(Error::Syntax { offset: start, expected: operand_expected() })
    }
}

fn operand_expected() -> Vec<String> {
    ["number", "identifier", "'('", "'-'"].iter().map(|s| s.to_string()).collect()
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    tok: Tok,
    offset: usize,
    vars: &'a [Var],
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<()> {
        let (t, o) = self.lexer.next()?;
        self.tok = t;
        self.offset = o;
        Ok(())
    }

    fn syntax(&self, expected: &[&str]) -> Error {
        Error::Syntax { offset: self.offset, expected: expected.iter().map(|s| s.to_string()).collect() }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Tok::Sym(c @ ('+' | '-')) = self.tok {
            self.bump()?;
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Tok::Sym(c @ ('*' | '/')) = self.tok {
            self.bump()?;
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr> {
        if self.tok == Tok::Sym('-') {
            self.bump()?;
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.atom()?;
        if self.tok == Tok::Sym('^') {
            self.bump()?;
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr> {
        match self.tok.clone() {
            Tok::Num(v) => {
                self.bump()?;
                Ok(Expr::Num(v))
            }
            Tok::Sym('(') => {
                self.bump()?;
                let inner = self.expr()?;
                self.expect_close()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                let at = self.offset;
                if name == "i" {
                    self.bump()?;
                    return Ok(Expr::ImagUnit);
                }
                if let Some(func) = Func::from_name(&name) {
                    self.bump()?;
                    if self.tok != Tok::Sym('(') {
                        return Err(self.syntax(&["'('"]));
                    }
                    self.bump()?;
                    let arg = self.expr()?;
                    self.expect_close()?;
                    return Ok(Expr::Call(func, Box::new(arg)));
                }
                match Var::from_name(&name) {
                    Some(v) if self.vars.contains(&v) => {
                        self.bump()?;
                        Ok(Expr::Var(v))
                    }
                    _ => Err(Error::UnknownIdentifier { name, offset: at }),
                }
            }
            _ => Err(Error::Syntax { offset: self.offset, expected: operand_expected() }),
        }
    }

    fn expect_close(&mut self) -> Result<()> {
        if self.tok != Tok::Sym(')') {
            return Err(self.syntax(&["')'", "operator"]));
        }
        self.bump()
    }
}

/// Parses a coefficient expression over `z, w, r, theta`.
pub fn parse(text: &str) -> Result<Expr> {
    parse_with(text, PLANE_VARS)
}

/// Parses with an explicit set of admissible variables.
pub fn parse_with(text: &str, vars: &[Var]) -> Result<Expr> {
    if text.trim().is_empty() {
        return Err(Error::Syntax { offset: 0, expected: operand_expected() });
    }
    let mut p = Parser { lexer: Lexer { src: text, pos: 0 }, tok: Tok::End, offset: 0, vars };
    p.bump()?;
    let e = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.syntax(&["operator", "end of input"]));
    }
    Ok(e)
}
