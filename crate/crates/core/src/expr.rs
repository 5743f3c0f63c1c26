//! Scalar expressions over `x`, `y` and `r = sqrt(x² + y²)`.
//!
//! Problem data (running costs, switching costs, boundary values) is given
//! as text in configuration files. The grammar is deliberately small:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | 'pi' | 'x' | 'y' | 'r' | func '(' args ')' | '(' expr ')'
//! ```
//!
//! `^` binds tighter than unary minus (`-x^2 == -(x^2)`) and is
//! right-associative. Piecewise data is written with `min`, `max` and `abs`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    X,
    Y,
    R,
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
    Ln,
    Exp,
    Abs,
    Sqrt,
    Min,
    Max,
    Atan2,
}

impl Func {
    fn lookup(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "ln" => Func::Ln,
            "exp" => Func::Exp,
            "abs" => Func::Abs,
            "sqrt" => Func::Sqrt,
            "min" => Func::Min,
            "max" => Func::Max,
            "atan2" => Func::Atan2,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Ln => "ln",
            Func::Exp => "exp",
            Func::Abs => "abs",
            Func::Sqrt => "sqrt",
            Func::Min => "min",
            Func::Max => "max",
            Func::Atan2 => "atan2",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Min | Func::Max | Func::Atan2 => 2,
            _ => 1,
        }
    }
}

/// Expression tree.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Pi,
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// A parsed expression together with the text it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    source: String,
    root: Expr,
}

impl Expression {
    pub fn parse(text: &str) -> Result<Self> {
        let root = Parser::new(text)?.parse_all()?;
        Ok(Self {
            source: text.to_string(),
            root,
        })
    }

    /// A constant expression (used for programmatic problem data).
    pub fn constant(value: f64) -> Self {
        Self {
            source: format!("{value:?}"),
            root: Expr::Const(value),
        }
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn root(&self) -> &Expr {
        &self.root
    }

    pub fn evaluate(&self, x: f64, y: f64) -> Result<f64> {
        if !x.is_finite() || !y.is_finite() {
            return Err(Error::Eval(format!("non-finite point ({x}, {y})")));
        }
        let v = eval(&self.root, x, y)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Eval(format!("non-finite result {v}")))
        }
    }
}

impl FromStr for Expression {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Expression::parse(s)
    }
}

/// Fully parenthesized form; reparses to the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(v) => write!(f, "{v:?}"),
            Expr::Pi => f.write_str("pi"),
            Expr::Var(Var::X) => f.write_str("x"),
            Expr::Var(Var::Y) => f.write_str("y"),
            Expr::Var(Var::R) => f.write_str("r"),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinOp::Add => '+',
                    BinOp::Sub => '-',
                    BinOp::Mul => '*',
                    BinOp::Div => '/',
                    BinOp::Pow => '^',
                };
                write!(f, "({a} {sym} {b})")
            }
            Expr::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (k, a) in args.iter().enumerate() {
                    if k > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}

fn eval(e: &Expr, x: f64, y: f64) -> Result<f64> {
    Ok(match e {
        Expr::Const(v) => *v,
        Expr::Pi => PI,
        Expr::Var(Var::X) => x,
        Expr::Var(Var::Y) => y,
        Expr::Var(Var::R) => x.hypot(y),
        Expr::Neg(a) => -eval(a, x, y)?,
        Expr::Binary(op, a, b) => {
            let a = eval(a, x, y)?;
            let b = eval(b, x, y)?;
            match op {
                BinOp::Add => a + b,
                BinOp::Sub => a - b,
                BinOp::Mul => a * b,
                BinOp::Div => {
                    if b == 0.0 {
                        return Err(Error::Eval("division by zero".into()));
                    }
                    a / b
                }
                BinOp::Pow => {
                    if a < 0.0 && b.fract() != 0.0 {
                        return Err(Error::Eval(format!(
                            "negative base {a} with non-integer exponent {b}"
                        )));
                    }
                    if a == 0.0 && b < 0.0 {
                        return Err(Error::Eval("division by zero in power".into()));
                    }
                    a.powf(b)
                }
            }
        }
        Expr::Call(func, args) => {
            let a = eval(&args[0], x, y)?;
            match func {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Abs => a.abs(),
                Func::Ln => {
                    if a <= 0.0 {
                        return Err(Error::Eval(format!("ln of non-positive argument {a}")));
                    }
                    a.ln()
                }
                Func::Sqrt => {
                    if a < 0.0 {
                        return Err(Error::Eval(format!("sqrt of negative argument {a}")));
                    }
                    a.sqrt()
                }
                Func::Min => a.min(eval(&args[1], x, y)?),
                Func::Max => a.max(eval(&args[1], x, y)?),
                Func::Atan2 => a.atan2(eval(&args[1], x, y)?),
            }
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Comma,
    End,
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    at: usize,
}

fn syntax(pos: usize, msg: impl Into<String>) -> Error {
    Error::Syntax {
        pos,
        msg: msg.into(),
    }
}

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let c = chars[k];
        if c.is_whitespace() {
            k += 1;
            continue;
        }
        let start = k;
        if c.is_ascii_digit() || c == '.' {
            while k < chars.len() && (chars[k].is_ascii_digit() || chars[k] == '.') {
                k += 1;
            }
            if k < chars.len() && (chars[k] == 'e' || chars[k] == 'E') {
                let mut m = k + 1;
                if m < chars.len() && (chars[m] == '+' || chars[m] == '-') {
                    m += 1;
                }
                if m < chars.len() && chars[m].is_ascii_digit() {
                    while m < chars.len() && chars[m].is_ascii_digit() {
                        m += 1;
                    }
                    k = m;
                }
            }
            let lit: String = chars[start..k].iter().collect();
            let v: f64 = lit
                .parse()
                .map_err(|_| syntax(start, format!("malformed number '{lit}'")))?;
            out.push((Tok::Num(v), start));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while k < chars.len() && (chars[k].is_ascii_alphanumeric() || chars[k] == '_') {
                k += 1;
            }
            out.push((Tok::Ident(chars[start..k].iter().collect()), start));
            continue;
        }
        let tok = match c {
            '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            _ => return Err(syntax(start, format!("unexpected character '{c}'"))),
        };
        out.push((tok, start));
        k += 1;
    }
    out.push((Tok::End, chars.len()));
    Ok(out)
}

impl Parser {
    fn new(text: &str) -> Result<Self> {
        if text.trim().is_empty() {
            return Err(syntax(0, "empty expression"));
        }
        Ok(Self {
            toks: tokenize(text)?,
            at: 0,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn parse_all(mut self) -> Result<Expr> {
        let e = self.expr()?;
        match self.peek() {
            Tok::End => Ok(e),
            Tok::RParen => Err(syntax(self.pos(), "unbalanced ')'")),
            t => Err(syntax(self.pos(), format!("unexpected token {t:?}"))),
        }
    }

    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exp = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                if *self.peek() != Tok::RParen {
                    return Err(syntax(self.pos(), "expected ')'"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Ok(Expr::Var(Var::X)),
                "y" => Ok(Expr::Var(Var::Y)),
                "r" => Ok(Expr::Var(Var::R)),
                "pi" => Ok(Expr::Pi),
                _ => {
                    let func = Func::lookup(&name)
                        .ok_or_else(|| syntax(pos, format!("unknown identifier '{name}'")))?;
                    self.call(func, pos)
                }
            },
            Tok::End => Err(syntax(pos, "unexpected end of input")),
            t => Err(syntax(pos, format!("unexpected token {t:?}"))),
        }
    }

    fn call(&mut self, func: Func, name_pos: usize) -> Result<Expr> {
        if *self.peek() != Tok::LParen {
            return Err(syntax(self.pos(), format!("expected '(' after '{}'", func.name())));
        }
        self.bump();
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        if *self.peek() != Tok::RParen {
            return Err(syntax(self.pos(), "expected ')'"));
        }
        self.bump();
        if args.len() != func.arity() {
            return Err(syntax(
                name_pos,
                format!(
                    "'{}' takes {} argument(s), got {}",
                    func.name(),
                    func.arity(),
                    args.len()
                ),
            ));
        }
        Ok(Expr::Call(func, args))
    }
}
