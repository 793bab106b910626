//! Expression grammar for coupling functions `g(z)`.
//!
//! ```text
//! expr    = term , { ("+" | "-") , term } ;
//! term    = unary , { ("*" | "/") , unary } ;
//! unary   = "-" , unary | power ;
//! power   = atom , [ "^" , unary ] ;          (* right associative *)
//! atom    = number | "z" | func , "(" , expr , ")" | "(" , expr , ")" ;
//! func    = "sin" | "cos" | "sech" | "tanh" | "exp" | "sqrt" | "abs" ;
//! number  = digits , [ "." , digits ] , [ ("e" | "E") , [ "+" | "-" ] , digits ] ;
//! ```
//!
//! No simplification is performed: an AST evaluates exactly as written.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Sech,
    Tanh,
    Exp,
    Sqrt,
    Abs,
}

impl Func {
    const ALL: [Func; 7] = [
        Func::Sin,
        Func::Cos,
        Func::Sech,
        Func::Tanh,
        Func::Exp,
        Func::Sqrt,
        Func::Abs,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Sech => "sech",
            Func::Tanh => "tanh",
            Func::Exp => "exp",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
        }
    }

    fn lookup(name: &str) -> Option<Func> {
        Self::ALL.into_iter().find(|f| f.name() == name)
    }

    fn apply(self, x: f64) -> f64 {
        match self {
            Func::Sin => x.sin(),
            Func::Cos => x.cos(),
            Func::Sech => 1.0 / x.cosh(),
            Func::Tanh => x.tanh(),
            Func::Exp => x.exp(),
            Func::Sqrt => x.sqrt(),
            Func::Abs => x.abs(),
        }
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
pub enum CouplingExpr {
    Num(f64),
    Var,
    Neg(Box<CouplingExpr>),
    Bin(BinOp, Box<CouplingExpr>, Box<CouplingExpr>),
    Call(Func, Box<CouplingExpr>),
}

impl CouplingExpr {
    pub fn bin(op: BinOp, l: CouplingExpr, r: CouplingExpr) -> Self {
        CouplingExpr::Bin(op, Box::new(l), Box::new(r))
    }

    /// Evaluates at `z`; a non-finite result is reported as a domain error.
    pub fn eval(&self, z: f64) -> Result<f64> {
        let v = self.eval_raw(z);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain { z })
        }
    }

    fn eval_raw(&self, z: f64) -> f64 {
        match self {
            CouplingExpr::Num(x) => *x,
            CouplingExpr::Var => z,
            CouplingExpr::Neg(e) => -e.eval_raw(z),
            CouplingExpr::Call(f, e) => f.apply(e.eval_raw(z)),
            CouplingExpr::Bin(op, l, r) => {
                let (a, b) = (l.eval_raw(z), r.eval_raw(z));
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => a.powf(b),
                }
            }
        }
    }

    /// Coefficients `c[k]` of `Σ c[k] z^k` when the expression is a polynomial in `z`.
    pub fn polynomial(&self) -> Option<Vec<f64>> {
        fn add(a: &[f64], b: &[f64], sign: f64) -> Vec<f64> {
            let mut out = vec![0.0; a.len().max(b.len())];
            for (i, x) in a.iter().enumerate() {
                out[i] += x;
            }
            for (i, x) in b.iter().enumerate() {
                out[i] += sign * x;
            }
            out
        }
        fn mul(a: &[f64], b: &[f64]) -> Vec<f64> {
            let mut out = vec![0.0; a.len() + b.len() - 1];
            for (i, x) in a.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    out[i + j] += x * y;
                }
            }
            out
        }
        fn constant(p: &[f64]) -> Option<f64> {
            p.iter().skip(1).all(|c| *c == 0.0).then(|| p[0])
        }
        match self {
            CouplingExpr::Num(x) => Some(vec![*x]),
            CouplingExpr::Var => Some(vec![0.0, 1.0]),
            CouplingExpr::Neg(e) => Some(e.polynomial()?.iter().map(|c| -c).collect()),
            CouplingExpr::Call(..) => None,
            CouplingExpr::Bin(op, l, r) => {
                let a = l.polynomial()?;
                let b = r.polynomial()?;
                match op {
                    BinOp::Add => Some(add(&a, &b, 1.0)),
                    BinOp::Sub => Some(add(&a, &b, -1.0)),
                    BinOp::Mul => Some(mul(&a, &b)),
                    BinOp::Div => {
                        let d = constant(&b)?;
                        (d != 0.0).then(|| a.iter().map(|c| c / d).collect())
                    }
                    BinOp::Pow => {
                        let e = constant(&b)?;
                        if e < 0.0 || e.fract() != 0.0 || e > 64.0 {
                            return None;
                        }
                        let mut out = vec![1.0];
                        for _ in 0..e as usize {
                            out = mul(&out, &a);
                        }
                        Some(out)
                    }
                }
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            CouplingExpr::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            CouplingExpr::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            CouplingExpr::Neg(_) => 3,
            CouplingExpr::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    fn write_min(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for CouplingExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CouplingExpr::Num(x) if *x < 0.0 || (*x == 0.0 && x.is_sign_negative()) => {
                write!(f, "({x})")
            }
            CouplingExpr::Num(x) => write!(f, "{x}"),
            CouplingExpr::Var => write!(f, "z"),
            CouplingExpr::Neg(e) => {
                write!(f, "-")?;
                e.write_min(f, 3)
            }
            CouplingExpr::Call(func, e) => write!(f, "{}({e})", func.name()),
            CouplingExpr::Bin(op, l, r) => {
                let (lmin, rmin) = match op {
                    BinOp::Add | BinOp::Sub => (1, 2),
                    BinOp::Mul | BinOp::Div => (2, 3),
                    BinOp::Pow => (5, 3),
                };
                l.write_min(f, lmin)?;
                if *op == BinOp::Pow {
                    write!(f, "^")?;
                } else {
                    write!(f, " {} ", op.symbol())?;
                }
                r.write_min(f, rmin)
            }
        }
    }
}

impl FromStr for CouplingExpr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_coupling(s)
    }
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

fn tokenize(text: &str) -> Result<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            b' ' | b'\t' | b'\n' | b'\r' => i += 1,
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                out.push((Tok::Op(c as char), i));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LParen, i));
                i += 1;
            }
            b')' => {
                out.push((Tok::RParen, i));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, i));
                i += 1;
            }
            b'0'..=b'9' | b'.' => {
                let start = i;
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
                let lit = &text[start..i];
                let value: f64 = lit.parse().map_err(|_| Error::Syntax {
                    offset: start,
                    message: format!("malformed number `{lit}`"),
                })?;
                if !value.is_finite() {
                    return Err(Error::Syntax {
                        offset: start,
                        message: format!("number `{lit}` overflows"),
                    });
                }
                out.push((Tok::Num(value), start));
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                let ch = text[i..].chars().next().unwrap_or('?');
                return Err(Error::Syntax {
                    offset: i,
                    message: format!("unexpected character `{ch}`"),
                });
            }
        }
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser {
    toks: Vec<(Tok, usize)>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, usize) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn syntax(&self, message: impl Into<String>) -> Error {
        Error::Syntax {
            offset: self.offset(),
            message: message.into(),
        }
    }

    fn expr(&mut self) -> Result<CouplingExpr> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Tok::Op('+') => BinOp::Add,
                Tok::Op('-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = CouplingExpr::bin(op, lhs, self.term()?);
        }
    }

    fn term(&mut self) -> Result<CouplingExpr> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Op('*') => BinOp::Mul,
                Tok::Op('/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.bump();
            lhs = CouplingExpr::bin(op, lhs, self.unary()?);
        }
    }

    fn unary(&mut self) -> Result<CouplingExpr> {
        if *self.peek() == Tok::Op('-') {
            self.bump();
            return Ok(CouplingExpr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<CouplingExpr> {
        let base = self.atom()?;
        if *self.peek() == Tok::Op('^') {
            self.bump();
            let exponent = self.unary()?;
            return Ok(CouplingExpr::bin(BinOp::Pow, base, exponent));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<CouplingExpr> {
        let (tok, offset) = self.bump();
        match tok {
            Tok::Num(x) => Ok(CouplingExpr::Num(x)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Tok::Ident(name) if name == "z" => Ok(CouplingExpr::Var),
            Tok::Ident(name) => {
                let func = Func::lookup(&name).ok_or(Error::UnknownIdentifier {
                    name: name.clone(),
                    offset,
                })?;
                if *self.peek() != Tok::LParen {
                    return Err(self.syntax(format!("expected `(` after `{name}`")));
                }
                self.bump();
                if *self.peek() == Tok::RParen {
                    return Err(Error::Arity {
                        name,
                        expected: 1,
                        found: 0,
                    });
                }
                let arg = self.expr()?;
                let mut extra = 0;
                while *self.peek() == Tok::Comma {
                    self.bump();
                    self.expr()?;
                    extra += 1;
                }
                if extra > 0 {
                    return Err(Error::Arity {
                        name,
                        expected: 1,
                        found: 1 + extra,
                    });
                }
                self.expect_rparen()?;
                Ok(CouplingExpr::Call(func, Box::new(arg)))
            }
            Tok::End => Err(Error::Syntax {
                offset,
                message: "unexpected end of input".into(),
            }),
            other => Err(Error::Syntax {
                offset,
                message: format!("unexpected token {other:?}"),
            }),
        }
    }

    fn expect_rparen(&mut self) -> Result<()> {
        if *self.peek() != Tok::RParen {
            return Err(self.syntax("expected `)`"));
        }
        self.bump();
        Ok(())
    }
}

pub fn parse_coupling(text: &str) -> Result<CouplingExpr> {
    let mut p = Parser {
        toks: tokenize(text)?,
        pos: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.syntax("trailing input"));
    }
    Ok(e)
}
