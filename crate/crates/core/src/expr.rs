//! Arithmetic expressions over the coordinates `x1 .. x{2n+1}`.
//!
//! Precedence, tightest first: `^`, unary `-`, `* /`, `+ -`. Binary operators
//! are left-associative except `^`, whose exponent must fold to a
//! non-negative integer constant.

use std::fmt;

use thiserror::Error;

use crate::group::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParseError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown variable `{name}` at byte {pos}")]
    UnknownVariable { pos: usize, name: String },
    #[error("variable x{index} out of range for n = {n} (allowed x1..x{max})", max = 2 * n + 1)]
    IndexOutOfRange { index: usize, n: usize },
    #[error("exponent at byte {pos} must be a non-negative integer constant")]
    BadExponent { pos: usize },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("division by zero")]
    DivisionByZero,
    #[error("expression uses x{index} but the point has {dim} coordinates")]
    DimensionMismatch { index: usize, dim: usize },
    #[error("non-finite result")]
    NonFinite,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(f64),
    /// One-based coordinate index.
    Var(usize),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, u32),
}

impl Expr {
    pub fn eval(&self, p: &Point) -> Result<f64, EvalError> {
        let v = self.eval_slice(p.coords())?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite)
        }
    }

    fn eval_slice(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => *x
                .get(i - 1)
                .ok_or(EvalError::DimensionMismatch { index: *i, dim: x.len() })?,
            Expr::Neg(a) => -a.eval_slice(x)?,
            Expr::Add(a, b) => a.eval_slice(x)? + b.eval_slice(x)?,
            Expr::Sub(a, b) => a.eval_slice(x)? - b.eval_slice(x)?,
            Expr::Mul(a, b) => a.eval_slice(x)? * b.eval_slice(x)?,
            Expr::Div(a, b) => {
                let den = b.eval_slice(x)?;
                if den == 0.0 {
                    return Err(EvalError::DivisionByZero);
                }
                a.eval_slice(x)? / den
            }
            Expr::Pow(a, k) => a.eval_slice(x)?.powi(*k as i32),
        })
    }

    /// Largest variable index used, or 0.
    pub fn max_var(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => *i,
            Expr::Neg(a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    fn fold_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            Expr::Var(_) => None,
            Expr::Neg(a) => Some(-a.fold_const()?),
            Expr::Add(a, b) => Some(a.fold_const()? + b.fold_const()?),
            Expr::Sub(a, b) => Some(a.fold_const()? - b.fold_const()?),
            Expr::Mul(a, b) => Some(a.fold_const()? * b.fold_const()?),
            Expr::Div(a, b) => {
                let d = b.fold_const()?;
                (d != 0.0).then(|| a.fold_const().map(|n| n / d)).flatten()
            }
            Expr::Pow(a, k) => Some(a.fold_const()?.powi(*k as i32)),
        }
    }
}

/// Prints with full parenthesization, so that printing and re-parsing
/// yields the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, k) => write!(f, "({a} ^ {k})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next(&mut self) -> Result<(usize, Tok), ParseError> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(&c) = bytes.get(self.pos) else {
            return Ok((start, Tok::End));
        };
        let single = match c {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(t) = single {
            self.pos += 1;
            return Ok((start, t));
        }
        if c.is_ascii_digit() || c == b'.' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                end += 1;
            }
            if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                let mut exp = end + 1;
                if exp < bytes.len() && (bytes[exp] == b'+' || bytes[exp] == b'-') {
                    exp += 1;
                }
                if exp < bytes.len() && bytes[exp].is_ascii_digit() {
                    while exp < bytes.len() && bytes[exp].is_ascii_digit() {
                        exp += 1;
                    }
                    end = exp;
                }
            }
            let text = &self.src[start..end];
            let value = text.parse::<f64>().map_err(|_| ParseError::Syntax {
                pos: start,
                msg: format!("malformed number `{text}`"),
            })?;
            self.pos = end;
            return Ok((start, Tok::Num(value)));
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let mut end = self.pos;
            while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                end += 1;
            }
            let name = &self.src[start..end];
            self.pos = end;
            let index = name
                .strip_prefix('x')
                .filter(|d| !d.is_empty() && d.bytes().all(|b| b.is_ascii_digit()))
                .and_then(|d| d.parse::<usize>().ok());
            return match index {
                Some(i) => Ok((start, Tok::Var(i))),
                None => Err(ParseError::UnknownVariable { pos: start, name: name.to_string() }),
            };
        }
        Err(ParseError::Syntax { pos: start, msg: format!("unexpected character `{}`", c as char) })
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: (usize, Tok),
    n: usize,
}

const PREFIX_NEG_BP: u8 = 5;

fn infix_binding(t: &Tok) -> Option<(u8, u8)> {
    match t {
        Tok::Plus | Tok::Minus => Some((1, 2)),
        Tok::Star | Tok::Slash => Some((3, 4)),
        // right-associative, binds tighter than unary minus
        Tok::Caret => Some((8, 7)),
        _ => None,
    }
}

impl<'a> Parser<'a> {
    fn bump(&mut self) -> Result<(usize, Tok), ParseError> {
        let next = self.lexer.next()?;
        Ok(std::mem::replace(&mut self.peeked, next))
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr, ParseError> {
        let (pos, tok) = self.bump()?;
        let mut lhs = match tok {
            Tok::Num(v) => Expr::Const(v),
            Tok::Var(i) => {
                if i == 0 || i > 2 * self.n + 1 {
                    return Err(ParseError::IndexOutOfRange { index: i, n: self.n });
                }
                Expr::Var(i)
            }
            Tok::Minus => Expr::Neg(Box::new(self.expr(PREFIX_NEG_BP)?)),
            Tok::LParen => {
                let inner = self.expr(0)?;
                match self.bump()? {
                    (_, Tok::RParen) => inner,
                    (p, t) => {
                        return Err(ParseError::Syntax { pos: p, msg: format!("expected `)`, found {t:?}") })
                    }
                }
            }
            t => return Err(ParseError::Syntax { pos, msg: format!("unexpected {t:?}") }),
        };
        loop {
            let Some((l_bp, r_bp)) = infix_binding(&self.peeked.1) else { break };
            if l_bp < min_bp {
                break;
            }
            let (op_pos, op) = self.bump()?;
            let rhs = self.expr(r_bp)?;
            lhs = match op {
                Tok::Plus => Expr::Add(Box::new(lhs), Box::new(rhs)),
                Tok::Minus => Expr::Sub(Box::new(lhs), Box::new(rhs)),
                Tok::Star => Expr::Mul(Box::new(lhs), Box::new(rhs)),
                Tok::Slash => Expr::Div(Box::new(lhs), Box::new(rhs)),
                Tok::Caret => {
                    let k = rhs
                        .fold_const()
                        .filter(|k| *k >= 0.0 && k.fract() == 0.0 && *k <= u32::MAX as f64)
                        .ok_or(ParseError::BadExponent { pos: op_pos + 1 })?;
                    Expr::Pow(Box::new(lhs), k as u32)
                }
                _ => unreachable!("non-infix token"),
            };
        }
        Ok(lhs)
    }
}

/// Parses `src` for points of `H^n`.
pub fn parse(src: &str, n: usize) -> Result<Expr, ParseError> {
    let mut lexer = Lexer { src, pos: 0 };
    let first = lexer.next()?;
    let mut parser = Parser { lexer, peeked: first, n };
    let e = parser.expr(0)?;
    match &parser.peeked {
        (_, Tok::End) => Ok(e),
        (pos, t) => Err(ParseError::Syntax { pos: *pos, msg: format!("trailing {t:?}") }),
    }
}

/// Evaluates `e` at `p`.
pub fn eval(e: &Expr, p: &Point) -> Result<f64, EvalError> {
    e.eval(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(e: Expr) -> Box<Expr> {
        Box::new(e)
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse("x1 + x3", 1).unwrap(), Expr::Add(b(Expr::Var(1)), b(Expr::Var(3))));
        assert_eq!(
            parse("x1 + x2*x3^2", 1).unwrap(),
            Expr::Add(b(Expr::Var(1)), b(Expr::Mul(b(Expr::Var(2)), b(Expr::Pow(b(Expr::Var(3)), 2)))))
        );
        assert_eq!(parse("x5", 1).unwrap_err(), ParseError::IndexOutOfRange { index: 5, n: 1 });
    }

    #[test]
    fn precedence_and_associativity() {
        // unary minus is looser than ^
        assert_eq!(parse("-x1^2", 1).unwrap(), Expr::Neg(b(Expr::Pow(b(Expr::Var(1)), 2))));
        // left associative subtraction
        assert_eq!(
            parse("x1 - x2 - x3", 1).unwrap(),
            Expr::Sub(b(Expr::Sub(b(Expr::Var(1)), b(Expr::Var(2)))), b(Expr::Var(3)))
        );
        // right associative power: 2^3^2 = 2^9
        let p = Point::origin(1);
        assert_eq!(parse("2^3^2", 1).unwrap().eval(&p).unwrap(), 512.0);
        assert_eq!(parse("-2*3", 1).unwrap().eval(&p).unwrap(), -6.0);
        assert_eq!(parse("1.5e1 / 3", 1).unwrap().eval(&p).unwrap(), 5.0);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(parse("x1 +", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("y1", 1), Err(ParseError::UnknownVariable { pos: 0, .. })));
        assert!(matches!(parse("x0", 1), Err(ParseError::IndexOutOfRange { .. })));
        assert!(matches!(parse("x1^-1", 1), Err(ParseError::BadExponent { .. })));
        assert!(matches!(parse("x1^0.5", 1), Err(ParseError::BadExponent { .. })));
        assert!(matches!(parse("(x1", 1), Err(ParseError::Syntax { .. })));
        assert!(matches!(parse("x1 x2", 1), Err(ParseError::Syntax { pos: 3, .. })));
    }

    #[test]
    fn eval_examples() {
        let p = Point::new(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(parse("x1 + x3", 1).unwrap().eval(&p).unwrap(), 0.0);
        let q = Point::new(&[3.0, 0.0, 0.0]).unwrap();
        assert_eq!(parse("x1^2", 1).unwrap().eval(&q).unwrap(), 9.0);
        assert_eq!(parse("1/(x1)", 1).unwrap().eval(&Point::origin(1)), Err(EvalError::DivisionByZero));
    }

    #[test]
    fn eval_rejects_short_points() {
        let e = parse("x5", 2).unwrap();
        assert_eq!(e.eval(&Point::origin(1)), Err(EvalError::DimensionMismatch { index: 5, dim: 3 }));
    }
}
