//! Expression grammar for states:
//!
//! ```text
//! sum     := nterm (('+' | '-') nterm)*
//! nterm   := term ('_(' int ')' nterm)?          right-nested n-products
//! term    := unary (('*' | '/') unary)*          '/' needs a scalar divisor
//! unary   := '-' unary | power
//! power   := primary ('^' exponent)?             exponent: int, -int, (p/2) on hb
//! primary := number [adjacent primary] | 'k' | 'hb' | 'q' | 'D' ['^' int] '(' sum ')'
//!          | ident | ':' power+ ':' | '(' sum ')'
//! ```
//!
//! Identifiers may end in one `+` or `-` when the sign is not followed by an
//! operand (`G+`, `G-`). `k`, `hb`, `q` and `D` are reserved. A number
//! directly followed by an operand multiplies it (`2k+3`).

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::scalar::{Rat, Scalar};
use crate::state::Expr;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
}

fn err<T>(pos: usize, msg: impl Into<String>) -> Result<T, ParseError> {
    Err(ParseError::Syntax { pos, msg: msg.into() })
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Sym(char),
    /// `_(`
    NProd,
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    pos: usize,
    /// No whitespace between this token and the previous one.
    glued: bool,
}

fn is_operand_start(c: Option<char>) -> bool {
    c.is_some_and(|c| c.is_ascii_alphanumeric() || c == '(' || c == '_')
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let at = |i: usize| chars.get(i).map(|(_, c)| *c);
    let mut out = Vec::new();
    let mut i = 0;
    let mut glued = false;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            glued = false;
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while at(i).is_some_and(|c| c.is_ascii_digit()) {
                i += 1;
            }
            let s: String = chars[start..i].iter().map(|(_, c)| c).collect();
            out.push(Token { tok: Tok::Num(s.parse().expect("digits")), pos, glued });
        } else if c == '_' && at(i + 1) == Some('(') {
            out.push(Token { tok: Tok::NProd, pos, glued });
            i += 2;
        } else if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while at(i).is_some_and(|c| c.is_ascii_alphanumeric() || c == '_') && !(at(i) == Some('_') && at(i + 1) == Some('(')) {
                i += 1;
            }
            if matches!(at(i), Some('+') | Some('-')) && !is_operand_start(at(i + 1)) {
                i += 1;
            }
            let s: String = chars[start..i].iter().map(|(_, c)| c).collect();
            out.push(Token { tok: Tok::Ident(s), pos, glued });
        } else if "+-*/^:()".contains(c) {
            out.push(Token { tok: Tok::Sym(c), pos, glued });
            i += 1;
        } else {
            return err(pos, format!("unexpected character `{}`", c));
        }
        glued = true;
    }
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    i: usize,
    end: usize,
    /// Inside `:...:`, where `:` closes instead of opening.
    in_colon: usize,
}

/// Scalar value of a subtree made only of scalars.
pub fn fold(e: &Expr) -> Option<Scalar> {
    match e {
        Expr::Scalar(c) => Some(c.clone()),
        Expr::Vacuum => Some(Scalar::one()),
        Expr::Neg(a) => fold(a).map(|c| c.neg()),
        Expr::Sum(xs) => xs.iter().try_fold(Scalar::zero(), |acc, x| fold(x).map(|c| acc.add(&c))),
        Expr::Scaled(a, b) => Some(fold(a)?.mul(&fold(b)?)),
        Expr::Power(a, n) => {
            let c = fold(a)?;
            Some((0..*n).fold(Scalar::one(), |acc, _| acc.mul(&c)))
        }
        _ => None,
    }
}

fn scalar_pow(c: &Scalar, n: i64, pos: usize) -> Result<Scalar, ParseError> {
    let p = (0..n.unsigned_abs()).fold(Scalar::one(), |acc, _| acc.mul(c));
    if n >= 0 {
        Ok(p)
    } else {
        Scalar::one().div(&p).or_else(|e| err(pos, e.to_string()))
    }
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.toks.get(self.i)
    }

    fn pos(&self) -> usize {
        self.peek().map_or(self.end, |t| t.pos)
    }

    fn is_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(x), .. }) if *x == c)
    }

    fn expect_sym(&mut self, c: char) -> Result<(), ParseError> {
        if self.is_sym(c) {
            self.i += 1;
            Ok(())
        } else {
            err(self.pos(), format!("expected `{}`", c))
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        let neg = self.is_sym('-');
        if neg {
            self.i += 1;
        }
        match self.peek().cloned() {
            Some(Token { tok: Tok::Num(n), pos, .. }) => {
                self.i += 1;
                let v: i64 = n.try_into().or_else(|_| err(pos, "integer too large"))?;
                Ok(if neg { -v } else { v })
            }
            _ => err(self.pos(), "expected an integer"),
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut items = vec![self.nterm()?];
        loop {
            if self.is_sym('+') {
                self.i += 1;
                items.push(self.nterm()?);
            } else if self.is_sym('-') {
                self.i += 1;
                let t = self.nterm()?;
                items.push(negate(t));
            } else {
                break;
            }
        }
        Ok(if items.len() == 1 { items.pop().unwrap() } else { simplify(Expr::Sum(items)) })
    }

    fn nterm(&mut self) -> Result<Expr, ParseError> {
        let a = self.term()?;
        if matches!(self.peek(), Some(Token { tok: Tok::NProd, .. })) {
            self.i += 1;
            let n = self.int()?;
            self.expect_sym(')')?;
            let b = self.nterm()?;
            return Ok(Expr::nprod(a, n, b));
        }
        Ok(a)
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.is_sym('*') {
                self.i += 1;
                let b = self.unary()?;
                acc = times(acc, b);
            } else if self.is_sym('/') {
                let pos = self.pos();
                self.i += 1;
                let b = self.unary()?;
                let Some(c) = fold(&b) else { return err(pos, "divisor is not a scalar") };
                let inv = Scalar::one().div(&c).or_else(|e| err(pos, e.to_string()))?;
                acc = times(acc, Expr::Scalar(inv));
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_sym('-') {
            self.i += 1;
            return Ok(negate(self.unary()?));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let start = self.pos();
        let base = self.primary()?;
        if !self.is_sym('^') {
            return Ok(base);
        }
        self.i += 1;
        let pos = self.pos();
        if self.is_sym('(') {
            // hb^(p/2)
            self.i += 1;
            let p = self.int()?;
            self.expect_sym('/')?;
            if self.int()? != 2 {
                return err(pos, "fractional exponents are halves");
            }
            self.expect_sym(')')?;
            return match base {
                Expr::Scalar(c) if c == Scalar::hbar_pow(1) => Ok(Expr::Scalar(Scalar::q_pow(i32::try_from(p).or_else(|_| err(pos, "exponent too large"))?))),
                _ => err(start, "half-integral exponent on something other than hb"),
            };
        }
        let n = self.int()?;
        if let Some(c) = fold(&base) {
            return Ok(Expr::Scalar(scalar_pow(&c, n, pos)?));
        }
        match (base, n) {
            (Expr::Gen(g), n) if n < 0 => Ok(Expr::InvPower(g, u32::try_from(-n).unwrap())),
            (_, n) if n < 0 => err(pos, "negative power of a non-generator"),
            (b, n) => Ok(Expr::Power(Box::new(b), u32::try_from(n).or_else(|_| err(pos, "exponent too large"))?)),
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some(t) = self.peek().cloned() else { return err(self.end, "unexpected end of input") };
        match t.tok {
            Tok::Num(n) => {
                self.i += 1;
                let c = Expr::Scalar(Scalar::from_rat(Rat::from_integer(n)));
                let adjacent = self.peek().is_some_and(|u| u.glued && (matches!(u.tok, Tok::Ident(_)) || u.tok == Tok::Sym('(')));
                if adjacent {
                    let b = self.power()?;
                    return Ok(times(c, b));
                }
                Ok(c)
            }
            Tok::Ident(name) => {
                self.i += 1;
                match name.as_str() {
                    "k" => Ok(Expr::Scalar(Scalar::k())),
                    "hb" => Ok(Expr::Scalar(Scalar::hbar_pow(1))),
                    "q" => Ok(Expr::Scalar(Scalar::q_pow(1))),
                    "D" if self.is_sym('(') || self.is_sym('^') => {
                        let mut p = 1;
                        if self.is_sym('^') {
                            self.i += 1;
                            let pos = self.pos();
                            p = self.int()?;
                            if p < 0 {
                                return err(pos, "negative derivative order");
                            }
                        }
                        self.expect_sym('(')?;
                        let saved = std::mem::replace(&mut self.in_colon, 0);
                        let inner = self.sum()?;
                        self.in_colon = saved;
                        self.expect_sym(')')?;
                        Ok(inner.d(p as u32))
                    }
                    _ => Ok(Expr::Gen(name)),
                }
            }
            Tok::Sym('(') => {
                self.i += 1;
                let saved = std::mem::replace(&mut self.in_colon, 0);
                let inner = self.sum()?;
                self.in_colon = saved;
                self.expect_sym(')')?;
                Ok(inner)
            }
            Tok::Sym(':') if self.in_colon == 0 => {
                self.i += 1;
                self.in_colon += 1;
                let mut items = Vec::new();
                while !self.is_sym(':') {
                    if self.peek().is_none() {
                        return err(t.pos, "unclosed `:`");
                    }
                    items.push(self.power()?);
                }
                self.i += 1;
                self.in_colon -= 1;
                if items.is_empty() {
                    return err(t.pos, "empty normal ordering");
                }
                Ok(Expr::no(items))
            }
            _ => err(t.pos, "expected an operand"),
        }
    }
}

fn negate(e: Expr) -> Expr {
    match fold(&e) {
        Some(c) => Expr::Scalar(c.neg()),
        None => Expr::Neg(Box::new(e)),
    }
}

fn times(a: Expr, b: Expr) -> Expr {
    match (fold(&a), fold(&b)) {
        (Some(x), Some(y)) => Expr::Scalar(x.mul(&y)),
        _ => Expr::Scaled(Box::new(a), Box::new(b)),
    }
}

fn simplify(e: Expr) -> Expr {
    match fold(&e) {
        Some(c) => Expr::Scalar(c),
        None => e,
    }
}

/// Parses an expression; generator names are resolved later by `normal_form`.
pub fn parse_expression(text: &str) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, i: 0, end: text.len(), in_colon: 0 };
    let e = p.sum()?;
    if p.i < p.toks.len() {
        return err(p.pos(), "unexpected trailing input");
    }
    Ok(e)
}

/// Rational number `p`, `-p` or `p/q`.
pub fn parse_rat(text: &str) -> Result<Rat, ParseError> {
    let t = text.trim();
    let (num, den) = match t.split_once('/') {
        Some((a, b)) => (a.trim(), b.trim()),
        None => (t, "1"),
    };
    let n: BigInt = num.parse().or_else(|_| err(0, format!("`{}` is not a rational number", text)))?;
    let d: BigInt = den.parse().or_else(|_| err(t.find('/').unwrap_or(0) + 1, format!("`{}` is not a rational number", text)))?;
    if d.is_zero() {
        return err(0, "zero denominator");
    }
    Ok(Rat::new(n, d))
}

fn wrap(e: &Expr) -> String {
    let s = render_expr(e);
    match e {
        Expr::Gen(_) | Expr::Derivative(..) | Expr::NormalOrder(_) => s,
        Expr::Scalar(c) if c.to_string().chars().all(|ch| ch.is_ascii_alphanumeric()) => s,
        _ => format!("({})", s),
    }
}

/// Text that `parse_expression` reads back as the same tree.
pub fn render_expr(e: &Expr) -> String {
    match e {
        Expr::Vacuum => "1".to_string(),
        Expr::Scalar(c) => {
            let s = c.to_string();
            if c.is_zero() || s.chars().all(|ch| ch.is_ascii_alphanumeric()) {
                s
            } else {
                format!("({})", s)
            }
        }
        Expr::Gen(g) => g.clone(),
        Expr::InvPower(g, n) => format!("{}^-{}", g, n),
        Expr::Derivative(a, p) => {
            if *p == 1 {
                format!("D({})", render_expr(a))
            } else {
                format!("D^{}({})", p, render_expr(a))
            }
        }
        Expr::NormalOrder(items) => {
            // a bare inner `:` would close the outer product
            let item = |x: &Expr| if matches!(x, Expr::NormalOrder(_)) { format!("({})", render_expr(x)) } else { wrap(x) };
            format!(":{}:", items.iter().map(item).collect::<Vec<_>>().join(" "))
        }
        Expr::Power(a, n) => format!("{}^{}", wrap(a), n),
        Expr::Product(a, n, b) => format!("{} _({}) {}", wrap(a), n, wrap(b)),
        Expr::Sum(items) => items.iter().map(wrap).collect::<Vec<_>>().join(" + "),
        Expr::Neg(a) => format!("-{}", wrap(a)),
        Expr::Scaled(a, b) => format!("{}*{}", wrap(a), wrap(b)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::rat;

    #[test]
    fn j_field() {
        let e = parse_expression("-(1/hb)*:x2 d2:").unwrap();
        let expected = Expr::Scaled(
            Box::new(Expr::Scalar(Scalar::hbar_pow(-1).neg())),
            Box::new(Expr::no(vec![Expr::gen("x2"), Expr::gen("d2")])),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn transition_image() {
        let e = parse_expression(":x1^2 d1: + 2*hb*D(x1)").unwrap();
        let expected = Expr::Sum(vec![
            Expr::no(vec![Expr::gen("x1").pow(2), Expr::gen("d1")]),
            Expr::Scaled(Box::new(Expr::Scalar(Scalar::hbar_pow(1).scale_int(2))), Box::new(Expr::gen("x1").d(1))),
        ]);
        assert_eq!(e, expected);
    }

    #[test]
    fn level_polynomials_and_signed_names() {
        let e = parse_expression("(2k+3)/3").unwrap();
        let two_k_three = Scalar::k().scale_int(2).add(&Scalar::from_int(3));
        assert_eq!(e, Expr::Scalar(two_k_three.scale(&rat(1, 3))));
        let g = parse_expression(":G+ G-: - G- _(2) G+").unwrap();
        assert!(matches!(g, Expr::Sum(ref v) if v.len() == 2));
        assert_eq!(parse_expression("hb^(1/2)").unwrap(), Expr::Scalar(Scalar::q_pow(1)));
        assert_eq!(parse_expression("x^-2").unwrap(), Expr::InvPower("x".into(), 2));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        assert_eq!(parse_expression(":x d").unwrap_err(), ParseError::Syntax { pos: 0, msg: "unclosed `:`".into() });
        assert!(matches!(parse_expression("x + * y"), Err(ParseError::Syntax { pos: 4, .. })));
        assert!(matches!(parse_expression("x / y"), Err(ParseError::Syntax { pos: 2, .. })));
        assert!(matches!(parse_expression("x $"), Err(ParseError::Syntax { pos: 2, .. })));
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rat("-3/2").unwrap(), rat(-3, 2));
        assert_eq!(parse_rat("7").unwrap(), rat(7, 1));
        assert!(parse_rat("1/0").is_err());
        assert!(parse_rat("k").is_err());
    }
}
