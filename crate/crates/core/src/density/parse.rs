//! Text form of polynomial densities.
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*      divisor must be a nonzero constant
//! unary  := '-' unary | '+' unary | power
//! power  := atom ('^' integer)?
//! atom   := number | ident | '(' expr ')'
//! ident  := 'u' | 'u_x' | 'u_xx' | 'u_xxx' | 'u_xxxx'
//! number := digits ('.' digits)?
//! ```
//!
//! Decimal literals are read exactly (`0.5` is `5/10`), so with a rational
//! coefficient type `(1/3)*u^3` keeps its exact coefficient.

use crate::density::poly::{DensityPoly, Indeterminate, NU_MAX};
use crate::error::{Error, Result};
use crate::scalar::Coefficient;

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number { numer: i64, denom: i64 },
    Ident(Indeterminate),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

fn err(column: usize, message: impl Into<String>) -> Error {
    Error::Parse { column: column + 1, message: message.into() }
}

fn tokenize(src: &str) -> Result<Vec<(usize, Token)>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let start = i;
        match c {
            ' ' | '\t' | '\n' | '\r' => {
                i += 1;
                continue;
            }
            '+' => out.push((start, Token::Plus)),
            '-' => out.push((start, Token::Minus)),
            '*' => out.push((start, Token::Star)),
            '/' => out.push((start, Token::Slash)),
            '^' => out.push((start, Token::Caret)),
            '(' => out.push((start, Token::LParen)),
            ')' => out.push((start, Token::RParen)),
            '0'..='9' | '.' => {
                let mut numer: i64 = 0;
                let mut denom: i64 = 1;
                let mut seen_dot = false;
                let mut digits = 0;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    if chars[i] == '.' {
                        if seen_dot {
                            return Err(err(i, "second decimal point in number"));
                        }
                        seen_dot = true;
                    } else {
                        digits += 1;
                        if digits > 18 {
                            return Err(err(start, "numeric literal has too many digits"));
                        }
                        numer = numer * 10 + i64::from(chars[i] as u8 - b'0');
                        if seen_dot {
                            denom *= 10;
                        }
                    }
                    i += 1;
                }
                if digits == 0 {
                    return Err(err(start, "expected digits"));
                }
                out.push((start, Token::Number { numer, denom }));
                continue;
            }
            'u' => {
                i += 1;
                let mut order = 0u8;
                if i < chars.len() && chars[i] == '_' {
                    i += 1;
                    while i < chars.len() && chars[i] == 'x' {
                        order = order.saturating_add(1);
                        i += 1;
                    }
                    if order == 0 {
                        return Err(err(start, "expected 'x' after 'u_'"));
                    }
                }
                if i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    return Err(err(start, "unknown identifier"));
                }
                if order > NU_MAX {
                    return Err(err(start, format!("derivative order {order} exceeds the cap of {NU_MAX}")));
                }
                out.push((start, Token::Ident(Indeterminate::new(order)?)));
                continue;
            }
            other => return Err(err(start, format!("unexpected character '{other}'"))),
        }
        i += 1;
    }
    Ok(out)
}

struct Parser<C> {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
    _coeff: std::marker::PhantomData<C>,
}

impl<C: Coefficient> Parser<C> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn column(&self) -> usize {
        self.tokens.get(self.pos).map(|(c, _)| *c).unwrap_or(self.end)
    }

    fn next(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.pos).map(|(_, t)| t.clone());
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<DensityPoly<C>> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    acc = acc.add(&self.term()?);
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<DensityPoly<C>> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Some(Token::Star) => {
                    self.pos += 1;
                    acc = acc.mul(&self.unary()?);
                }
                Some(Token::Slash) => {
                    self.pos += 1;
                    let column = self.column();
                    let divisor = self.unary()?;
                    let c = divisor.as_constant().ok_or_else(|| err(column, "can only divide by a constant"))?;
                    if c.is_zero() {
                        return Err(err(column, "division by zero"));
                    }
                    acc = acc.scale(&(C::one() / c));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<DensityPoly<C>> {
        match self.peek() {
            Some(Token::Minus) => {
                self.pos += 1;
                Ok(self.unary()?.scale(&-C::one()))
            }
            Some(Token::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<DensityPoly<C>> {
        let base = self.atom()?;
        if let Some(Token::Caret) = self.peek() {
            self.pos += 1;
            let column = self.column();
            match self.next() {
                Some(Token::Number { numer, denom: 1 }) if (0..=64).contains(&numer) => Ok(base.pow(numer as u32)),
                _ => Err(err(column, "exponent must be an integer between 0 and 64")),
            }
        } else {
            Ok(base)
        }
    }

    fn atom(&mut self) -> Result<DensityPoly<C>> {
        let column = self.column();
        match self.next() {
            Some(Token::Number { numer, denom }) => Ok(DensityPoly::constant(C::from_ratio(numer, denom))),
            Some(Token::Ident(z)) => Ok(DensityPoly::var(z)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                let close = self.column();
                match self.next() {
                    Some(Token::RParen) => Ok(inner),
                    _ => Err(err(close, "expected ')'")),
                }
            }
            Some(t) => Err(err(column, format!("unexpected token {t:?}"))),
            None => Err(err(column, "unexpected end of input")),
        }
    }
}

/// Parses a density such as `0.5*u_x^2 - (1/3)*u^3`.
pub fn parse_density<C: Coefficient>(src: &str) -> Result<DensityPoly<C>> {
    let tokens = tokenize(src)?;
    if tokens.is_empty() {
        return Err(err(0, "empty density"));
    }
    let mut p = Parser { tokens, pos: 0, end: src.chars().count(), _coeff: std::marker::PhantomData };
    let out = p.expr()?;
    if p.pos < p.tokens.len() {
        return Err(err(p.column(), "trailing input"));
    }
    Ok(out)
}
