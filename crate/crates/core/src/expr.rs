//! Linear constraint expressions over qualified parameter names.
//!
//! Grammar (whitespace-insensitive except inside names):
//!
//! ```text
//! inequality := expr cmp expr
//! cmp        := "<" | "<=" | "≤" | ">" | ">=" | "≥" | "=" | "=="
//! expr       := term (("+" | "-") term)*
//! term       := unary ("*" unary)*
//! unary      := "-" unary | atom
//! atom       := number | name | "(" expr ")"
//! name       := [A-Za-z_][A-Za-z0-9_-]* ("." [A-Za-z_][A-Za-z0-9_-]*)*
//! ```
//!
//! Names may contain `-`, so a binary minus after a name needs whitespace
//! before its right operand: `a - b`, not `a-b`.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("expression `{source_text}`, offset {offset}: {message}")]
pub struct ExprError {
    pub source_text: String,
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Comparator {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Comparator {
    /// Exact comparison over binary64; NaN operands never satisfy it.
    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => lhs == rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Le => "<=",
            Comparator::Gt => ">",
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

impl FromStr for Comparator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "<" => Comparator::Lt,
            "<=" | "≤" => Comparator::Le,
            ">" => Comparator::Gt,
            ">=" | "≥" => Comparator::Ge,
            "=" | "==" => Comparator::Eq,
            other => return Err(format!("unknown comparator `{other}`")),
        })
    }
}

impl Serialize for Comparator {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.symbol())
    }
}

impl<'de> Deserialize<'de> for Comparator {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
}

/// Closed real interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ENTIRE: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn point(x: f64) -> Self {
        Interval { lo: x, hi: x }
    }

    // Endpoints are computed in round-to-nearest without outward rounding.
    // Rounding is monotone, so the result still contains the floating-point
    // value of the same expression for any operands in the input intervals,
    // which is exactly what the substitution checker computes.
    fn add(self, o: Interval) -> Interval {
        Interval::new(self.lo + o.lo, self.hi + o.hi).sanitize()
    }

    fn sub(self, o: Interval) -> Interval {
        Interval::new(self.lo - o.hi, self.hi - o.lo).sanitize()
    }

    fn neg(self) -> Interval {
        Interval::new(-self.hi, -self.lo)
    }

    fn mul(self, o: Interval) -> Interval {
        let corners = [
            self.lo * o.lo,
            self.lo * o.hi,
            self.hi * o.lo,
            self.hi * o.hi,
        ];
        if corners.iter().any(|c| c.is_nan()) {
            return Interval::ENTIRE;
        }
        let lo = corners.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = corners.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Interval::new(lo, hi)
    }

    fn sanitize(self) -> Interval {
        if self.lo.is_nan() || self.hi.is_nan() {
            Interval::ENTIRE
        } else {
            self
        }
    }
}

impl Expr {
    /// Polynomial degree; linear expressions have degree at most 1.
    pub fn degree(&self) -> u32 {
        match self {
            Expr::Num(_) => 0,
            Expr::Var(_) => 1,
            Expr::Neg(e) => e.degree(),
            Expr::Add(a, b) | Expr::Sub(a, b) => a.degree().max(b.degree()),
            Expr::Mul(a, b) => a.degree() + b.degree(),
        }
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables<'a>(&'a self, out: &mut BTreeSet<&'a str>) {
        match self {
            Expr::Num(_) => {}
            Expr::Var(name) => {
                out.insert(name);
            }
            Expr::Neg(e) => e.collect_variables(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.collect_variables(out);
                b.collect_variables(out);
            }
        }
    }

    /// Rewrite every variable name.
    pub fn rename(&self, f: &mut impl FnMut(&str) -> String) -> Expr {
        match self {
            Expr::Num(x) => Expr::Num(*x),
            Expr::Var(name) => Expr::Var(f(name)),
            Expr::Neg(e) => Expr::Neg(Box::new(e.rename(f))),
            Expr::Add(a, b) => Expr::Add(Box::new(a.rename(f)), Box::new(b.rename(f))),
            Expr::Sub(a, b) => Expr::Sub(Box::new(a.rename(f)), Box::new(b.rename(f))),
            Expr::Mul(a, b) => Expr::Mul(Box::new(a.rename(f)), Box::new(b.rename(f))),
        }
    }

    /// Evaluate by substitution; `None` if a variable is unbound.
    pub fn eval(&self, lookup: &impl Fn(&str) -> Option<f64>) -> Option<f64> {
        Some(match self {
            Expr::Num(x) => *x,
            Expr::Var(name) => lookup(name)?,
            Expr::Neg(e) => -e.eval(lookup)?,
            Expr::Add(a, b) => a.eval(lookup)? + b.eval(lookup)?,
            Expr::Sub(a, b) => a.eval(lookup)? - b.eval(lookup)?,
            Expr::Mul(a, b) => a.eval(lookup)? * b.eval(lookup)?,
        })
    }

    /// Interval enclosure of the floating-point value over the given
    /// variable ranges; `None` if a variable is unbound.
    pub fn eval_interval(&self, lookup: &impl Fn(&str) -> Option<Interval>) -> Option<Interval> {
        Some(match self {
            Expr::Num(x) => Interval::point(*x),
            Expr::Var(name) => lookup(name)?,
            Expr::Neg(e) => e.eval_interval(lookup)?.neg(),
            Expr::Add(a, b) => a.eval_interval(lookup)?.add(b.eval_interval(lookup)?),
            Expr::Sub(a, b) => a.eval_interval(lookup)?.sub(b.eval_interval(lookup)?),
            Expr::Mul(a, b) => a.eval_interval(lookup)?.mul(b.eval_interval(lookup)?),
        })
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Num(x) if x.is_sign_negative() => 3,
            Expr::Num(_) | Expr::Var(_) => 4,
        }
    }

    fn write_at(&self, f: &mut fmt::Formatter<'_>, min: u8) -> fmt::Result {
        if self.precedence() < min {
            f.write_str("(")?;
            self.write_at(f, 0)?;
            return f.write_str(")");
        }
        match self {
            Expr::Num(x) => write!(f, "{x:?}"),
            Expr::Var(name) => f.write_str(name),
            // `-3.0` would read back as a negative literal, not a negation.
            Expr::Neg(inner) => match inner.as_ref() {
                Expr::Num(x) if x.is_sign_positive() => write!(f, "-({x:?})"),
                _ => {
                    f.write_str("-")?;
                    inner.write_at(f, 3)
                }
            },
            Expr::Add(a, b) => {
                a.write_at(f, 1)?;
                f.write_str(" + ")?;
                b.write_at(f, 2)
            }
            Expr::Sub(a, b) => {
                a.write_at(f, 1)?;
                f.write_str(" - ")?;
                b.write_at(f, 2)
            }
            Expr::Mul(a, b) => {
                a.write_at(f, 2)?;
                f.write_str(" * ")?;
                b.write_at(f, 3)
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write_at(f, 0)
    }
}

/// `lhs cmp rhs` with linear sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub lhs: Expr,
    pub comparator: Comparator,
    pub rhs: Expr,
}

impl Inequality {
    pub fn parse(text: &str) -> Result<Self, ExprError> {
        let tokens = tokenize(text)?;
        let mut parser = ExprParser {
            text,
            tokens,
            pos: 0,
        };
        let lhs = parser.expr()?;
        let comparator = match parser.next() {
            Some((_, Token::Cmp(c))) => c,
            Some((offset, tok)) => {
                return Err(parser.error_at(offset, format!("expected a comparator, found {tok}")))
            }
            None => return Err(parser.error_at(text.len(), "expected a comparator".into())),
        };
        let rhs = parser.expr()?;
        if let Some((offset, tok)) = parser.next() {
            return Err(parser.error_at(offset, format!("unexpected {tok}")));
        }
        let inequality = Inequality {
            lhs,
            comparator,
            rhs,
        };
        if inequality.lhs.degree() > 1 || inequality.rhs.degree() > 1 {
            return Err(parser.error_at(0, "expression is not linear".into()));
        }
        if inequality.variables().is_empty() {
            return Err(parser.error_at(0, "expression references no parameter".into()));
        }
        Ok(inequality)
    }

    pub fn variables(&self) -> BTreeSet<&str> {
        let mut vars = self.lhs.variables();
        vars.extend(self.rhs.variables());
        vars
    }

    pub fn rename(&self, f: &mut impl FnMut(&str) -> String) -> Inequality {
        Inequality {
            lhs: self.lhs.rename(f),
            comparator: self.comparator,
            rhs: self.rhs.rename(f),
        }
    }

    /// `None` if a variable is unbound.
    pub fn holds(&self, lookup: &impl Fn(&str) -> Option<f64>) -> Option<bool> {
        Some(
            self.comparator
                .holds(self.lhs.eval(lookup)?, self.rhs.eval(lookup)?),
        )
    }

    /// True when no assignment within the ranges can satisfy the
    /// comparison. Sound, not complete: `false` does not prove
    /// satisfiability.
    pub fn interval_infeasible(&self, lookup: &impl Fn(&str) -> Option<Interval>) -> bool {
        let (Some(l), Some(r)) = (self.lhs.eval_interval(lookup), self.rhs.eval_interval(lookup))
        else {
            return false;
        };
        match self.comparator {
            Comparator::Lt => l.lo >= r.hi,
            Comparator::Le => l.lo > r.hi,
            Comparator::Gt => l.hi <= r.lo,
            Comparator::Ge => l.hi < r.lo,
            Comparator::Eq => l.hi < r.lo || r.hi < l.lo,
        }
    }
}

impl fmt::Display for Inequality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.comparator, self.rhs)
    }
}

impl Serialize for Inequality {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Inequality {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Inequality::parse(&text).map_err(serde::de::Error::custom)
    }
}

impl FromStr for Inequality {
    type Err = ExprError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Inequality::parse(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    Cmp(Comparator),
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Token::Num(x) => write!(f, "number {x:?}"),
            Token::Name(n) => write!(f, "name `{n}`"),
            Token::Plus => f.write_str("`+`"),
            Token::Minus => f.write_str("`-`"),
            Token::Star => f.write_str("`*`"),
            Token::LParen => f.write_str("`(`"),
            Token::RParen => f.write_str("`)`"),
            Token::Cmp(c) => write!(f, "`{c}`"),
        }
    }
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>, ExprError> {
    let err = |offset: usize, message: String| ExprError {
        source_text: text.to_string(),
        offset,
        message,
    };
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (offset, c) = chars[i];
        let is_name_start = |c: char| c.is_ascii_alphabetic() || c == '_';
        let is_name_char = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '-';
        match c {
            c if c.is_whitespace() => i += 1,
            '+' => {
                tokens.push((offset, Token::Plus));
                i += 1;
            }
            '-' => {
                tokens.push((offset, Token::Minus));
                i += 1;
            }
            '*' => {
                tokens.push((offset, Token::Star));
                i += 1;
            }
            '(' => {
                tokens.push((offset, Token::LParen));
                i += 1;
            }
            ')' => {
                tokens.push((offset, Token::RParen));
                i += 1;
            }
            '<' | '>' | '=' | '≤' | '≥' => {
                let two = chars.get(i + 1).map(|(_, n)| *n) == Some('=') && c != '≤' && c != '≥';
                let symbol: String = if two {
                    [c, '='].iter().collect()
                } else {
                    c.to_string()
                };
                let cmp = symbol.parse().map_err(|m| err(offset, m))?;
                tokens.push((offset, Token::Cmp(cmp)));
                i += if two { 2 } else { 1 };
            }
            c if c.is_ascii_digit() || c == '.' => {
                while i < chars.len() && (chars[i].1.is_ascii_digit() || chars[i].1 == '.') {
                    i += 1;
                }
                if i < chars.len() && matches!(chars[i].1, 'e' | 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && matches!(chars[j].1, '+' | '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].1.is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].1.is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let end = chars.get(i).map_or(text.len(), |(o, _)| *o);
                let literal = &text[offset..end];
                let value: f64 = literal
                    .parse()
                    .map_err(|_| err(offset, format!("bad number `{literal}`")))?;
                if !value.is_finite() {
                    return Err(err(offset, format!("number `{literal}` is not finite")));
                }
                if i < chars.len() && is_name_start(chars[i].1) {
                    return Err(err(chars[i].0, "a number cannot run into a name".into()));
                }
                tokens.push((offset, Token::Num(value)));
            }
            c if is_name_start(c) => {
                loop {
                    while i < chars.len() && is_name_char(chars[i].1) {
                        i += 1;
                    }
                    if i + 1 < chars.len() && chars[i].1 == '.' && is_name_start(chars[i + 1].1) {
                        i += 1;
                        continue;
                    }
                    break;
                }
                let end = chars.get(i).map_or(text.len(), |(o, _)| *o);
                let name = &text[offset..end];
                if name.ends_with('-') {
                    return Err(err(offset, format!("name `{name}` ends with `-`")));
                }
                tokens.push((offset, Token::Name(name.to_string())));
            }
            other => return Err(err(offset, format!("unexpected character `{other}`"))),
        }
    }
    Ok(tokens)
}

struct ExprParser<'a> {
    text: &'a str,
    tokens: Vec<(usize, Token)>,
    pos: usize,
}

impl ExprParser<'_> {
    fn error_at(&self, offset: usize, message: String) -> ExprError {
        ExprError {
            source_text: self.text.to_string(),
            offset,
            message,
        }
    }

    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn next(&mut self) -> Option<(usize, Token)> {
        let tok = self.tokens.get(self.pos).cloned();
        if tok.is_some() {
            self.pos += 1;
        }
        tok
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Some(Token::Plus) => {
                    self.pos += 1;
                    acc = Expr::Add(Box::new(acc), Box::new(self.term()?));
                }
                Some(Token::Minus) => {
                    self.pos += 1;
                    acc = Expr::Sub(Box::new(acc), Box::new(self.term()?));
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut acc = self.unary()?;
        while let Some(Token::Star) = self.peek() {
            self.pos += 1;
            acc = Expr::Mul(Box::new(acc), Box::new(self.unary()?));
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if let Some(Token::Minus) = self.peek() {
            self.pos += 1;
            // A minus directly before a literal is part of the literal.
            if let Some(Token::Num(x)) = self.peek() {
                let x = *x;
                self.pos += 1;
                return Ok(Expr::Num(-x));
            }
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.atom()
    }

    fn atom(&mut self) -> Result<Expr, ExprError> {
        match self.next() {
            Some((_, Token::Num(x))) => Ok(Expr::Num(x)),
            Some((_, Token::Name(n))) => Ok(Expr::Var(n)),
            Some((_, Token::LParen)) => {
                let inner = self.expr()?;
                match self.next() {
                    Some((_, Token::RParen)) => Ok(inner),
                    Some((offset, tok)) => {
                        Err(self.error_at(offset, format!("expected `)`, found {tok}")))
                    }
                    None => Err(self.error_at(self.text.len(), "expected `)`".into())),
                }
            }
            Some((offset, tok)) => Err(self.error_at(offset, format!("unexpected {tok}"))),
            None => Err(self.error_at(self.text.len(), "unexpected end of expression".into())),
        }
    }
}
