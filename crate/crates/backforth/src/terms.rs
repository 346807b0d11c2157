//! Terms denoting countable linear orders: finite orders, ω, the dense order
//! η, sums, and products with a restricted right factor.
//!
//! A product A·B means B copies of A ordered by B (the usual anti-lexical
//! convention), and the right factor is limited to the shapes the rewrite
//! system in `normal` knows how to eliminate: a finite order, ω, η, or 1+η.
//! The parser enforces the restriction, so downstream code can match on
//! those four shapes without a catch-all.
//!
//! The concrete grammar is `sum := prod ('+' prod)*`, `prod := atom ('*'
//! atom)*`, `atom := nat | 'w' ['^' atom] | 'eta' | '(' term ')'`, with `w^k`
//! elaborated into a left-nested chain of ω-factors. Exponents must be
//! finite and at most 10000.

use std::fmt;

use thiserror::Error;

pub const MAX_EXPONENT: u64 = 10_000;
const MAX_PAREN_DEPTH: u32 = 256;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum OrderTerm {
    Fin(u64),
    Omega,
    Eta,
    Sum(Vec<OrderTerm>),
    Prod(Box<OrderTerm>, Box<OrderTerm>),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TermError {
    #[error("parse error at byte {pos}: {msg}")]
    Parse { pos: usize, msg: String },
    #[error("unsupported right factor {0:?}: products may only be by a finite order, w, eta, or 1+eta")]
    UnsupportedRightFactor(String),
    #[error("exponent {0:?} is not a finite number")]
    ExponentNotFinite(String),
    #[error("exponent {0} exceeds the limit of {MAX_EXPONENT}")]
    ExponentTooLarge(u64),
    #[error("expected a pure ordinal term, got {0:?}")]
    NotAnOrdinal(String),
}

impl OrderTerm {
    /// 1 + η, the only compound right factor products accept.
    pub fn one_plus_eta() -> OrderTerm {
        OrderTerm::Sum(vec![OrderTerm::Fin(1), OrderTerm::Eta])
    }

    /// ω^k as a left-nested product chain; ω^0 is the one-point order.
    pub fn omega_power(k: u64) -> OrderTerm {
        if k == 0 {
            return OrderTerm::Fin(1);
        }
        let mut t = OrderTerm::Omega;
        for _ in 1..k {
            t = OrderTerm::Prod(Box::new(t), Box::new(OrderTerm::Omega));
        }
        t
    }

    /// Syntactically η-free, hence denoting an ordinal.
    pub fn is_ordinal(&self) -> bool {
        match self {
            OrderTerm::Fin(_) | OrderTerm::Omega => true,
            OrderTerm::Eta => false,
            OrderTerm::Sum(parts) => parts.iter().all(|p| p.is_ordinal()),
            OrderTerm::Prod(a, b) => a.is_ordinal() && b.is_ordinal(),
        }
    }

    /// The denoted order when it is finite.
    pub fn eval_finite(&self) -> Option<u64> {
        match self {
            OrderTerm::Fin(n) => Some(*n),
            OrderTerm::Omega | OrderTerm::Eta => None,
            OrderTerm::Sum(parts) => {
                let mut total = 0u64;
                for p in parts {
                    total = total.checked_add(p.eval_finite()?)?;
                }
                Some(total)
            }
            OrderTerm::Prod(a, b) => a.eval_finite()?.checked_mul(b.eval_finite()?),
        }
    }

    fn right_factor_ok(t: &OrderTerm) -> bool {
        matches!(t, OrderTerm::Fin(_) | OrderTerm::Omega | OrderTerm::Eta)
            || *t == OrderTerm::one_plus_eta()
    }

    /// Check the right-factor restriction everywhere in the term.
    pub fn validate(&self) -> Result<(), TermError> {
        match self {
            OrderTerm::Fin(_) | OrderTerm::Omega | OrderTerm::Eta => Ok(()),
            OrderTerm::Sum(parts) => parts.iter().try_for_each(|p| p.validate()),
            OrderTerm::Prod(a, b) => {
                a.validate()?;
                if !Self::right_factor_ok(b) {
                    return Err(TermError::UnsupportedRightFactor(b.to_string()));
                }
                Ok(())
            }
        }
    }
}

/// Construct A·(1+η), the dense stretching of an ordinal. The argument must
/// be a pure ordinal term.
pub fn harrison(a: &OrderTerm) -> Result<OrderTerm, TermError> {
    if !a.is_ordinal() {
        return Err(TermError::NotAnOrdinal(a.to_string()));
    }
    a.validate()?;
    Ok(OrderTerm::Prod(
        Box::new(a.clone()),
        Box::new(OrderTerm::one_plus_eta()),
    ))
}

impl fmt::Display for OrderTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OrderTerm::Fin(n) => write!(f, "{n}"),
            OrderTerm::Omega => write!(f, "w"),
            OrderTerm::Eta => write!(f, "eta"),
            OrderTerm::Sum(parts) => {
                if parts.is_empty() {
                    return write!(f, "0");
                }
                for (i, p) in parts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "+")?;
                    }
                    match p {
                        OrderTerm::Sum(_) => write!(f, "({p})")?,
                        _ => write!(f, "{p}")?,
                    }
                }
                Ok(())
            }
            OrderTerm::Prod(_, _) => {
                // flatten the left spine, compress a leading run of ω factors
                let mut spine = Vec::new();
                let mut cur = self;
                while let OrderTerm::Prod(a, b) = cur {
                    spine.push(b.as_ref());
                    cur = a;
                }
                spine.push(cur);
                spine.reverse();
                let omegas = spine
                    .iter()
                    .take_while(|t| ***t == OrderTerm::Omega)
                    .count();
                let mut first = true;
                let mut emit = |f: &mut fmt::Formatter<'_>, s: &str| {
                    let sep = if first { "" } else { "*" };
                    first = false;
                    write!(f, "{sep}{s}")
                };
                if omegas >= 2 {
                    emit(f, &format!("w^{omegas}"))?;
                } else if omegas == 1 {
                    emit(f, "w")?;
                }
                for t in &spine[omegas..] {
                    match t {
                        OrderTerm::Sum(_) | OrderTerm::Prod(_, _) => emit(f, &format!("({t})"))?,
                        _ => emit(f, &t.to_string())?,
                    }
                }
                Ok(())
            }
        }
    }
}

/// Seeded random term for corpus generation. Every product it builds has a
/// permitted right factor, so the result always validates.
pub fn random_term(rng: &mut impl rand_core::RngCore, depth: u32) -> OrderTerm {
    let leaf = |rng: &mut dyn rand_core::RngCore| match rng.next_u32() % 4 {
        0 => OrderTerm::Fin(rng.next_u32() as u64 % 5),
        1 => OrderTerm::Fin(1 + rng.next_u32() as u64 % 9),
        2 => OrderTerm::Omega,
        _ => OrderTerm::Eta,
    };
    if depth == 0 {
        return leaf(rng);
    }
    match rng.next_u32() % 8 {
        0 | 1 => leaf(rng),
        2 | 3 => {
            let k = 2 + rng.next_u32() % 3;
            OrderTerm::Sum((0..k).map(|_| random_term(rng, depth - 1)).collect())
        }
        4 => OrderTerm::Prod(
            Box::new(random_term(rng, depth - 1)),
            Box::new(OrderTerm::Fin(1 + rng.next_u32() as u64 % 5)),
        ),
        5 => OrderTerm::Prod(
            Box::new(random_term(rng, depth - 1)),
            Box::new(OrderTerm::Omega),
        ),
        6 => OrderTerm::Prod(
            Box::new(random_term(rng, depth - 1)),
            Box::new(OrderTerm::Eta),
        ),
        _ => OrderTerm::Prod(
            Box::new(random_term(rng, depth - 1)),
            Box::new(OrderTerm::one_plus_eta()),
        ),
    }
}

struct TermParser<'s> {
    text: &'s [u8],
    pos: usize,
}

impl<'s> TermParser<'s> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, TermError> {
        Err(TermError::Parse {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.text.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn parse_nat(&mut self) -> Result<u64, TermError> {
        let start = self.pos;
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let digits = std::str::from_utf8(&self.text[start..self.pos]).expect("ascii digits");
        digits
            .parse::<u64>()
            .or_else(|_| self.err(format!("number {digits:?} is out of range")))
    }

    fn parse_word(&mut self) -> String {
        let start = self.pos;
        while self.pos < self.text.len() && self.text[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        String::from_utf8_lossy(&self.text[start..self.pos]).into_owned()
    }

    fn parse_atom(&mut self, depth: u32) -> Result<OrderTerm, TermError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => Ok(OrderTerm::Fin(self.parse_nat()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let word = self.parse_word();
                match word.as_str() {
                    "eta" => Ok(OrderTerm::Eta),
                    "w" => {
                        if self.eat(b'^') {
                            let e = self.parse_atom(depth)?;
                            let k = e
                                .eval_finite()
                                .ok_or_else(|| TermError::ExponentNotFinite(e.to_string()))?;
                            if k > MAX_EXPONENT {
                                return Err(TermError::ExponentTooLarge(k));
                            }
                            Ok(OrderTerm::omega_power(k))
                        } else {
                            Ok(OrderTerm::Omega)
                        }
                    }
                    _ => {
                        self.pos -= word.len();
                        self.err(format!("unknown symbol {word:?}, expected w, eta, or a number"))
                    }
                }
            }
            Some(b'(') => {
                if depth >= MAX_PAREN_DEPTH {
                    return self.err("parentheses nested too deeply");
                }
                self.pos += 1;
                let t = self.parse_sum(depth + 1)?;
                if !self.eat(b')') {
                    return self.err("expected ')'");
                }
                Ok(t)
            }
            Some(c) => self.err(format!("unexpected character {:?}", c as char)),
            None => self.err("unexpected end of input"),
        }
    }

    fn parse_prod(&mut self, depth: u32) -> Result<OrderTerm, TermError> {
        let mut t = self.parse_atom(depth)?;
        while self.eat(b'*') {
            let rhs = self.parse_atom(depth)?;
            if !OrderTerm::right_factor_ok(&rhs) {
                return Err(TermError::UnsupportedRightFactor(rhs.to_string()));
            }
            t = OrderTerm::Prod(Box::new(t), Box::new(rhs));
        }
        Ok(t)
    }

    fn parse_sum(&mut self, depth: u32) -> Result<OrderTerm, TermError> {
        let mut parts = vec![self.parse_prod(depth)?];
        while self.eat(b'+') {
            parts.push(self.parse_prod(depth)?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().expect("nonempty")
        } else {
            OrderTerm::Sum(parts)
        })
    }
}

/// Parse the term grammar. The result always satisfies `validate`.
pub fn parse_term(text: &str) -> Result<OrderTerm, TermError> {
    let mut p = TermParser {
        text: text.as_bytes(),
        pos: 0,
    };
    let t = p.parse_sum(0)?;
    p.skip_ws();
    if p.pos != p.text.len() {
        return p.err("trailing input after the term");
    }
    Ok(t)
}
