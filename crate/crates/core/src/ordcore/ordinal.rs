//! Ordinals below ω^ω in Cantor normal form.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// `Σ ω^e·c` with strictly decreasing exponents and positive coefficients.
/// The empty sum is `0`.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Ordinal {
    terms: SmallVec<[(u32, u64); 2]>,
}

impl Ordinal {
    pub fn zero() -> Self {
        Ordinal::default()
    }

    pub fn nat(n: u64) -> Self {
        let mut terms = SmallVec::new();
        if n > 0 {
            terms.push((0, n));
        }
        Ordinal { terms }
    }

    pub fn omega() -> Self {
        Ordinal::omega_pow(1)
    }

    /// `ω^e`.
    pub fn omega_pow(e: u32) -> Self {
        let mut terms = SmallVec::new();
        terms.push((e, 1));
        Ordinal { terms }
    }

    /// Builds from `(exponent, coefficient)` pairs in any order; zero
    /// coefficients are dropped and repeated exponents are summed.
    pub fn from_terms<I: IntoIterator<Item = (u32, u64)>>(it: I) -> Self {
        let mut v: Vec<(u32, u64)> = it.into_iter().filter(|t| t.1 > 0).collect();
        v.sort_by(|a, b| b.0.cmp(&a.0));
        let mut terms: SmallVec<[(u32, u64); 2]> = SmallVec::new();
        for (e, c) in v {
            match terms.last_mut() {
                Some(last) if last.0 == e => last.1 += c,
                _ => terms.push((e, c)),
            }
        }
        Ordinal { terms }
    }

    pub fn terms(&self) -> &[(u32, u64)] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.terms.iter().all(|t| t.0 == 0)
    }

    pub fn as_nat(&self) -> Option<u64> {
        match self.terms.as_slice() {
            [] => Some(0),
            [(0, c)] => Some(*c),
            _ => None,
        }
    }

    pub fn leading_exp(&self) -> Option<u32> {
        self.terms.first().map(|t| t.0)
    }

    /// Coefficient of `ω^e` (zero when absent).
    pub fn coef(&self, e: u32) -> u64 {
        self.terms
            .iter()
            .find(|t| t.0 == e)
            .map(|t| t.1)
            .unwrap_or(0)
    }

    /// The finite tail `n` in `… + n`.
    pub fn finite_part(&self) -> u64 {
        self.coef(0)
    }

    pub fn max_coef(&self) -> u64 {
        self.terms.iter().map(|t| t.1).max().unwrap_or(0)
    }

    pub fn is_limit(&self) -> bool {
        !self.is_zero() && self.finite_part() == 0
    }

    pub fn succ(&self) -> Self {
        self.add(&Ordinal::nat(1))
    }

    /// Ordinal sum `self + other`.
    pub fn add(&self, other: &Ordinal) -> Ordinal {
        let Some(&(e, c)) = other.terms.first() else {
            return self.clone();
        };
        let mut terms: SmallVec<[(u32, u64); 2]> = SmallVec::new();
        let mut lead = c;
        for &(se, sc) in &self.terms {
            if se > e {
                terms.push((se, sc));
            } else {
                if se == e {
                    lead += sc;
                }
                break;
            }
        }
        terms.push((e, lead));
        terms.extend(other.terms.iter().skip(1).copied());
        Ordinal { terms }
    }

    /// The unique `δ` with `self + δ = other`.
    pub fn left_sub(&self, other: &Ordinal) -> Result<Ordinal> {
        for (k, &(oe, oc)) in other.terms.iter().enumerate() {
            match self.terms.get(k) {
                None => return Ok(Ordinal::from_slice(&other.terms[k..])),
                Some(&(se, sc)) => {
                    if (se, sc) == (oe, oc) {
                        continue;
                    }
                    if se < oe {
                        return Ok(Ordinal::from_slice(&other.terms[k..]));
                    }
                    if se == oe && sc < oc {
                        let mut terms: SmallVec<[(u32, u64); 2]> = SmallVec::new();
                        terms.push((oe, oc - sc));
                        terms.extend(other.terms[k + 1..].iter().copied());
                        return Ok(Ordinal { terms });
                    }
                    return Err(Error::NotLessEq(self.to_string(), other.to_string()));
                }
            }
        }
        if self.terms.len() > other.terms.len() {
            return Err(Error::NotLessEq(self.to_string(), other.to_string()));
        }
        Ok(Ordinal::zero())
    }

    fn from_slice(s: &[(u32, u64)]) -> Ordinal {
        Ordinal {
            terms: SmallVec::from_slice(s),
        }
    }

    /// Coefficient vector `[c_{k-1}, …, c_0]` for exponents below `k`.
    /// Panics if the ordinal needs an exponent `≥ k`.
    pub fn digits(&self, k: u32) -> Vec<u64> {
        assert!(self.leading_exp().map_or(true, |e| e < k));
        (0..k).rev().map(|e| self.coef(e)).collect()
    }

    /// Inverse of [`Ordinal::digits`].
    pub fn from_digits(d: &[u64]) -> Ordinal {
        let k = d.len() as u32;
        Ordinal::from_terms(d.iter().enumerate().map(|(i, &c)| (k - 1 - i as u32, c)))
    }
}

impl Ord for Ordinal {
    fn cmp(&self, other: &Self) -> Ordering {
        for (a, b) in self.terms.iter().zip(other.terms.iter()) {
            let o = a.0.cmp(&b.0).then(a.1.cmp(&b.1));
            if o != Ordering::Equal {
                return o;
            }
        }
        self.terms.len().cmp(&other.terms.len())
    }
}

impl PartialOrd for Ordinal {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl From<u64> for Ordinal {
    fn from(n: u64) -> Self {
        Ordinal::nat(n)
    }
}

impl fmt::Display for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, &(e, c)) in self.terms.iter().enumerate() {
            if i > 0 {
                write!(f, "+")?;
            }
            match (e, c) {
                (0, c) => write!(f, "{c}")?,
                (1, 1) => write!(f, "w")?,
                (1, c) => write!(f, "w*{c}")?,
                (e, 1) => write!(f, "w^{e}")?,
                (e, c) => write!(f, "w^{e}*{c}")?,
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Ordinal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_nat(s: &str, whole: &str) -> Result<u64> {
    s.trim()
        .parse::<u64>()
        .map_err(|_| Error::Parse(format!("bad natural {s:?} in {whole:?}")))
}

impl FromStr for Ordinal {
    type Err = Error;

    /// Accepts sums like `w^2*3+w*1+5`; summands are combined with
    /// ordinal addition, so `1+w` reads as `w`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Err(Error::Parse("empty ordinal".into()));
        }
        let mut acc = Ordinal::zero();
        for part in s.split('+') {
            let part = part.trim();
            let term = if let Some(rest) = part.strip_prefix('w') {
                let (exp, coef) = match rest.split_once('*') {
                    Some((e, c)) => (e, parse_nat(c, s)?),
                    None => (rest, 1),
                };
                let exp = match exp.trim() {
                    "" => 1,
                    e => match e.strip_prefix('^') {
                        Some(n) => parse_nat(n, s)? as u32,
                        None => return Err(Error::Parse(format!("bad term {part:?}"))),
                    },
                };
                Ordinal::from_terms([(exp, coef)])
            } else {
                Ordinal::nat(parse_nat(part, s)?)
            };
            acc = acc.add(&term);
        }
        Ok(acc)
    }
}

impl Serialize for Ordinal {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Ordinal {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand used heavily in tests: `ord("w*2+1")`.
pub fn ord(s: &str) -> Ordinal {
    s.parse().expect("valid ordinal literal")
}
