//! Countable sets that are not interval sets: filters over an interval-set
//! carrier with decidable membership, enumerated through the carrier's
//! canonical enumeration.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::{IntervalSet, Ordinal};
use crate::error::{Error, Result};

pub type MembershipTest = Arc<dyn Fn(&Ordinal) -> bool + Send + Sync>;

#[derive(Clone)]
pub enum PointSet {
    Interval(IntervalSet),
    /// Points of `base` whose finite part is `≡ r (mod modulus)` for some listed `r`.
    Residue {
        base: Box<PointSet>,
        modulus: u64,
        residues: Vec<u64>,
    },
    /// Points of `base` kept by a seeded hash with probability `per_mille/1000`.
    Hashed {
        base: Box<PointSet>,
        seed: u64,
        per_mille: u32,
    },
    Minus {
        base: Box<PointSet>,
        removed: Box<PointSet>,
    },
    /// Opaque membership test, e.g. the image of a set under a lazily built map.
    Predicate {
        carrier: IntervalSet,
        label: String,
        test: MembershipTest,
    },
}

/// SplitMix64 finalizer; the membership hash for [`PointSet::Hashed`].
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn hash_ordinal(seed: u64, x: &Ordinal) -> u64 {
    x.terms().iter().fold(mix64(seed), |h, &(e, c)| {
        mix64(h ^ mix64(((e as u64) << 48) ^ c))
    })
}

impl PointSet {
    pub fn naturals() -> Self {
        PointSet::Interval(IntervalSet::naturals())
    }

    /// `{x ∈ base : finite part of x ≡ r (mod m)}`.
    pub fn residue(base: PointSet, modulus: u64, residues: Vec<u64>) -> Self {
        PointSet::Residue {
            base: Box::new(base),
            modulus,
            residues,
        }
    }

    pub fn evens() -> Self {
        PointSet::residue(PointSet::naturals(), 2, vec![0])
    }

    pub fn odds() -> Self {
        PointSet::residue(PointSet::naturals(), 2, vec![1])
    }

    pub fn hashed(base: PointSet, seed: u64, per_mille: u32) -> Self {
        PointSet::Hashed {
            base: Box::new(base),
            seed,
            per_mille,
        }
    }

    pub fn minus(base: PointSet, removed: PointSet) -> Self {
        PointSet::Minus {
            base: Box::new(base),
            removed: Box::new(removed),
        }
    }

    pub fn predicate(carrier: IntervalSet, label: impl Into<String>, test: MembershipTest) -> Self {
        PointSet::Predicate {
            carrier,
            label: label.into(),
            test,
        }
    }

    pub fn contains(&self, x: &Ordinal) -> bool {
        match self {
            PointSet::Interval(s) => s.contains(x),
            PointSet::Residue {
                base,
                modulus,
                residues,
            } => base.contains(x) && residues.contains(&(x.finite_part() % modulus)),
            PointSet::Hashed {
                base,
                seed,
                per_mille,
            } => base.contains(x) && hash_ordinal(*seed, x) % 1000 < *per_mille as u64,
            PointSet::Minus { base, removed } => base.contains(x) && !removed.contains(x),
            PointSet::Predicate { carrier, test, .. } => carrier.contains(x) && test(x),
        }
    }

    /// An interval set containing this set.
    pub fn carrier(&self) -> &IntervalSet {
        match self {
            PointSet::Interval(s) => s,
            PointSet::Residue { base, .. }
            | PointSet::Hashed { base, .. }
            | PointSet::Minus { base, .. } => base.carrier(),
            PointSet::Predicate { carrier, .. } => carrier,
        }
    }

    pub fn as_interval(&self) -> Option<&IntervalSet> {
        match self {
            PointSet::Interval(s) => Some(s),
            _ => None,
        }
    }

    /// Members in the carrier's canonical enumeration order. Never ends for
    /// an infinite set; callers bound it.
    pub fn iter(&self) -> impl Iterator<Item = Ordinal> + '_ {
        let carrier = self.carrier();
        let bound = carrier.finite_size();
        (0u64..)
            .take_while(move |r| bound.map_or(true, |b| *r < b))
            .filter_map(move |r| carrier.enum_element(r))
            .filter(move |x| self.contains(x))
    }

    /// Members among the first `n` carrier points.
    pub fn prefix(&self, n: u64) -> Vec<Ordinal> {
        let carrier = self.carrier();
        (0..n)
            .filter_map(|r| carrier.enum_element(r))
            .filter(|x| self.contains(x))
            .collect()
    }

    /// Infinitude certificate within `universe`: exact for interval sets,
    /// otherwise "at least one member among positions `[p/2, p)` of the
    /// universe's canonical enumeration".
    pub fn certified_infinite_in(&self, universe: &IntervalSet, p: u64) -> bool {
        if let PointSet::Interval(s) = self {
            return s.intersection(universe).finite_size().is_none();
        }
        (p / 2..p)
            .filter_map(|r| universe.enum_element(r))
            .any(|x| self.contains(&x))
    }

    /// `self ⊆ other`, exact for interval sets and structural ancestry,
    /// otherwise checked on the first `p` carrier points.
    pub fn certified_subset_of(&self, other: &PointSet, p: u64) -> bool {
        if let (PointSet::Interval(a), PointSet::Interval(b)) = (self, other) {
            return a.is_subset(b);
        }
        if let PointSet::Interval(b) = other {
            if self.carrier().is_subset(b) {
                return true;
            }
        }
        if self.label() == other.label() {
            return true;
        }
        match self {
            PointSet::Residue { base, .. }
            | PointSet::Hashed { base, .. }
            | PointSet::Minus { base, .. }
                if base.certified_subset_of(other, p) =>
            {
                return true
            }
            _ => {}
        }
        self.prefix(p).iter().all(|x| other.contains(x))
    }

    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointSet::Interval(s) => write!(f, "{s}"),
            PointSet::Residue {
                base,
                modulus,
                residues,
            } => {
                let rs: Vec<String> = residues.iter().map(|r| r.to_string()).collect();
                write!(f, "({base})%{modulus}={}", rs.join(","))
            }
            PointSet::Hashed {
                base,
                seed,
                per_mille,
            } => write!(f, "({base})#{seed}@{per_mille}"),
            PointSet::Minus { base, removed } => write!(f, "({base})\\({removed})"),
            PointSet::Predicate { label, .. } => write!(f, "<{label}>"),
        }
    }
}

impl fmt::Debug for PointSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl PartialEq for PointSet {
    fn eq(&self, other: &Self) -> bool {
        self.label() == other.label()
    }
}

fn strip_parens(s: &str) -> &str {
    let s = s.trim();
    if s.starts_with('(') && s.ends_with(')') && matching_close(s) == Some(s.len() - 1) {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

fn matching_close(s: &str) -> Option<usize> {
    let mut depth = 0i32;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Splits at the last top-level occurrence of `sep`. Interval literals
/// `[a,b)` open with `[` and close with `)`, so both count toward depth.
fn split_top(s: &str, sep: char) -> Option<(&str, &str)> {
    let mut depth = 0i32;
    let mut found = None;
    for (i, ch) in s.char_indices() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            c if c == sep && depth == 0 => found = Some(i),
            _ => {}
        }
    }
    found.map(|i| (&s[..i], &s[i + sep.len_utf8()..]))
}

impl FromStr for PointSet {
    type Err = Error;

    /// Grammar: interval-set literals, `evens`, `odds`, `nat`, `S%m=r,…`,
    /// `S#seed@permille`, `S\T`, with parentheses for grouping.
    fn from_str(s: &str) -> Result<Self> {
        let s = strip_parens(s);
        match s {
            "nat" | "N" => return Ok(PointSet::naturals()),
            "evens" => return Ok(PointSet::evens()),
            "odds" => return Ok(PointSet::odds()),
            _ => {}
        }
        if let Some((a, b)) = split_top(s, '\\') {
            return Ok(PointSet::minus(a.parse()?, b.parse()?));
        }
        if let Some((a, b)) = split_top(s, '#') {
            let (seed, pm) = b
                .split_once('@')
                .ok_or_else(|| Error::Parse(format!("bad hashed set {s:?}")))?;
            let seed = seed.trim().parse().map_err(|_| Error::Parse(s.into()))?;
            let pm = pm.trim().parse().map_err(|_| Error::Parse(s.into()))?;
            return Ok(PointSet::hashed(a.parse()?, seed, pm));
        }
        if let Some((a, b)) = split_top(s, '%') {
            let (m, rs) = b
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("bad residue set {s:?}")))?;
            let m: u64 = m.trim().parse().map_err(|_| Error::Parse(s.into()))?;
            if m == 0 {
                return Err(Error::Parse("modulus 0".into()));
            }
            let rs = rs
                .split(',')
                .map(|r| r.trim().parse::<u64>().map_err(|_| Error::Parse(s.into())))
                .collect::<Result<Vec<_>>>()?;
            return Ok(PointSet::residue(a.parse()?, m, rs));
        }
        Ok(PointSet::Interval(s.parse()?))
    }
}

impl Serialize for PointSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for PointSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordcore::{iset, ord};

    #[test]
    fn membership() {
        let e = PointSet::evens();
        assert!(e.contains(&ord("4")));
        assert!(!e.contains(&ord("5")));
        assert!(!e.contains(&ord("w")));
        let t = PointSet::residue(PointSet::Interval(iset("[0,w*2)")), 3, vec![0]);
        assert!(t.contains(&ord("w+3")));
        assert_eq!(t.prefix(6).len(), 2);
    }

    #[test]
    fn parse_round_trip() {
        for s in ["evens", "([0,w))#7@500", "([0,w*2))\\(([0,w))%3=0,1)", "[0,5)|[w,w+1)"] {
            let p: PointSet = s.parse().unwrap();
            let again: PointSet = p.to_string().parse().unwrap();
            assert_eq!(p, again);
        }
    }

    #[test]
    fn infinitude_certificates() {
        let nat = IntervalSet::naturals();
        assert!(PointSet::evens().certified_infinite_in(&nat, 100));
        let finite = PointSet::minus(PointSet::naturals(), PointSet::Interval(iset("[3,w)")));
        assert!(!finite.certified_infinite_in(&nat, 100));
        assert!(!PointSet::Interval(iset("[0,9)")).certified_infinite_in(&nat, 100));
    }

    #[test]
    fn hashed_density_is_reasonable() {
        let h = PointSet::hashed(PointSet::naturals(), 11, 500);
        let n = h.prefix(2000).len();
        assert!((800..1200).contains(&n), "{n}");
    }
}
