//! Normalized finite unions of half-open ordinal intervals.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Ordinal;
use crate::error::{Error, Result};

/// `[lo₀,hi₀) ∪ [lo₁,hi₁) ∪ …` kept sorted, disjoint and non-adjacent, so
/// equal sets have equal representations.
#[derive(Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct IntervalSet {
    ivs: Vec<(Ordinal, Ordinal)>,
}

impl IntervalSet {
    pub fn empty() -> Self {
        IntervalSet::default()
    }

    pub fn new<I: IntoIterator<Item = (Ordinal, Ordinal)>>(pairs: I) -> Self {
        let mut v: Vec<(Ordinal, Ordinal)> = pairs.into_iter().filter(|(a, b)| a < b).collect();
        v.sort();
        let mut ivs: Vec<(Ordinal, Ordinal)> = Vec::with_capacity(v.len());
        for (lo, hi) in v {
            match ivs.last_mut() {
                Some(last) if lo <= last.1 => {
                    if hi > last.1 {
                        last.1 = hi;
                    }
                }
                _ => ivs.push((lo, hi)),
            }
        }
        IntervalSet { ivs }
    }

    pub fn interval(lo: Ordinal, hi: Ordinal) -> Self {
        IntervalSet::new([(lo, hi)])
    }

    /// `[0, x)`.
    pub fn below(x: Ordinal) -> Self {
        IntervalSet::interval(Ordinal::zero(), x)
    }

    /// The naturals `[0, ω)`.
    pub fn naturals() -> Self {
        IntervalSet::below(Ordinal::omega())
    }

    pub fn singleton(x: Ordinal) -> Self {
        let s = x.succ();
        IntervalSet::interval(x, s)
    }

    pub fn intervals(&self) -> &[(Ordinal, Ordinal)] {
        &self.ivs
    }

    pub fn is_empty(&self) -> bool {
        self.ivs.is_empty()
    }

    pub fn min(&self) -> Option<&Ordinal> {
        self.ivs.first().map(|iv| &iv.0)
    }

    /// Supremum (`hi` of the last interval), `0` when empty.
    pub fn sup(&self) -> Ordinal {
        self.ivs.last().map(|iv| iv.1.clone()).unwrap_or_default()
    }

    pub fn contains(&self, x: &Ordinal) -> bool {
        self.locate(x).is_some()
    }

    fn locate(&self, x: &Ordinal) -> Option<usize> {
        let idx = self.ivs.partition_point(|iv| iv.1 <= *x);
        match self.ivs.get(idx) {
            Some(iv) if iv.0 <= *x => Some(idx),
            _ => None,
        }
    }

    pub fn union(&self, other: &IntervalSet) -> IntervalSet {
        IntervalSet::new(self.ivs.iter().chain(other.ivs.iter()).cloned())
    }

    pub fn intersection(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        let (mut i, mut j) = (0, 0);
        while i < self.ivs.len() && j < other.ivs.len() {
            let (a, b) = (&self.ivs[i], &other.ivs[j]);
            let lo = std::cmp::max(&a.0, &b.0);
            let hi = std::cmp::min(&a.1, &b.1);
            if lo < hi {
                out.push((lo.clone(), hi.clone()));
            }
            if a.1 < b.1 {
                i += 1;
            } else {
                j += 1;
            }
        }
        IntervalSet::new(out)
    }

    pub fn difference(&self, other: &IntervalSet) -> IntervalSet {
        let mut out = Vec::new();
        for (lo, hi) in &self.ivs {
            let mut cur = lo.clone();
            for (olo, ohi) in &other.ivs {
                if *ohi <= cur || olo >= hi {
                    continue;
                }
                if *olo > cur {
                    out.push((cur.clone(), olo.clone()));
                }
                if ohi > &cur {
                    cur = ohi.clone();
                }
                if cur >= *hi {
                    break;
                }
            }
            if cur < *hi {
                out.push((cur, hi.clone()));
            }
        }
        IntervalSet::new(out)
    }

    pub fn is_subset(&self, other: &IntervalSet) -> bool {
        self.difference(other).is_empty()
    }

    pub fn is_disjoint(&self, other: &IntervalSet) -> bool {
        self.intersection(other).is_empty()
    }

    /// Order type: the interval lengths summed left to right.
    pub fn order_type(&self) -> Ordinal {
        self.ivs.iter().fold(Ordinal::zero(), |acc, (lo, hi)| {
            acc.add(&lo.left_sub(hi).expect("lo < hi"))
        })
    }

    /// Number of elements as a natural, if finite.
    pub fn finite_size(&self) -> Option<u64> {
        self.order_type().as_nat()
    }

    /// The element at ordinal position `p` in increasing order.
    pub fn element_at(&self, p: &Ordinal) -> Result<Ordinal> {
        let mut start = Ordinal::zero();
        for (lo, hi) in &self.ivs {
            let len = lo.left_sub(hi)?;
            let end = start.add(&len);
            if *p < end {
                let delta = start.left_sub(p)?;
                return Ok(lo.add(&delta));
            }
            start = end;
        }
        Err(Error::OutOfRange {
            position: p.to_string(),
            order_type: start.to_string(),
        })
    }

    /// The ordinal position of `x`, inverse of [`IntervalSet::element_at`].
    pub fn position_of(&self, x: &Ordinal) -> Result<Ordinal> {
        let idx = self.locate(x).ok_or_else(|| Error::NotMember {
            point: x.to_string(),
            set: self.to_string(),
        })?;
        let before = IntervalSet {
            ivs: self.ivs[..idx].to_vec(),
        };
        Ok(before.order_type().add(&self.ivs[idx].0.left_sub(x)?))
    }

    /// Elements in increasing order starting at the minimum. Only reaches
    /// the first ω elements of each interval of infinite length.
    pub fn iter(&self) -> AmbientIter<'_> {
        AmbientIter {
            set: self,
            cur: self.ivs.first().map(|iv| (0, iv.0.clone())),
        }
    }

    fn digit_width(&self) -> u32 {
        self.ivs
            .iter()
            .flat_map(|(a, b)| [a, b])
            .filter_map(|o| o.leading_exp())
            .max()
            .unwrap_or(0)
            + 1
    }

    /// Index of `x` in the canonical ω-enumeration (see
    /// [`IntervalSet::enum_element`]).
    pub fn enum_index(&self, x: &Ordinal) -> Option<u64> {
        if !self.contains(x) {
            return None;
        }
        let t = self.order_type();
        if t <= Ordinal::omega() {
            return self.position_of(x).ok()?.as_nat();
        }
        let k = self.digit_width();
        let n = x.max_coef();
        let before_shell = if n == 0 { 0 } else { self.box_count(None, n - 1, k) };
        let in_shell = self.box_count(Some(x), n, k)
            - if n == 0 { 0 } else { self.box_count(Some(x), n - 1, k) };
        u64::try_from(before_shell + in_shell).ok()
    }

    /// Canonical enumeration of the set in order type at most ω.
    ///
    /// Sets of order type `≤ ω` are listed in increasing order. Larger sets
    /// are listed shell by shell, where shell `n` holds the elements whose
    /// largest Cantor-normal-form coefficient is `n`, each shell in
    /// increasing order. Every shell is finite, so this is a bijection onto
    /// an initial segment of ℕ.
    pub fn enum_element(&self, r: u64) -> Option<Ordinal> {
        let t = self.order_type();
        if t <= Ordinal::omega() {
            return self.element_at(&Ordinal::nat(r)).ok();
        }
        let k = self.digit_width();
        let r = r as u128;
        let mut hi_n: u64 = 1;
        while self.box_count(None, hi_n, k) <= r {
            hi_n = hi_n.checked_mul(2)?;
        }
        let mut lo_n: u64 = 0;
        // invariant: box(hi_n) > r; find the minimal such n.
        if self.box_count(None, 0, k) > r {
            hi_n = 0;
        } else {
            while hi_n - lo_n > 1 {
                let mid = lo_n + (hi_n - lo_n) / 2;
                if self.box_count(None, mid, k) > r {
                    hi_n = mid;
                } else {
                    lo_n = mid;
                }
            }
        }
        let n = hi_n;
        let j = r - if n == 0 { 0 } else { self.box_count(None, n - 1, k) };
        let shell_below = |z: &Ordinal| {
            self.box_count(Some(z), n, k)
                - if n == 0 { 0 } else { self.box_count(Some(z), n - 1, k) }
        };
        let mut digits = vec![0u64; k as usize];
        for pos in 0..k as usize {
            let (mut lo_d, mut hi_d) = (0u64, n);
            while lo_d < hi_d {
                let mid = lo_d + (hi_d - lo_d + 1) / 2;
                digits[pos] = mid;
                if shell_below(&Ordinal::from_digits(&digits)) <= j {
                    lo_d = mid;
                } else {
                    hi_d = mid - 1;
                }
            }
            digits[pos] = lo_d;
        }
        let x = Ordinal::from_digits(&digits);
        debug_assert!(self.contains(&x));
        Some(x)
    }

    /// `#{y ∈ self : y < bound, every coefficient of y ≤ n}`.
    fn box_count(&self, bound: Option<&Ordinal>, n: u64, k: u32) -> u128 {
        let mut total = 0u128;
        for (lo, hi) in &self.ivs {
            let top = match bound {
                Some(b) if b < hi => b,
                _ => hi,
            };
            if top <= lo {
                continue;
            }
            total += box_below(top, n, k) - box_below(lo, n, k);
        }
        total
    }
}

/// `#{v ∈ {0..n}^k : ordinal(v) < x}`.
fn box_below(x: &Ordinal, n: u64, k: u32) -> u128 {
    let base = n as u128 + 1;
    if x.leading_exp().map_or(false, |e| e >= k) {
        return base.saturating_pow(k);
    }
    let mut total = 0u128;
    for e in (0..k).rev() {
        let c = x.coef(e) as u128;
        let weight = base.saturating_pow(e);
        if c > n as u128 {
            return total + base * weight;
        }
        total += c * weight;
    }
    total
}

pub struct AmbientIter<'a> {
    set: &'a IntervalSet,
    cur: Option<(usize, Ordinal)>,
}

impl Iterator for AmbientIter<'_> {
    type Item = Ordinal;

    fn next(&mut self) -> Option<Ordinal> {
        let (idx, x) = self.cur.take()?;
        let nx = x.succ();
        self.cur = if nx < self.set.ivs[idx].1 {
            Some((idx, nx))
        } else {
            self.set.ivs.get(idx + 1).map(|iv| (idx + 1, iv.0.clone()))
        };
        Some(x)
    }
}

impl fmt::Display for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.ivs.is_empty() {
            return write!(f, "{{}}");
        }
        for (i, (lo, hi)) in self.ivs.iter().enumerate() {
            if i > 0 {
                write!(f, "|")?;
            }
            write!(f, "[{lo},{hi})")?;
        }
        Ok(())
    }
}

impl fmt::Debug for IntervalSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for IntervalSet {
    type Err = Error;

    /// Parses `[a,b)|[c,d)`; `{}` is the empty set.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "{}" || s.is_empty() {
            return Ok(IntervalSet::empty());
        }
        let mut pairs = Vec::new();
        for part in s.split('|') {
            let inner = part
                .trim()
                .strip_prefix('[')
                .and_then(|p| p.strip_suffix(')'))
                .ok_or_else(|| Error::Parse(format!("bad interval {part:?}")))?;
            let (a, b) = inner
                .split_once(',')
                .ok_or_else(|| Error::Parse(format!("bad interval {part:?}")))?;
            pairs.push((a.parse()?, b.parse()?));
        }
        Ok(IntervalSet::new(pairs))
    }
}

impl Serialize for IntervalSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for IntervalSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Shorthand for tests: `iset("[0,w)|[w*2,w*3)")`.
pub fn iset(s: &str) -> IntervalSet {
    s.parse().expect("valid interval-set literal")
}
