//! Generators and oracles shared by the integration tests.
#![allow(dead_code)]

use homperm::ordcore::{IntervalSet, Ordinal};
use rand::Rng;

/// An ordinal below `ω^k` with coefficients below `c`.
pub fn rand_ordinal<R: Rng>(rng: &mut R, k: u32, c: u64) -> Ordinal {
    Ordinal::from_terms((0..k).rev().map(|e| (e, rng.gen_range(0..c))).filter(|t| t.1 > 0))
}

/// Interval lengths that later sets are laid out with; every layout of
/// the same lengths has the same order type.
pub fn rand_lengths<R: Rng>(rng: &mut R, pieces: usize) -> Vec<Ordinal> {
    (0..pieces)
        .map(|_| {
            let l = rand_ordinal(rng, 2, 3);
            if l.is_zero() {
                Ordinal::nat(1)
            } else {
                l
            }
        })
        .collect()
}

/// Lays out `lengths` left to right with random gaps, staying below `ω³`.
pub fn layout<R: Rng>(rng: &mut R, lengths: &[Ordinal]) -> IntervalSet {
    let mut cur = rand_ordinal(rng, 3, 2);
    let mut ivs = Vec::new();
    for l in lengths {
        let lo = cur.add(&rand_ordinal(rng, 2, 2));
        let hi = lo.add(l);
        ivs.push((lo, hi.clone()));
        cur = hi.add(&Ordinal::nat(rng.gen_range(1..3)));
    }
    IntervalSet::new(ivs)
}

/// Coefficient vector indexed by exponent.
pub fn digits(a: &Ordinal) -> Vec<u64> {
    let mut d = vec![0; a.terms().iter().map(|t| t.0 as usize + 1).max().unwrap_or(0)];
    for &(e, c) in a.terms() {
        d[e as usize] = c;
    }
    d
}

pub fn from_digits(d: &[u64]) -> Ordinal {
    Ordinal::from_terms(d.iter().enumerate().rev().filter(|t| *t.1 > 0).map(|(e, &c)| (e as u32, c)))
}

/// Cantor-normal-form addition on coefficient vectors: the terms of `a`
/// below the leading exponent of `b` are absorbed.
pub fn oracle_add(a: &[u64], b: &[u64]) -> Vec<u64> {
    let Some(e) = b.iter().rposition(|&c| c > 0) else {
        return a.to_vec();
    };
    let n = a.len().max(b.len());
    let mut out = vec![0; n];
    for i in 0..n {
        let (x, y) = (a.get(i).copied().unwrap_or(0), b.get(i).copied().unwrap_or(0));
        out[i] = match i.cmp(&e) {
            std::cmp::Ordering::Greater => x,
            std::cmp::Ordering::Equal => x + y,
            std::cmp::Ordering::Less => y,
        };
    }
    out
}

/// Membership straight from the interval list.
pub fn oracle_contains(s: &IntervalSet, x: &Ordinal) -> bool {
    s.intervals().iter().any(|(lo, hi)| lo <= x && x < hi)
}
