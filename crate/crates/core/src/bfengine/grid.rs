//! Exhaustive check of the extension step on small finite universes.
//!
//! Partial injections are taken up to relabelling (one representative per
//! cycle-and-chain shape), every `⟨α, α*⟩`, extension point and term set of
//! a bounded shape is tried, and *every* admissible partner `η` (not just the
//! least) is checked to keep `⟨α, α*⟩` outside `⋃H[g']`.

use std::collections::BTreeSet;
use std::sync::Arc;

use serde::Serialize;

use super::{extend_step, ExtendMode, Frame};
use crate::error::{Error, Result};
use crate::funcalc::{FiniteInjection, FnInjection};
use crate::ordcore::{IntervalSet, Ordinal};
use crate::termcalc::{Atom, FnId, Term, TermContext};

const UNDEF: u8 = u8::MAX;

/// A partial injection on `{0, …, n-1}` as forward and backward tables.
#[derive(Clone, Debug)]
struct Small {
    fwd: Vec<u8>,
    bwd: Vec<u8>,
}

impl Small {
    fn empty(n: usize) -> Self {
        Small {
            fwd: vec![UNDEF; n],
            bwd: vec![UNDEF; n],
        }
    }

    fn set(&mut self, a: u8, b: u8) {
        self.fwd[a as usize] = b;
        self.bwd[b as usize] = a;
    }

    fn to_finite(&self) -> FiniteInjection {
        let pairs: Vec<(u64, u64)> = self
            .fwd
            .iter()
            .enumerate()
            .filter(|(_, &b)| b != UNDEF)
            .map(|(a, &b)| (a as u64, b as u64))
            .collect();
        FiniteInjection::from_nat_pairs(&pairs).expect("tables are injective")
    }
}

/// Letters: 0 = x, 1 = x⁻¹, 2 = f, 3 = f⁻¹ with `f(i) = i+1 mod n`.
fn eval(t: &[u8], g: &Small, n: u8, start: u8) -> Option<u8> {
    let mut cur = start;
    for &l in t.iter().rev() {
        cur = match l {
            0 => g.fwd[cur as usize],
            1 => g.bwd[cur as usize],
            2 => (cur + 1) % n,
            _ => (cur + n - 1) % n,
        };
        if cur == UNDEF {
            return None;
        }
    }
    Some(cur)
}

fn eval_inv(t: &[u8], g: &Small, n: u8, start: u8) -> Option<u8> {
    let mut cur = start;
    for &l in t.iter() {
        cur = match l {
            0 => g.bwd[cur as usize],
            1 => g.fwd[cur as usize],
            2 => (cur + n - 1) % n,
            _ => (cur + 1) % n,
        };
        if cur == UNDEF {
            return None;
        }
    }
    Some(cur)
}

fn covered(h: &[Vec<u8>], g: &Small, n: u8, a: u8, b: u8) -> bool {
    h.iter().any(|t| eval(t, g, n, a) == Some(b))
}

/// One representative per isomorphism type of partial injection on `n`
/// points: disjoint cycles and chains (a chain of one point is isolated).
pub fn partial_injection_classes(n: usize) -> Vec<Vec<(u64, u64)>> {
    fn partitions(n: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 0 {
            out.push(cur.clone());
            return;
        }
        for p in (1..=max.min(n)).rev() {
            cur.push(p);
            partitions(n - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    for k in 0..=n {
        let (mut cyc, mut ch) = (Vec::new(), Vec::new());
        partitions(k, k, &mut Vec::new(), &mut cyc);
        partitions(n - k, n - k, &mut Vec::new(), &mut ch);
        for c in &cyc {
            for p in &ch {
                let mut pairs = Vec::new();
                let mut base = 0u64;
                for &len in c {
                    let len = len as u64;
                    for i in 0..len {
                        pairs.push((base + i, base + (i + 1) % len));
                    }
                    base += len;
                }
                for &len in p {
                    let len = len as u64;
                    for i in 0..len.saturating_sub(1) {
                        pairs.push((base + i, base + i + 1));
                    }
                    base += len;
                }
                out.push(pairs);
            }
        }
    }
    out
}

fn words(alphabet: u8, max_len: usize) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<u8>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for w in &layer {
            for l in 0..alphabet {
                let mut v = w.clone();
                v.push(l);
                next.push(v);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

fn closure(ts: &[&Vec<u8>]) -> BTreeSet<Vec<u8>> {
    let mut out = BTreeSet::new();
    for t in ts {
        for mask in 0u32..(1 << t.len()) {
            out.insert(
                t.iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &l)| l)
                    .collect(),
            );
        }
    }
    out.insert(Vec::new());
    out
}

/// Subterm closures of at most `max_terms` words of length `≤ max_len`.
fn term_sets(alphabet: u8, max_len: usize, max_terms: usize) -> Vec<Vec<Vec<u8>>> {
    let ws = words(alphabet, max_len);
    let mut sets = BTreeSet::new();
    sets.insert(closure(&[]));
    for (i, a) in ws.iter().enumerate() {
        sets.insert(closure(&[a]));
        if max_terms >= 2 {
            for b in &ws[i + 1..] {
                sets.insert(closure(&[a, b]));
            }
        }
    }
    sets.into_iter().map(|s| s.into_iter().collect()).collect()
}

/// Outcome of [`lemma_grid`].
#[derive(Clone, Debug, Default, Serialize)]
pub struct GridReport {
    pub universes: usize,
    pub term_sets: usize,
    /// `(g, α, α*, ζ, mode, H)` combinations meeting the preconditions.
    pub instances: u64,
    /// Admissible `(instance, η)` extensions checked.
    pub extensions: u64,
    /// Instances with no admissible partner at all (possible only because
    /// the universe is finite).
    pub no_target: u64,
    /// Instances re-run through the general [`extend_step`].
    pub cross_checked: u64,
    pub counterexamples: Vec<String>,
}

fn to_term(w: &[u8], f: FnId) -> Term {
    Term(
        w.iter()
            .map(|&l| match l {
                0 => Atom::X,
                1 => Atom::XInv,
                2 => Atom::Sym(f),
                _ => Atom::SymInv(f),
            })
            .collect(),
    )
}

/// Runs the grid on universes of size `1..=max_universe`. With `with_fun`
/// the alphabet also contains a fixed cyclic shift `f` and its inverse.
/// Every `sample`-th instance is replayed through [`extend_step`] and must
/// pick the least admissible partner.
pub fn lemma_grid(
    max_universe: usize,
    max_len: usize,
    max_terms: usize,
    with_fun: bool,
    sample: u64,
) -> Result<GridReport> {
    let alphabet = if with_fun { 4 } else { 2 };
    let sets = term_sets(alphabet, max_len, max_terms);
    let mut rep = GridReport {
        universes: max_universe,
        term_sets: sets.len(),
        ..Default::default()
    };
    for n in 1..=max_universe {
        let nn = n as u8;
        let mut ctx = TermContext::new();
        let nu = n as u64;
        let shift = Arc::new(FnInjection::new(
            move |x: &Ordinal| x.as_nat().filter(|&v| v < nu).map(|v| Ordinal::nat((v + 1) % nu)),
            move |x: &Ordinal| x.as_nat().filter(|&v| v < nu).map(|v| Ordinal::nat((v + nu - 1) % nu)),
        ));
        let fid = ctx.register_fun("shift", shift, None);
        let frame = Frame::plain(IntervalSet::below(Ordinal::nat(nu)));
        for class in partial_injection_classes(n) {
            let mut g = Small::empty(n);
            for &(a, b) in &class {
                g.set(a as u8, b as u8);
            }
            for h in &sets {
                for a in 0..nn {
                    for a_star in 0..nn {
                        if covered(h, &g, nn, a, a_star) {
                            continue;
                        }
                        for zeta in 0..nn {
                            for dom_mode in [true, false] {
                                let free = if dom_mode { &g.fwd } else { &g.bwd };
                                if free[zeta as usize] != UNDEF {
                                    continue;
                                }
                                rep.instances += 1;
                                let mut avoid = BTreeSet::new();
                                for t in h {
                                    avoid.extend(eval(t, &g, nn, a));
                                    avoid.extend(eval_inv(t, &g, nn, a_star));
                                }
                                let mut least = None;
                                for eta in 0..nn {
                                    let taken = if dom_mode { &g.bwd } else { &g.fwd };
                                    if taken[eta as usize] != UNDEF || avoid.contains(&eta) {
                                        continue;
                                    }
                                    least.get_or_insert(eta);
                                    let mut g2 = g.clone();
                                    if dom_mode {
                                        g2.set(zeta, eta);
                                    } else {
                                        g2.set(eta, zeta);
                                    }
                                    rep.extensions += 1;
                                    if covered(h, &g2, nn, a, a_star) {
                                        rep.counterexamples.push(format!(
                                            "n={n} g={class:?} a={a} a*={a_star} zeta={zeta} \
                                             dom={dom_mode} eta={eta} H={h:?}"
                                        ));
                                    }
                                }
                                let Some(least) = least else {
                                    rep.no_target += 1;
                                    continue;
                                };
                                if sample > 0 && rep.instances % sample == 0 {
                                    rep.cross_checked += 1;
                                    let terms: Vec<Term> = h.iter().map(|w| to_term(w, fid)).collect();
                                    let mut gf = g.to_finite();
                                    let z = Ordinal::nat(zeta as u64);
                                    let mode = if dom_mode { ExtendMode::Domain(z) } else { ExtendMode::Range(z) };
                                    let got = extend_step(
                                        &terms,
                                        &mut gf,
                                        &frame,
                                        &Ordinal::nat(a as u64),
                                        &Ordinal::nat(a_star as u64),
                                        &mode,
                                        &ctx,
                                        u64::MAX,
                                    )?;
                                    let partner = if dom_mode { &got.1 } else { &got.0 };
                                    if partner.as_nat() != Some(least as u64) {
                                        return Err(Error::Witness(format!(
                                            "general step chose {partner}, tables chose {least}"
                                        )));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_counts() {
        // Σ_k p(k)·p(n-k) for n = 1..4.
        let counts: Vec<usize> = (1..=4).map(|n| partial_injection_classes(n).len()).collect();
        assert_eq!(counts, vec![2, 5, 10, 20]);
        for pairs in partial_injection_classes(5) {
            FiniteInjection::from_nat_pairs(&pairs).unwrap();
        }
    }

    #[test]
    fn small_grid_is_clean() {
        let rep = lemma_grid(4, 2, 2, true, 7).unwrap();
        assert!(rep.counterexamples.is_empty(), "{:?}", rep.counterexamples);
        assert!(rep.instances > 0 && rep.cross_checked > 0);
    }
}
