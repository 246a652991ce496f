//! Pair catalogs, the permutations `f_p` sending each `B_p` onto `K`, words
//! mapping a set onto `K`, and escape certificates for generator words.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::engine::{EngineConfig, EngineHandle, EngineState, Task1Schedule, WitnessCert};
use super::Frame;
use crate::error::{Error, Result};
use crate::funcalc::Injection;
use crate::ordcore::{IntervalSet, Ordinal, OrderIso, PointSet};
use crate::termcalc::{
    escape_search, kappa_normalize, subsequence_cover, term_eval, word_eval_extended,
    word_eval_extended_inv, Atom, FnId, NoX, Term, TermContext,
};

/// Prefix length used for subset and infinitude certificates.
const CERTIFY: u64 = 512;

#[derive(Clone, Debug, Serialize)]
pub struct PairEntry {
    pub a: IntervalSet,
    pub b: PointSet,
    /// `false` for pairs added on demand by [`PairCatalog::admit`].
    pub requested: bool,
}

/// Pairs `⟨A, B⟩` with `B ∪ κ ⊆ A` and both `B` and `A∖B` infinite.
#[derive(Clone, Debug, Serialize)]
pub struct PairCatalog {
    pub kappa: IntervalSet,
    pairs: Vec<PairEntry>,
}

impl PairCatalog {
    pub fn new(kappa: IntervalSet) -> Self {
        PairCatalog { kappa, pairs: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[PairEntry] {
        &self.pairs
    }

    pub fn a_family(&self) -> Vec<IntervalSet> {
        self.pairs.iter().map(|p| p.a.clone()).collect()
    }

    /// Adds `⟨A ∪ κ ∪ carrier(B), B⟩`; rejects `B` finite or `A∖B` finite.
    pub fn request(&mut self, a: IntervalSet, b: PointSet) -> Result<usize> {
        let a = a.union(&self.kappa).union(b.carrier());
        self.push(a, b, true)
    }

    fn push(&mut self, a: IntervalSet, b: PointSet, requested: bool) -> Result<usize> {
        if !b.certified_infinite_in(&a, CERTIFY) {
            return Err(Error::Precondition(format!("{b} is not infinite")));
        }
        let rest = PointSet::minus(PointSet::Interval(a.clone()), b.clone());
        if !rest.certified_infinite_in(&a, CERTIFY) {
            return Err(Error::Precondition(format!("{a} minus {b} is finite")));
        }
        self.pairs.push(PairEntry { a, b, requested });
        Ok(self.pairs.len() - 1)
    }

    /// Index of a pair whose second set is `z`, adding `⟨κ, z⟩` when there is
    /// none. `z` must be an infinite, coinfinite subset of `κ`.
    pub fn admit(&mut self, z: PointSet) -> Result<usize> {
        if let Some(i) = self.pairs.iter().position(|p| p.b == z) {
            return Ok(i);
        }
        let kappa = PointSet::Interval(self.kappa.clone());
        if !z.certified_subset_of(&kappa, CERTIFY) {
            return Err(Error::Precondition(format!("{z} is not inside {}", self.kappa)));
        }
        self.push(self.kappa.clone(), z, false)
    }

    /// First pair whose `B` contains `x`.
    pub fn covering(&self, x: &PointSet) -> Option<usize> {
        self.pairs.iter().position(|p| x.certified_subset_of(&p.b, CERTIFY))
    }
}

fn push_unique(v: &mut Vec<IntervalSet>, s: IntervalSet) {
    if !v.contains(&s) {
        v.push(s);
    }
}

/// `{⋂𝒜′ ∩ a : 𝒜′ ⊆ 𝒜 finite}`, nonempty members only.
pub fn itrace(family: &[IntervalSet], a: &IntervalSet) -> Vec<IntervalSet> {
    let mut out = vec![a.clone()];
    for f in family {
        let next: Vec<IntervalSet> = out.iter().map(|s| s.intersection(f)).collect();
        for s in next {
            push_unique(&mut out, s);
        }
    }
    out.retain(|s| !s.is_empty());
    out.sort();
    out
}

fn trace(family: &[IntervalSet], c: &IntervalSet) -> Vec<IntervalSet> {
    let mut out = Vec::new();
    for f in family {
        push_unique(&mut out, f.intersection(c));
    }
    out.sort();
    out
}

/// The isomorphisms `ρ_{C₀,C₁}` between members of the itraces of
/// `A_0, …, A_upto` with equal order types that carry the trace of the
/// family on `C₀` onto its trace on `C₁`.
pub fn s_atoms_between(family: &[IntervalSet], upto: usize) -> Vec<OrderIso> {
    let mut cs = Vec::new();
    for a in family.iter().take(upto + 1) {
        for c in itrace(family, a) {
            push_unique(&mut cs, c);
        }
    }
    let mut out = Vec::new();
    for c0 in &cs {
        let t0 = trace(family, c0);
        for c1 in &cs {
            if c0.order_type() != c1.order_type() {
                continue;
            }
            let Ok(rho) = OrderIso::new(c0.clone(), c1.clone()) else { continue };
            let mut moved: Vec<IntervalSet> = t0.iter().map(|s| rho.image(s)).collect();
            moved.sort();
            moved.dedup();
            if moved == trace(family, c1) {
                out.push(rho);
            }
        }
    }
    out
}

/// The registry of permutations `f_p` with `f_p[B_p] = K`, one lazy engine
/// per catalog pair. Each engine sees the earlier `f`'s and the `𝒮`-atoms
/// of the catalog so far.
pub struct KeyLemmaBuild {
    pub catalog: PairCatalog,
    pub k: PointSet,
    pub y: Arc<dyn Injection>,
    pub ctx: TermContext,
    /// `fs[p]` names `f_p` in `ctx`.
    pub fs: Vec<FnId>,
    pub engines: Vec<EngineHandle>,
    pub budget: u64,
    pub canonical: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomogWord {
    pub word: Term,
    /// Catalog pairs of the generators, leftmost first.
    pub pairs: Vec<usize>,
    /// Whether the catalog had to grow.
    pub grew: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CoverCert {
    pub cover: Term,
    pub with_rho: Term,
    pub normalized: Term,
    pub value: Option<Ordinal>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IntransitiveCert {
    pub word: Term,
    pub covers: Vec<CoverCert>,
    pub alpha: Ordinal,
    pub y_alpha: Ordinal,
    pub word_value: Option<Ordinal>,
}

impl KeyLemmaBuild {
    pub fn new(catalog: PairCatalog, k: PointSet, y: Arc<dyn Injection>, budget: u64) -> Self {
        KeyLemmaBuild {
            catalog,
            k,
            y,
            ctx: TermContext::new(),
            fs: Vec::new(),
            engines: Vec::new(),
            budget,
            canonical: true,
        }
    }

    pub fn kappa(&self) -> &IntervalSet {
        &self.catalog.kappa
    }

    /// Creates engines for every catalog pair that has none yet.
    pub fn build_all(&mut self) -> Result<()> {
        while self.fs.len() < self.catalog.len() {
            self.build_next()?;
        }
        Ok(())
    }

    fn build_next(&mut self) -> Result<()> {
        let p = self.fs.len();
        let family = self.catalog.a_family();
        for rho in s_atoms_between(&family, p) {
            self.ctx.register_iso(rho);
        }
        let entry = &self.catalog.pairs()[p];
        let schedule = if self.canonical {
            Task1Schedule::canonical_for(&self.ctx)
        } else {
            Task1Schedule::DemandOnly
        };
        let state = EngineState::new(EngineConfig {
            name: format!("f{p}"),
            frame: Frame::split(entry.a.clone(), entry.b.clone(), self.k.clone()),
            kappa: self.catalog.kappa.clone(),
            y: self.y.clone(),
            ctx: self.ctx.clone(),
            budget: self.budget,
            schedule,
        })?;
        let handle = EngineHandle::new(state);
        let id = self.ctx.register_fun(
            format!("f{p}"),
            Arc::new(handle.clone()),
            Some(PointSet::Interval(entry.a.clone())),
        );
        self.fs.push(id);
        self.engines.push(handle);
        Ok(())
    }

    /// Catalog pair whose `f` is registered as `id`.
    pub fn pair_of(&self, id: FnId) -> Option<usize> {
        self.fs.iter().position(|&f| f == id)
    }

    /// All certificates so far, tagged with their engine's pair.
    pub fn certificates(&self) -> Vec<(usize, WitnessCert)> {
        let mut out = Vec::new();
        for (p, e) in self.engines.iter().enumerate() {
            e.with(|s| out.extend(s.certs().iter().cloned().map(|c| (p, c))));
        }
        out
    }

    /// Re-evaluates every certificate of every engine.
    pub fn verify_certificates(&self) -> Result<usize> {
        let mut n = 0;
        for e in &self.engines {
            n += e.with(|s| s.verify_certs())?;
        }
        Ok(n)
    }

    /// A word of extended generators mapping `x` onto `K`.
    pub fn homog_word(&mut self, x: &PointSet) -> Result<HomogWord> {
        self.build_all()?;
        if let Some(p) = self.catalog.pairs().iter().position(|e| e.b == *x) {
            return Ok(HomogWord {
                word: Term(vec![Atom::Sym(self.fs[p])]),
                pairs: vec![p],
                grew: false,
            });
        }
        let p = self
            .catalog
            .covering(x)
            .ok_or_else(|| Error::NotCoverable(format!("{x} lies in no catalog set")))?;
        let f = self.engines[p].clone();
        let (xs, ks) = (x.clone(), self.k.clone());
        let z = PointSet::predicate(
            self.catalog.kappa.clone(),
            format!("f{p}[{x}]"),
            Arc::new(move |v: &Ordinal| ks.contains(v) && f.apply_inv(v).is_some_and(|w| xs.contains(&w))),
        );
        let before = self.catalog.len();
        let q = self.catalog.admit(z)?;
        self.build_all()?;
        Ok(HomogWord {
            word: Term(vec![Atom::Sym(self.fs[q]), Atom::Sym(self.fs[p])]),
            pairs: vec![q, p],
            grew: self.catalog.len() > before,
        })
    }

    /// Checks `word[X] = K` on prefixes: the first `n` points of `x` land in
    /// `K` and the first `n` points of `K` come from `x`.
    pub fn check_onto_k(&self, word: &Term, x: &PointSet, n: u64) -> Result<()> {
        for p in x.prefix(n) {
            match word_eval_extended(word, &self.ctx, &p)? {
                Some(v) if self.k.contains(&v) => {}
                v => return Err(Error::Witness(format!("{p} ↦ {v:?} is not in K"))),
            }
        }
        for p in self.k.prefix(n) {
            match word_eval_extended_inv(word, &self.ctx, &p)? {
                Some(v) if x.contains(&v) => {}
                v => return Err(Error::Witness(format!("{p} has preimage {v:?} outside X"))),
            }
        }
        Ok(())
    }

    fn domain_of(&self, a: Atom) -> Result<IntervalSet> {
        let id = a.id().ok_or_else(|| Error::BadAtom(a.to_string()))?;
        let p = self
            .pair_of(id)
            .ok_or_else(|| Error::BadAtom(format!("{a} is not a catalog generator")))?;
        Ok(self.catalog.pairs()[p].a.clone())
    }

    /// Inserts `ρ* = id` on `A_i ∩ A_j` between adjacent generators.
    fn insert_rho(&mut self, t: &Term) -> Result<Term> {
        let mut atoms = Vec::with_capacity(2 * t.len());
        for (i, &a) in t.atoms().iter().enumerate() {
            if i > 0 {
                let prev = t.atoms()[i - 1];
                let meet = self.domain_of(prev)?.intersection(&self.domain_of(a)?);
                atoms.push(Atom::Sym(self.ctx.register_iso(OrderIso::identity(meet))));
            }
            atoms.push(a);
        }
        Ok(Term(atoms))
    }

    /// A pair `⟨α, y(α)⟩` with `α ≥ n` that the extended word misses,
    /// found against the normalized cover and verified on every stage of
    /// the rewrite.
    pub fn intransitive_cert(&mut self, word: &Term, n: &Ordinal, budget: u64) -> Result<IntransitiveCert> {
        self.build_all()?;
        for &a in word.atoms() {
            self.domain_of(a)?;
        }
        let cover = subsequence_cover(word)?;
        let mut covers = Vec::with_capacity(cover.len());
        for c in cover {
            let with_rho = self.insert_rho(&c)?;
            let kappa = self.catalog.kappa.clone();
            let normalized = kappa_normalize(&with_rho, &kappa, &mut self.ctx)?;
            covers.push(CoverCert {
                cover: c,
                with_rho,
                normalized,
                value: None,
            });
        }
        let hs: Vec<Term> = covers.iter().map(|c| c.normalized.clone()).collect();
        let alpha = escape_search(self.y.as_ref(), self.kappa().iter(), &hs, &NoX, &self.ctx, n, budget)?;
        let y_alpha = self
            .y
            .apply(&alpha)
            .ok_or_else(|| Error::Witness(format!("y undefined at {alpha}")))?;
        for c in &mut covers {
            let vals = [
                term_eval(&c.cover, &NoX, &alpha, &self.ctx)?,
                term_eval(&c.with_rho, &NoX, &alpha, &self.ctx)?,
            ];
            for v in &vals {
                if v.as_ref() == Some(&y_alpha) {
                    return Err(Error::Witness(format!("{} covers ⟨{alpha}, {y_alpha}⟩", c.cover)));
                }
            }
            c.value = vals[0].clone();
        }
        let word_value = word_eval_extended(word, &self.ctx, &alpha)?;
        if word_value.as_ref() == Some(&y_alpha) {
            return Err(Error::Witness(format!("{word} maps {alpha} to y({alpha})")));
        }
        Ok(IntransitiveCert {
            word: word.clone(),
            covers,
            alpha,
            y_alpha,
            word_value,
        })
    }
}
