//! Words over registered functions and an indeterminate `x`.
//!
//! A term `⟨h₀, …, h_{n-1}⟩` evaluates as `h₀ ∘ … ∘ h_{n-1}`, so the rightmost
//! atom acts first. The empty term is the identity.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::funcalc::Injection;
use crate::ordcore::{IntervalSet, OrderIso, Ordinal, PointSet};

pub const DEFAULT_TERM_BOUND: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FnId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Atom {
    Sym(FnId),
    SymInv(FnId),
    X,
    XInv,
}

impl Atom {
    pub fn inverse(self) -> Atom {
        match self {
            Atom::Sym(i) => Atom::SymInv(i),
            Atom::SymInv(i) => Atom::Sym(i),
            Atom::X => Atom::XInv,
            Atom::XInv => Atom::X,
        }
    }

    pub fn is_x(self) -> bool {
        matches!(self, Atom::X | Atom::XInv)
    }

    pub fn id(self) -> Option<FnId> {
        match self {
            Atom::Sym(i) | Atom::SymInv(i) => Some(i),
            _ => None,
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Sym(i) => write!(f, "f{}", i.0),
            Atom::SymInv(i) => write!(f, "f{}^-1", i.0),
            Atom::X => write!(f, "x"),
            Atom::XInv => write!(f, "x^-1"),
        }
    }
}

impl FromStr for Atom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (body, inv) = match s.strip_suffix("^-1") {
            Some(b) => (b, true),
            None => (s, false),
        };
        let atom = if body == "x" {
            Atom::X
        } else if let Some(n) = body.strip_prefix('f') {
            Atom::Sym(FnId(n.parse().map_err(|_| Error::BadAtom(s.into()))?))
        } else {
            return Err(Error::BadAtom(s.into()));
        };
        Ok(if inv { atom.inverse() } else { atom })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Term(pub Vec<Atom>);

impl Term {
    pub fn empty() -> Self {
        Term(Vec::new())
    }

    pub fn x() -> Self {
        Term(vec![Atom::X])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// No `x` or `x⁻¹` occurs.
    pub fn is_f_term(&self) -> bool {
        !self.0.iter().any(|a| a.is_x())
    }

    /// `self ⌢ other`, which evaluates as `self ∘ other`.
    pub fn concat(&self, other: &Term) -> Term {
        Term(self.0.iter().chain(other.0.iter()).copied().collect())
    }

    /// The formal inverse: reversed, each atom inverted.
    pub fn inverse(&self) -> Term {
        Term(self.0.iter().rev().map(|a| a.inverse()).collect())
    }

    /// All subsequences, the term itself and the empty term included.
    pub fn subterms(&self) -> BTreeSet<Term> {
        let n = self.0.len();
        (0u64..1 << n)
            .map(|mask| {
                Term(
                    (0..n)
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| self.0[i])
                        .collect(),
                )
            })
            .collect()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "e");
        }
        let parts: Vec<String> = self.0.iter().map(|a| a.to_string()).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl FromStr for Term {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "e" {
            return Ok(Term::empty());
        }
        s.split('.').map(str::parse).collect::<Result<Vec<_>>>().map(Term)
    }
}

impl Serialize for Term {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Term {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum EntryKind {
    /// A member of `ℱ`: an injection, usually a permutation of `domain`.
    Fun,
    /// A member of `𝒮`: a canonical order isomorphism.
    Iso(OrderIso),
}

#[derive(Clone)]
pub struct Entry {
    pub name: String,
    pub kind: EntryKind,
    pub map: Arc<dyn Injection>,
    /// The set the function permutes, when known. Extended evaluation acts
    /// as the identity off this set.
    pub domain: Option<PointSet>,
}

/// Registry of the functions terms may mention. Cloning takes a snapshot.
#[derive(Clone, Default)]
pub struct TermContext {
    entries: Vec<Arc<Entry>>,
}

impl TermContext {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn register_fun(
        &mut self,
        name: impl Into<String>,
        map: Arc<dyn Injection>,
        domain: Option<PointSet>,
    ) -> FnId {
        let id = FnId(self.entries.len() as u32);
        self.entries.push(Arc::new(Entry {
            name: name.into(),
            kind: EntryKind::Fun,
            map,
            domain,
        }));
        id
    }

    /// Registers `iso` unless an equal one is present; returns its id.
    pub fn register_iso(&mut self, iso: OrderIso) -> FnId {
        if let Some(i) = self
            .entries
            .iter()
            .position(|e| e.kind == EntryKind::Iso(iso.clone()))
        {
            return FnId(i as u32);
        }
        let id = FnId(self.entries.len() as u32);
        self.entries.push(Arc::new(Entry {
            name: iso.to_string(),
            kind: EntryKind::Iso(iso.clone()),
            map: Arc::new(iso.clone()),
            domain: None,
        }));
        id
    }

    pub fn get(&self, id: FnId) -> Result<&Entry> {
        self.entries
            .get(id.0 as usize)
            .map(|e| e.as_ref())
            .ok_or(Error::Unregistered(id.0))
    }

    pub fn ids(&self) -> impl Iterator<Item = FnId> {
        (0..self.entries.len() as u32).map(FnId)
    }

    pub fn fun_ids(&self) -> Vec<FnId> {
        self.ids()
            .filter(|&i| self.entries[i.0 as usize].kind == EntryKind::Fun)
            .collect()
    }

    pub fn iso(&self, id: FnId) -> Result<Option<&OrderIso>> {
        Ok(match &self.get(id)?.kind {
            EntryKind::Iso(r) => Some(r),
            EntryKind::Fun => None,
        })
    }

    pub fn is_iso(&self, id: FnId) -> Result<bool> {
        Ok(self.iso(id)?.is_some())
    }

    /// One atom applied to `x`; `g` stands in for the indeterminate.
    pub fn apply_atom(&self, a: Atom, g: &dyn Injection, x: &Ordinal) -> Result<Option<Ordinal>> {
        Ok(match a {
            Atom::X => g.apply(x),
            Atom::XInv => g.apply_inv(x),
            Atom::Sym(i) => self.get(i)?.map.apply(x),
            Atom::SymInv(i) => self.get(i)?.map.apply_inv(x),
        })
    }

    /// Like [`apply_atom`](Self::apply_atom) for `ℱ`-atoms but through the
    /// identity extension: points outside the entry's domain stay fixed.
    pub fn apply_atom_extended(&self, a: Atom, x: &Ordinal) -> Result<Option<Ordinal>> {
        let id = a.id().ok_or_else(|| Error::BadAtom(a.to_string()))?;
        let e = self.get(id)?;
        if let Some(d) = &e.domain {
            if !d.contains(x) {
                return Ok(Some(x.clone()));
            }
        }
        self.apply_atom(a, &NoX, x)
    }
}

/// The indeterminate for `ℱ`-terms: never defined.
pub struct NoX;

impl Injection for NoX {
    fn apply(&self, _: &Ordinal) -> Option<Ordinal> {
        None
    }

    fn apply_inv(&self, _: &Ordinal) -> Option<Ordinal> {
        None
    }
}

/// Where an evaluation ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EvalOutcome {
    Value(Ordinal),
    /// Atom `atom` (at index `index` in the term) is undefined at `point`.
    Stuck {
        index: usize,
        atom: Atom,
        point: Ordinal,
    },
}

impl EvalOutcome {
    pub fn value(self) -> Option<Ordinal> {
        match self {
            EvalOutcome::Value(v) => Some(v),
            EvalOutcome::Stuck { .. } => None,
        }
    }
}

/// `t[g](α)` with the step where it gets stuck, if any.
pub fn term_trace(t: &Term, g: &dyn Injection, alpha: &Ordinal, ctx: &TermContext) -> Result<EvalOutcome> {
    let mut cur = alpha.clone();
    for (index, &atom) in t.0.iter().enumerate().rev() {
        match ctx.apply_atom(atom, g, &cur)? {
            Some(v) => cur = v,
            None => return Ok(EvalOutcome::Stuck { index, atom, point: cur }),
        }
    }
    Ok(EvalOutcome::Value(cur))
}

/// `t[g]⁻¹(β)`, evaluating left to right with every atom inverted. A stuck
/// report names the original (uninverted) atom.
pub fn term_trace_inv(t: &Term, g: &dyn Injection, beta: &Ordinal, ctx: &TermContext) -> Result<EvalOutcome> {
    let mut cur = beta.clone();
    for (index, &atom) in t.0.iter().enumerate() {
        match ctx.apply_atom(atom.inverse(), g, &cur)? {
            Some(v) => cur = v,
            None => return Ok(EvalOutcome::Stuck { index, atom, point: cur }),
        }
    }
    Ok(EvalOutcome::Value(cur))
}

pub fn term_eval(t: &Term, g: &dyn Injection, alpha: &Ordinal, ctx: &TermContext) -> Result<Option<Ordinal>> {
    term_trace(t, g, alpha, ctx).map(EvalOutcome::value)
}

pub fn term_eval_inv(t: &Term, g: &dyn Injection, beta: &Ordinal, ctx: &TermContext) -> Result<Option<Ordinal>> {
    term_trace_inv(t, g, beta, ctx).map(EvalOutcome::value)
}

/// Closure of `h` under subsequences, always containing the empty term.
pub fn subterm_closure<'a, I>(h: I, bound: usize) -> Result<BTreeSet<Term>>
where
    I: IntoIterator<Item = &'a Term>,
{
    let mut out = BTreeSet::new();
    out.insert(Term::empty());
    for t in h {
        if t.len() > bound {
            return Err(Error::TermTooLong { len: t.len(), bound });
        }
        out.extend(t.subterms());
    }
    Ok(out)
}

/// `⟨α, α*⟩ ∈ ⋃H[g]`.
pub fn graph_member<'a, I>(
    alpha: &Ordinal,
    alpha_star: &Ordinal,
    h: I,
    g: &dyn Injection,
    ctx: &TermContext,
) -> Result<bool>
where
    I: IntoIterator<Item = &'a Term>,
{
    for t in h {
        if term_eval(t, g, alpha, ctx)?.as_ref() == Some(alpha_star) {
            return Ok(true);
        }
    }
    Ok(false)
}

/// First candidate `α ≥ n` in `dom(y)` whose pair `⟨α, y(α)⟩` is outside
/// `⋃H[g]`, examining at most `budget` candidates.
pub fn escape_search<I>(
    y: &dyn Injection,
    candidates: I,
    h: &[Term],
    g: &dyn Injection,
    ctx: &TermContext,
    n: &Ordinal,
    budget: u64,
) -> Result<Ordinal>
where
    I: IntoIterator<Item = Ordinal>,
{
    let mut spent = 0u64;
    for alpha in candidates {
        if alpha < *n {
            continue;
        }
        if spent >= budget {
            break;
        }
        spent += 1;
        let Some(ya) = y.apply(&alpha) else { continue };
        if !graph_member(&alpha, &ya, h, g, ctx)? {
            return Ok(alpha);
        }
    }
    Err(Error::BudgetExhausted {
        spent,
        context: "escape search".into(),
    })
}

/// All subsequences of an `ℱ`-word. The graph of the word evaluated through
/// identity extensions lies inside the union of their plain evaluations.
pub fn subsequence_cover(word: &Term) -> Result<Vec<Term>> {
    if !word.is_f_term() {
        return Err(Error::BadAtom("x in a generator word".into()));
    }
    Ok(word.subterms().into_iter().collect())
}

/// The word evaluated with every generator replaced by its identity
/// extension.
pub fn word_eval_extended(word: &Term, ctx: &TermContext, x: &Ordinal) -> Result<Option<Ordinal>> {
    let mut cur = x.clone();
    for &a in word.0.iter().rev() {
        match ctx.apply_atom_extended(a, &cur)? {
            Some(v) => cur = v,
            None => return Ok(None),
        }
    }
    Ok(Some(cur))
}

/// Inverse of [`word_eval_extended`].
pub fn word_eval_extended_inv(word: &Term, ctx: &TermContext, x: &Ordinal) -> Result<Option<Ordinal>> {
    word_eval_extended(&word.inverse(), ctx, x)
}

fn atom_iso(ctx: &TermContext, a: Atom) -> Result<Option<OrderIso>> {
    let Some(id) = a.id() else { return Ok(None) };
    Ok(ctx.iso(id)?.map(|r| match a {
        Atom::SymInv(_) => r.inverse(),
        _ => r.clone(),
    }))
}

fn interval_domain(ctx: &TermContext, a: Atom) -> Result<Option<IntervalSet>> {
    let id = a.id().ok_or_else(|| Error::BadAtom(a.to_string()))?;
    Ok(ctx
        .get(id)?
        .domain
        .as_ref()
        .and_then(|d| d.as_interval().cloned()))
}

/// Rewrites an `ℱ ∪ 𝒮`-term into one whose graph agrees with `t`'s on
/// `κ × κ`: isomorphism atoms at either end are dropped, each run of
/// adjacent isomorphisms is fused into one, and the fused map is cut down to
/// what can pass between its neighbours. New isomorphisms are registered in
/// `ctx`.
pub fn kappa_normalize(t: &Term, kappa: &IntervalSet, ctx: &mut TermContext) -> Result<Term> {
    let mut isos = Vec::with_capacity(t.len());
    for &a in t.atoms() {
        if a.is_x() {
            return Err(Error::BadAtom(format!("{a} in an F-term")));
        }
        let r = atom_iso(ctx, a)?;
        match &r {
            Some(r) => {
                if !kappa.is_subset(r.source()) || r.image(kappa) != *kappa {
                    return Err(Error::Precondition(format!("{r} does not fix the base set")));
                }
            }
            None => {
                if let Some(d) = interval_domain(ctx, a)? {
                    if !kappa.is_subset(&d) {
                        return Err(Error::Precondition(format!(
                            "{a} permutes {d}, which misses part of the base set"
                        )));
                    }
                }
            }
        }
        isos.push(r);
    }
    let Some(first) = isos.iter().position(Option::is_none) else {
        return Ok(Term::empty());
    };
    let last = isos.iter().rposition(Option::is_none).expect("some F atom");
    let mut out = Vec::new();
    let mut i = first;
    while i <= last {
        if isos[i].is_none() {
            out.push(t.0[i]);
            i += 1;
            continue;
        }
        let mut j = i;
        while isos[j].is_some() {
            j += 1;
        }
        // Atoms i..j are isomorphisms between F atoms at i-1 (applied after)
        // and j (applied before). Fuse right to left.
        let mut fused = isos[j - 1].clone().expect("iso");
        for k in (i..j - 1).rev() {
            fused = OrderIso::compose(isos[k].as_ref().expect("iso"), &fused);
        }
        if let Some(d) = interval_domain(ctx, t.0[j])? {
            fused = fused.restrict(&d);
        }
        if let Some(d) = interval_domain(ctx, t.0[i - 1])? {
            fused = fused.corestrict(&d);
        }
        out.push(Atom::Sym(ctx.register_iso(fused)));
        i = j;
    }
    Ok(Term(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcalc::FiniteInjection;
    use crate::ordcore::{iset, ord};

    fn n(k: u64) -> Ordinal {
        Ordinal::nat(k)
    }

    fn t(s: &str) -> Term {
        s.parse().unwrap()
    }

    #[test]
    fn evaluation_examples() {
        let mut ctx = TermContext::new();
        let f = FiniteInjection::from_nat_pairs(&[(2, 0)]).unwrap();
        let id = ctx.register_fun("f", Arc::new(f), None);
        assert_eq!(id, FnId(0));
        let g = FiniteInjection::from_nat_pairs(&[(0, 1)]).unwrap();
        assert_eq!(term_eval(&t("x"), &g, &n(0), &ctx).unwrap(), Some(n(1)));
        assert_eq!(term_eval(&t("x.f0"), &g, &n(2), &ctx).unwrap(), Some(n(1)));
        assert_eq!(term_eval(&t("x^-1"), &g, &n(0), &ctx).unwrap(), None);
        assert_eq!(term_eval(&t("e"), &g, &n(9), &ctx).unwrap(), Some(n(9)));
        assert_eq!(term_eval_inv(&t("x.f0"), &g, &n(1), &ctx).unwrap(), Some(n(2)));
        assert!(matches!(
            term_eval(&t("f7"), &g, &n(0), &ctx),
            Err(Error::Unregistered(7))
        ));
    }

    #[test]
    fn stuck_reports() {
        let ctx = TermContext::new();
        let g = FiniteInjection::from_nat_pairs(&[(0, 1)]).unwrap();
        assert_eq!(
            term_trace(&t("x.x"), &g, &n(0), &ctx).unwrap(),
            EvalOutcome::Stuck { index: 0, atom: Atom::X, point: n(1) }
        );
        assert_eq!(
            term_trace_inv(&t("x.x"), &g, &n(1), &ctx).unwrap(),
            EvalOutcome::Stuck { index: 1, atom: Atom::X, point: n(0) }
        );
    }

    #[test]
    fn parse_display() {
        for s in ["f3.x.f1^-1.x^-1", "e", "x"] {
            assert_eq!(t(s).to_string(), s);
        }
        assert!("g1".parse::<Term>().is_err());
    }

    #[test]
    fn closure_examples() {
        let c = subterm_closure([&t("f0.f1")], 10).unwrap();
        let want: BTreeSet<Term> = ["e", "f0", "f1", "f0.f1"].into_iter().map(t).collect();
        assert_eq!(c, want);
        assert_eq!(subterm_closure(std::iter::empty(), 10).unwrap().len(), 1);
        let long = t("f0.f1.f2.f3.f4.f5");
        assert_eq!(subterm_closure([&long], 10).unwrap().len(), 64);
        let again: Vec<Term> = c.iter().cloned().collect();
        assert_eq!(subterm_closure(&again, 10).unwrap(), c);
        assert!(subterm_closure([&long], 5).is_err());
    }

    #[test]
    fn graph_membership() {
        let ctx = TermContext::new();
        let g = FiniteInjection::from_nat_pairs(&[(0, 1)]).unwrap();
        let h = [t("x")];
        assert!(graph_member(&n(0), &n(1), &h, &g, &ctx).unwrap());
        assert!(!graph_member(&n(0), &n(2), &h, &g, &ctx).unwrap());
    }

    #[test]
    fn escape_examples() {
        let ctx = TermContext::new();
        let y = FiniteInjection::from_pairs((0..50).map(|k| (n(k), n(k + 1)))).unwrap();
        let none = FiniteInjection::new();
        let cands = || (0..50).map(n);
        assert_eq!(escape_search(&y, cands(), &[], &none, &ctx, &n(7), 5).unwrap(), n(7));
        let r = escape_search(&y, cands(), &[t("x")], &y, &ctx, &n(0), 100);
        assert!(matches!(r, Err(Error::BudgetExhausted { .. })));
    }

    #[test]
    fn cover_of_two_swaps() {
        let mut ctx = TermContext::new();
        let dom = |a: u64, b: u64| Some(PointSet::Interval(IntervalSet::new([(n(a), n(b))])));
        let g0 = ctx.register_fun("g0", Arc::new(FiniteInjection::swap(n(0), n(1))), dom(0, 2));
        let g1 = ctx.register_fun("g1", Arc::new(FiniteInjection::swap(n(1), n(2))), dom(1, 3));
        let word = Term(vec![Atom::Sym(g0), Atom::Sym(g1)]);
        let cover = subsequence_cover(&word).unwrap();
        assert_eq!(cover.len(), 4);
        for k in 0..4 {
            let v = word_eval_extended(&word, &ctx, &n(k)).unwrap().unwrap();
            let hit = cover
                .iter()
                .any(|c| term_eval(c, &NoX, &n(k), &ctx).unwrap() == Some(v.clone()));
            assert!(hit, "{k}");
        }
        assert_eq!(subsequence_cover(&Term(vec![Atom::Sym(g0)])).unwrap().len(), 2);
    }

    #[test]
    fn normalization_strips_and_fuses() {
        let mut ctx = TermContext::new();
        let kappa = IntervalSet::naturals();
        let a = iset("[0,w*3)");
        let shift = FiniteInjection::from_pairs(
            (0..5).map(|k| (ord("w").add(&n(k)), ord("w*2").add(&n(k)))),
        )
        .unwrap();
        let mut f = FiniteInjection::identity_on((0..40).map(n));
        for (x, y) in shift.pairs() {
            f.insert(x.clone(), y.clone()).unwrap();
            f.insert(y.clone(), x.clone()).unwrap();
        }
        let f0 = ctx.register_fun("f", Arc::new(f), Some(PointSet::Interval(a.clone())));
        let ra = OrderIso::new(iset("[0,w*2)"), iset("[0,w)|[w*2,w*3)")).unwrap();
        let rb = OrderIso::new(iset("[0,w)|[w*2,w*3)"), iset("[0,w*2)")).unwrap();
        let (ia, ib) = (ctx.register_iso(ra.clone()), ctx.register_iso(rb.clone()));
        assert_eq!(kappa_normalize(&Term(vec![Atom::Sym(ia)]), &kappa, &mut ctx).unwrap(), Term::empty());
        let plain = Term(vec![Atom::Sym(f0), Atom::SymInv(f0)]);
        assert_eq!(kappa_normalize(&plain, &kappa, &mut ctx).unwrap(), plain);
        let tm = Term(vec![Atom::Sym(ia), Atom::Sym(f0), Atom::Sym(ia), Atom::Sym(ib), Atom::Sym(f0), Atom::Sym(ib)]);
        let s = kappa_normalize(&tm, &kappa, &mut ctx).unwrap();
        assert_eq!(s.len(), 3);
        for k in 0..100 {
            let x = n(k);
            let lhs = term_eval(&tm, &NoX, &x, &ctx).unwrap().filter(|v| kappa.contains(v));
            let rhs = term_eval(&s, &NoX, &x, &ctx).unwrap().filter(|v| kappa.contains(v));
            assert_eq!(lhs, rhs, "{k}");
        }
    }
}
