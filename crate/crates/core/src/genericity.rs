//! Scheduled density meeting in place of a generic filter, and the word
//! rewrites that push a group element down to a smaller universe.
//!
//! The run first builds a permutation `r` of `ω` that escapes every
//! scheduled finite set of base-group terms, then builds one lazily defined
//! permutation `g_ν` per round. Each `g_ν` sends `X_ν` onto `Y_ν` inside `Z_ν`
//! and meets density requirements: for a term set `H` over the registry so
//! far and a bound `M`, some `α ≥ M` has every `t ∈ H` defined and different
//! from `r(α)`.

use std::collections::BTreeSet;
use std::sync::{Arc, Mutex};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bfengine::{
    canonical_term_set, make_defined, pick_witness, unpair, witness_values, EngineConfig,
    EngineHandle, EngineState, Frame, Task1Schedule, DEFAULT_BUDGET,
};
use crate::error::{Error, Result};
use crate::funcalc::{Extended, FiniteInjection, Injection};
use crate::ordcore::{IntervalSet, Ordinal, PointSet};
use crate::termcalc::{subterm_closure, term_eval, Atom, FnId, Term, TermContext};

/// A member of `Q_ν`: a finite injection sending `X` into `Y` and `Z∖X`
/// into `Z∖Y`.
#[derive(Clone, Debug)]
pub struct Condition {
    pub x: PointSet,
    pub y: PointSet,
    pub z: IntervalSet,
    pub p: FiniteInjection,
}

impl Condition {
    pub fn new(x: PointSet, y: PointSet, z: IntervalSet) -> Result<Self> {
        let zs = PointSet::Interval(z.clone());
        for (name, s) in [("X", &x), ("Y", &y)] {
            if !s.certified_subset_of(&zs, 512) {
                return Err(Error::Precondition(format!("{name} = {s} is not inside {z}")));
            }
            let rest = PointSet::minus(zs.clone(), s.clone());
            if !rest.certified_infinite_in(&z, 512) {
                return Err(Error::Precondition(format!("{z} minus {s} is finite")));
            }
        }
        Ok(Condition {
            x,
            y,
            z,
            p: FiniteInjection::new(),
        })
    }

    pub fn frame(&self) -> Frame {
        Frame::split(self.z.clone(), self.x.clone(), self.y.clone())
    }

    pub fn respects_shape(&self) -> bool {
        self.p.pairs().all(|(a, b)| {
            self.z.contains(a) && self.z.contains(b) && self.x.contains(a) == self.y.contains(b)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DensityOutcome {
    pub alpha: Ordinal,
    pub r_alpha: Option<Ordinal>,
    pub terms: Vec<Term>,
    pub values: Vec<Option<Ordinal>>,
    pub extensions: Vec<(Ordinal, Ordinal)>,
}

/// Extends `cond` to a stronger condition and returns `α ≥ M` (a natural)
/// at which every term of the closure of `h` is defined and differs from
/// `r(α)`.
pub fn density_step(
    h: &[Term],
    cond: &mut Condition,
    m: u64,
    r: &dyn Injection,
    ctx: &TermContext,
    budget: u64,
) -> Result<DensityOutcome> {
    if h.is_empty() {
        let alpha = Ordinal::nat(m);
        return Ok(DensityOutcome {
            r_alpha: r.apply(&alpha),
            alpha,
            terms: Vec::new(),
            values: Vec::new(),
            extensions: Vec::new(),
        });
    }
    let terms: Vec<Term> = subterm_closure(h, usize::MAX)?.into_iter().collect();
    let frame = cond.frame();
    let omega = IntervalSet::naturals();
    let (alpha, ra) = pick_witness(&terms, &cond.p, &frame, &omega, r, m, &BTreeSet::new(), ctx, budget)?;
    let extensions = make_defined(&terms, &mut cond.p, &frame, &alpha, &ra, ctx, budget)?;
    let values = witness_values(&terms, &cond.p, &frame, &alpha, ctx)?;
    if values.iter().any(|v| v.is_none() || v.as_ref() == Some(&ra)) {
        return Err(Error::Witness(format!("density witness {alpha} failed")));
    }
    Ok(DensityOutcome {
        alpha,
        r_alpha: Some(ra),
        terms,
        values,
        extensions,
    })
}

/// A scheduled escape of `r`: `r(α) ∉ {t(α) : t ∈ H}` for a set of base
/// terms.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RWitness {
    pub step: u64,
    pub code: u64,
    pub terms: Vec<Term>,
    pub lower: u64,
    pub alpha: Ordinal,
    pub r_alpha: Ordinal,
    pub values: Vec<Option<Ordinal>>,
}

/// The permutation `r` of `ω`, built by alternating "every natural enters
/// the domain and the range" with scheduled escapes.
pub struct RState {
    ctx: TermContext,
    alphabet: Vec<Atom>,
    r: FiniteInjection,
    step: u64,
    witnesses: Vec<RWitness>,
}

fn least_free(taken: impl Fn(u64) -> bool, excluded: &BTreeSet<Ordinal>) -> u64 {
    (0..)
        .find(|&k| !taken(k) && !excluded.contains(&Ordinal::nat(k)))
        .expect("finite exclusions")
}

impl RState {
    pub fn new(ctx: TermContext) -> Self {
        let mut alphabet = Vec::new();
        for id in ctx.ids() {
            alphabet.push(Atom::Sym(id));
            alphabet.push(Atom::SymInv(id));
        }
        RState {
            ctx,
            alphabet,
            r: FiniteInjection::new(),
            step: 0,
            witnesses: Vec::new(),
        }
    }

    pub fn map(&self) -> &FiniteInjection {
        &self.r
    }

    pub fn witnesses(&self) -> &[RWitness] {
        &self.witnesses
    }

    pub fn step(&mut self) -> Result<()> {
        let s = self.step;
        if s % 2 == 0 {
            let item = s / 2;
            let k = Ordinal::nat(item / 2);
            if item % 2 == 0 {
                if !self.r.in_dom(&k) {
                    let v = least_free(|j| self.r.in_ran(&Ordinal::nat(j)), &BTreeSet::new());
                    self.r.insert(k, Ordinal::nat(v))?;
                }
            } else if !self.r.in_ran(&k) {
                let v = least_free(|j| self.r.in_dom(&Ordinal::nat(j)), &BTreeSet::new());
                self.r.insert(Ordinal::nat(v), k)?;
            }
        } else {
            let code = s / 2;
            let (m, lower) = unpair(code);
            let terms = canonical_term_set(&self.alphabet, m)?;
            let a = least_free(|j| j < lower || self.r.in_dom(&Ordinal::nat(j)), &BTreeSet::new());
            let alpha = Ordinal::nat(a);
            let mut excluded = BTreeSet::new();
            let mut values = Vec::with_capacity(terms.len());
            for t in &terms {
                let v = term_eval(t, &crate::termcalc::NoX, &alpha, &self.ctx)?;
                excluded.extend(v.iter().filter(|o| o.is_finite()).cloned());
                values.push(v);
            }
            let v = Ordinal::nat(least_free(|j| self.r.in_ran(&Ordinal::nat(j)), &excluded));
            self.r.insert(alpha.clone(), v.clone())?;
            self.witnesses.push(RWitness {
                step: s,
                code,
                terms,
                lower,
                alpha,
                r_alpha: v,
                values,
            });
        }
        self.step += 1;
        Ok(())
    }

    fn query(&mut self, x: &Ordinal, inverse: bool) -> Option<Ordinal> {
        let k = x.as_nat()?;
        let deadline = 4 * k + 3;
        loop {
            let hit = if inverse { self.r.get_inv(x) } else { self.r.get(x) };
            if let Some(v) = hit {
                return Some(v.clone());
            }
            if self.step > deadline || self.step().is_err() {
                return None;
            }
        }
    }
}

/// Shared lazy handle to `r`.
#[derive(Clone)]
pub struct RHandle(Arc<Mutex<RState>>);

impl RHandle {
    pub fn new(state: RState) -> Self {
        RHandle(Arc::new(Mutex::new(state)))
    }

    pub fn with<T>(&self, f: impl FnOnce(&mut RState) -> T) -> T {
        let mut s = self.0.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut s)
    }
}

impl Injection for RHandle {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        self.with(|s| s.query(x, false))
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        self.with(|s| s.query(y, true))
    }

    fn fragment(&self) -> Option<(FiniteInjection, bool)> {
        Some((self.with(|s| s.map().clone()), false))
    }
}

/// Interval set made of the given points.
pub fn points_set<'a>(pts: impl IntoIterator<Item = &'a Ordinal>) -> IntervalSet {
    pts.into_iter()
        .fold(IntervalSet::empty(), |acc, p| acc.union(&IntervalSet::singleton(p.clone())))
}

/// A permutation of its support, extended by the identity.
pub fn finite_support(f: &FiniteInjection) -> Result<Extended> {
    if !f.is_permutation_of_dom() {
        return Err(Error::NotPermutation(format!("{f:?}")));
    }
    Ok(Extended::new(
        Arc::new(f.clone()),
        PointSet::Interval(points_set(f.dom())),
        None,
    ))
}

/// Seeded random finite-support permutations, each moving at most `moved`
/// points among the first `span` points of `universe`.
pub fn sample_finite_support(
    count: usize,
    moved: usize,
    universe: &IntervalSet,
    span: u64,
    seed: u64,
) -> Vec<FiniteInjection> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pool: Vec<Ordinal> = (0..span).filter_map(|r| universe.enum_element(r)).collect();
    (0..count)
        .map(|_| {
            let k = rng.gen_range(2..=moved.max(2)).min(pool.len());
            let pts: Vec<Ordinal> = pool.choose_multiple(&mut rng, k).cloned().collect();
            let mut img = pts.clone();
            img.shuffle(&mut rng);
            FiniteInjection::from_pairs(pts.into_iter().zip(img)).expect("a shuffle is a bijection")
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundSpec {
    pub x: PointSet,
    pub y: PointSet,
    pub z: IntervalSet,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GenericConfig {
    pub base_perms: usize,
    pub base_moved: usize,
    /// Stand-in for `ω₁`: the universe of the base permutations.
    pub universe: IntervalSet,
    pub seed: u64,
    pub r_steps: u64,
    /// Density requirements met per round before the next round starts.
    pub requirements: u64,
    pub budget: u64,
    pub rounds: Vec<RoundSpec>,
}

impl Default for GenericConfig {
    fn default() -> Self {
        GenericConfig {
            base_perms: 3,
            base_moved: 4,
            universe: IntervalSet::below(Ordinal::omega().add(&Ordinal::omega())),
            seed: 0,
            r_steps: 400,
            requirements: 15,
            budget: DEFAULT_BUDGET,
            rounds: Vec::new(),
        }
    }
}

pub struct RoundRun {
    pub spec: RoundSpec,
    pub id: FnId,
    pub engine: EngineHandle,
    /// Registry entries visible to this round's engine.
    pub snapshot: usize,
}

pub struct GenericRun {
    pub config: GenericConfig,
    pub ctx: TermContext,
    pub base: Vec<(FnId, FiniteInjection)>,
    pub r: RHandle,
    pub rounds: Vec<RoundRun>,
}

/// Builds the base permutations, `r`, and every round.
pub fn generic_run(config: GenericConfig) -> Result<GenericRun> {
    let mut ctx = TermContext::new();
    let mut base = Vec::new();
    let perms = sample_finite_support(
        config.base_perms,
        config.base_moved,
        &config.universe,
        24,
        config.seed,
    );
    for (i, f) in perms.into_iter().enumerate() {
        let ext = finite_support(&f)?;
        let dom = ext.domain().clone();
        let id = ctx.register_fun(format!("h{i}"), Arc::new(ext), Some(dom));
        base.push((id, f));
    }
    let mut rs = RState::new(ctx.clone());
    for _ in 0..config.r_steps {
        rs.step()?;
    }
    let r = RHandle::new(rs);
    let mut run = GenericRun {
        config: config.clone(),
        ctx,
        base,
        r,
        rounds: Vec::new(),
    };
    for spec in config.rounds {
        run.add_round(spec)?;
    }
    Ok(run)
}

impl GenericRun {
    pub fn add_round(&mut self, spec: RoundSpec) -> Result<FnId> {
        let nu = self.rounds.len();
        let cond = Condition::new(spec.x.clone(), spec.y.clone(), spec.z.clone())?;
        let state = EngineState::new(EngineConfig {
            name: format!("g{nu}"),
            frame: cond.frame(),
            kappa: IntervalSet::naturals(),
            y: Arc::new(self.r.clone()),
            ctx: self.ctx.clone(),
            budget: self.config.budget,
            schedule: Task1Schedule::canonical_for(&self.ctx),
        })?;
        let engine = EngineHandle::new(state);
        engine.with(|s| -> Result<()> {
            while (s.certs().len() as u64) < self.config.requirements {
                s.step()?;
            }
            Ok(())
        })?;
        let snapshot = self.ctx.len();
        let ext = Extended::new(Arc::new(engine.clone()), PointSet::Interval(spec.z.clone()), None);
        let id = self.ctx.register_fun(format!("g{nu}"), Arc::new(ext), Some(PointSet::Interval(spec.z.clone())));
        self.rounds.push(RoundRun {
            spec,
            id,
            engine,
            snapshot,
        });
        Ok(id)
    }

    /// All density witnesses so far, with their round.
    pub fn density_log(&self) -> Vec<(usize, crate::bfengine::WitnessCert)> {
        let mut out = Vec::new();
        for (nu, rr) in self.rounds.iter().enumerate() {
            rr.engine.with(|s| out.extend(s.certs().iter().cloned().map(|c| (nu, c))));
        }
        out
    }

    pub fn r_log(&self) -> Vec<RWitness> {
        self.r.with(|s| s.witnesses().to_vec())
    }

    /// First `α ≥ n` where `r` escapes every term of `h` (terms over the
    /// registry, no indeterminate), or `None` within `budget` candidates.
    pub fn r_escape(&self, h: &[Term], n: u64, budget: u64) -> Result<Option<Ordinal>> {
        let terms: Vec<Term> = subterm_closure(h, usize::MAX)?.into_iter().collect();
        for k in n..n + budget {
            let a = Ordinal::nat(k);
            let Some(ra) = self.r.apply(&a) else { continue };
            if !crate::termcalc::graph_member(&a, &ra, &terms, &crate::termcalc::NoX, &self.ctx)? {
                return Ok(Some(a));
            }
        }
        Ok(None)
    }
}

/// A factor of a word in `word_push_down`.
#[derive(Clone)]
pub enum Factor {
    /// A permutation of the small universe.
    G(Arc<dyn Injection>),
    /// A finite-support permutation of the large universe.
    H(FiniteInjection),
}

fn apply_factor(f: &Factor, x: &Ordinal) -> Option<Ordinal> {
    match f {
        Factor::G(g) => g.apply(x),
        Factor::H(h) => Some(h.get(x).cloned().unwrap_or_else(|| x.clone())),
    }
}

/// The word applied to `x`, rightmost factor first.
pub fn word_apply(word: &[Factor], x: &Ordinal) -> Option<Ordinal> {
    word.iter().rev().try_fold(x.clone(), |cur, f| apply_factor(f, &cur))
}

/// Completes a finite partial injection to a permutation of `dom ∪ ran` by
/// sending the points of `ran∖dom` onto `dom∖ran` in increasing order.
pub fn complete_to_permutation(f: &FiniteInjection) -> FiniteInjection {
    let mut out = f.clone();
    let starts: Vec<Ordinal> = f.ran().filter(|v| !f.in_dom(v)).cloned().collect();
    let ends: Vec<Ordinal> = f.dom().filter(|v| !f.in_ran(v)).cloned().collect();
    for (a, b) in starts.into_iter().zip(ends) {
        out.insert(a, b).expect("fresh endpoints");
    }
    out
}

/// A single finite-support permutation containing the word of
/// finite-support permutations restricted to `A × A`.
pub fn word_restrict_small(word: &[FiniteInjection], a: &[Ordinal]) -> FiniteInjection {
    let factors: Vec<Factor> = word.iter().cloned().map(Factor::H).collect();
    let inside: BTreeSet<&Ordinal> = a.iter().collect();
    let mut part = FiniteInjection::new();
    for x in a {
        if let Some(v) = word_apply(&factors, x) {
            if inside.contains(&v) && v != *x {
                part.insert(x.clone(), v).expect("a word of permutations is injective");
            }
        }
    }
    complete_to_permutation(&part)
}

/// Result of [`word_push_down`].
pub struct PushDown {
    pub u: Vec<Factor>,
    /// The set entering each factor, rightmost factor last.
    pub entering: Vec<Vec<Ordinal>>,
}

/// `outer ∘ inner` for finite-support permutations, identity off supports.
fn compose_support(outer: &FiniteInjection, inner: &FiniteInjection) -> FiniteInjection {
    let pts: BTreeSet<&Ordinal> = inner.dom().chain(outer.dom()).collect();
    let pairs = pts.into_iter().filter_map(|x| {
        let m = inner.get(x).unwrap_or(x);
        let v = outer.get(m).unwrap_or(m);
        (v != x).then(|| (x.clone(), v.clone()))
    });
    FiniteInjection::from_pairs(pairs).expect("composition of permutations")
}

/// Merges adjacent `H` factors, giving the alternating shape the rewrite
/// expects.
pub fn merge_h_runs(word: &[Factor]) -> Vec<Factor> {
    let mut out: Vec<Factor> = Vec::with_capacity(word.len());
    for f in word {
        match (out.last_mut(), f) {
            (Some(Factor::H(prev)), Factor::H(h)) => *prev = compose_support(prev, h),
            _ => out.push(f.clone()),
        }
    }
    out
}

/// Replaces every `H` factor by a finite-support permutation of `small` that
/// agrees with it on the points the word can route through, so that the
/// word's graph on `A × A` is contained in the new word's. Adjacent `H`
/// factors are merged first, so `u` may be shorter than `word`.
pub fn word_push_down(word: &[Factor], a: &[Ordinal], small: &IntervalSet) -> PushDown {
    let word = merge_h_runs(word);
    let mut u = word.clone();
    let mut entering = vec![Vec::new(); word.len()];
    let mut cur: Vec<Ordinal> = a.to_vec();
    for i in (0..word.len()).rev() {
        entering[i] = cur.clone();
        match &word[i] {
            Factor::G(g) => {
                cur = cur.iter().filter_map(|x| g.apply(x)).collect();
            }
            Factor::H(h) => {
                let mut part = FiniteInjection::new();
                let mut next = Vec::new();
                for x in &cur {
                    let v = h.get(x).cloned().unwrap_or_else(|| x.clone());
                    if small.contains(&v) {
                        if v != *x {
                            part.insert(x.clone(), v.clone()).expect("restriction of an injection");
                        }
                        next.push(v);
                    }
                }
                u[i] = Factor::H(complete_to_permutation(&part));
                cur = next;
            }
        }
    }
    PushDown { u, entering }
}

/// Points of `A` where `s(α) ∈ A` but `u(α) ≠ s(α)`.
pub fn push_down_exceptions(s: &[Factor], u: &[Factor], a: &[Ordinal]) -> Vec<Ordinal> {
    let inside: BTreeSet<&Ordinal> = a.iter().collect();
    a.iter()
        .filter(|x| match word_apply(s, x) {
            Some(v) if inside.contains(&v) => word_apply(u, x) != Some(v),
            _ => false,
        })
        .cloned()
        .collect()
}
