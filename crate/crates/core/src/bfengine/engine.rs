//! The scheduled back-and-forth engine. Even steps process `TASK₀`
//! (put the next point of `A` into the domain or the range), odd steps
//! process one `TASK₁` item (find a fresh witness `α` for a term set `H`
//! and make every term defined there while keeping `⟨α, y(α)⟩` out of
//! `⋃H[g]`). Demand items from [`EngineState::witness`] take precedence over
//! the canonical diagonal.

use std::collections::{BTreeSet, VecDeque};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use super::{
    extend_step_with, make_defined_with, pick_witness, witness_values, Cursors, ExtendMode, Frame, Split,
};
use crate::error::{Error, Result};
use crate::funcalc::{FiniteInjection, Injection};
use crate::ordcore::{IntervalSet, Ordinal, PointSet};
use crate::termcalc::{subterm_closure, Atom, Term, TermContext};

pub const DEFAULT_BUDGET: u64 = 10_000;

/// Longest term accepted into a `TASK₁` set.
const TERM_BOUND: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task1Origin {
    Demand(u64),
    Canonical(u64),
}

#[derive(Clone, Debug)]
pub struct Task1Item {
    pub terms: Vec<Term>,
    /// Witnesses are drawn from `κ` starting at this enumeration position.
    pub lower: u64,
    pub origin: Task1Origin,
}

#[derive(Clone, Debug)]
pub enum Task1Schedule {
    /// Odd steps with no pending demand do nothing.
    DemandOnly,
    /// Odd steps with no pending demand take the next item of the diagonal
    /// over (canonical term set, lower bound).
    Canonical { alphabet: Vec<Atom> },
}

impl Task1Schedule {
    /// `x`, `x⁻¹` and every registered atom with its inverse.
    pub fn canonical_for(ctx: &TermContext) -> Self {
        let mut alphabet = vec![Atom::X, Atom::XInv];
        for id in ctx.ids() {
            alphabet.push(Atom::Sym(id));
            alphabet.push(Atom::SymInv(id));
        }
        Task1Schedule::Canonical { alphabet }
    }
}

/// The `i`-th nonempty term over `alphabet` in shortlex order.
pub fn canonical_term(alphabet: &[Atom], i: u64) -> Term {
    let k = alphabet.len() as u64;
    let mut v = i + 1;
    let mut atoms = Vec::new();
    while v > 0 {
        let d = (v - 1) % k;
        atoms.push(alphabet[d as usize]);
        v = (v - 1) / k;
    }
    atoms.reverse();
    Term(atoms)
}

/// Term set number `m`: the subterm closure of `{term_i : bit i of m}`.
/// Set 0 is `{⟨⟩}`, and so is every set over an empty alphabet.
pub fn canonical_term_set(alphabet: &[Atom], m: u64) -> Result<Vec<Term>> {
    if alphabet.is_empty() {
        return Ok(vec![Term::empty()]);
    }
    let ts: Vec<Term> = (0..64)
        .filter(|i| m >> i & 1 == 1)
        .map(|i| canonical_term(alphabet, i))
        .collect();
    Ok(subterm_closure(&ts, TERM_BOUND)?.into_iter().collect())
}

pub fn unpair(c: u64) -> (u64, u64) {
    let w = (((8.0 * c as f64 + 1.0).sqrt() - 1.0) / 2.0).floor() as u64;
    let mut w = w;
    while w * (w + 1) / 2 > c {
        w -= 1;
    }
    while (w + 1) * (w + 2) / 2 <= c {
        w += 1;
    }
    let y = c - w * (w + 1) / 2;
    (w - y, y)
}

/// One processed `TASK₁` item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessCert {
    pub step: u64,
    pub origin: Task1Origin,
    pub terms: Vec<Term>,
    pub alpha: Ordinal,
    pub y_alpha: Ordinal,
    /// `t[g](α)` for each term; `None` means stuck at a registered atom.
    pub values: Vec<Option<Ordinal>>,
    pub extensions: Vec<(Ordinal, Ordinal)>,
    /// Number of registry entries visible to the engine.
    pub snapshot: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "task", rename_all = "snake_case")]
pub enum EngineEvent {
    Task0 {
        step: u64,
        point: Ordinal,
        range_side: bool,
        pair: (Ordinal, Ordinal),
        fresh: bool,
    },
    Task1(WitnessCert),
    Idle {
        step: u64,
    },
}

pub struct EngineConfig {
    pub name: String,
    pub frame: Frame,
    pub kappa: IntervalSet,
    pub y: Arc<dyn Injection>,
    pub ctx: TermContext,
    /// Candidates examined per search.
    pub budget: u64,
    pub schedule: Task1Schedule,
}

pub struct EngineState {
    cfg: EngineConfig,
    g: FiniteInjection,
    step: u64,
    queue: VecDeque<Task1Item>,
    canonical_next: u64,
    demand_next: u64,
    used: BTreeSet<Ordinal>,
    certs: Vec<WitnessCert>,
    events: Vec<EngineEvent>,
    halted: Option<Error>,
    cursors: Cursors,
    /// Every `κ` position below this is used or outside `dom(y)`.
    witness_floor: u64,
}

impl EngineState {
    pub fn new(cfg: EngineConfig) -> Result<Self> {
        if let Split::Sets { b, c } = &cfg.frame.split {
            let a = &cfg.frame.a;
            let whole = PointSet::Interval(a.clone());
            for (name, s) in [("B", b), ("C", c)] {
                if !s.certified_subset_of(&whole, 256) {
                    return Err(Error::Precondition(format!("{name} = {s} is not inside {a}")));
                }
            }
        }
        Ok(EngineState {
            cfg,
            g: FiniteInjection::new(),
            step: 0,
            queue: VecDeque::new(),
            canonical_next: 0,
            demand_next: 0,
            used: BTreeSet::new(),
            certs: Vec::new(),
            events: Vec::new(),
            halted: None,
            cursors: Cursors::default(),
            witness_floor: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn g(&self) -> &FiniteInjection {
        &self.g
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn certs(&self) -> &[WitnessCert] {
        &self.certs
    }

    pub fn events(&self) -> &[EngineEvent] {
        &self.events
    }

    pub fn halted(&self) -> Option<&Error> {
        self.halted.as_ref()
    }

    /// Runs one step of the schedule.
    pub fn step(&mut self) -> Result<()> {
        if let Some(e) = &self.halted {
            return Err(e.clone());
        }
        let s = self.step;
        let r = if s % 2 == 0 { self.task0(s / 2) } else { self.task1() };
        match r {
            Ok(()) => {
                self.step += 1;
                Ok(())
            }
            Err(e) => {
                self.halted = Some(e.clone());
                Err(e)
            }
        }
    }

    fn task0(&mut self, m: u64) -> Result<()> {
        let step = self.step;
        let Some(point) = self.cfg.frame.a.enum_element(m / 2) else {
            self.events.push(EngineEvent::Idle { step });
            return Ok(());
        };
        let range_side = m % 2 == 1;
        let known = if range_side {
            self.g.get_inv(&point).map(|v| (v.clone(), point.clone()))
        } else {
            self.g.get(&point).map(|v| (point.clone(), v.clone()))
        };
        let (pair, fresh) = match known {
            Some(p) => (p, false),
            None => {
                let mode = if range_side {
                    ExtendMode::Range(point.clone())
                } else {
                    ExtendMode::Domain(point.clone())
                };
                let p = extend_step_with(
                    &[],
                    &mut self.g,
                    &self.cfg.frame,
                    &point,
                    &point,
                    &mode,
                    &self.cfg.ctx,
                    self.cfg.budget,
                    &mut self.cursors,
                )?;
                (p, true)
            }
        };
        self.events.push(EngineEvent::Task0 {
            step,
            point,
            range_side,
            pair,
            fresh,
        });
        Ok(())
    }

    fn next_item(&mut self) -> Result<Option<Task1Item>> {
        if let Some(it) = self.queue.pop_front() {
            return Ok(Some(it));
        }
        match &self.cfg.schedule {
            Task1Schedule::DemandOnly => Ok(None),
            Task1Schedule::Canonical { alphabet } => {
                let code = self.canonical_next;
                self.canonical_next += 1;
                let (m, lower) = unpair(code);
                Ok(Some(Task1Item {
                    terms: canonical_term_set(alphabet, m)?,
                    lower,
                    origin: Task1Origin::Canonical(code),
                }))
            }
        }
    }

    fn task1(&mut self) -> Result<()> {
        let step = self.step;
        let Some(item) = self.next_item()? else {
            self.events.push(EngineEvent::Idle { step });
            return Ok(());
        };
        let (alpha, y_alpha) = self.find_witness(&item)?;
        let frame = &self.cfg.frame;
        let extensions = make_defined_with(
            &item.terms,
            &mut self.g,
            frame,
            &alpha,
            &y_alpha,
            &self.cfg.ctx,
            self.cfg.budget,
            &mut self.cursors,
        )?;
        let values = witness_values(&item.terms, &self.g, frame, &alpha, &self.cfg.ctx)?;
        if values.iter().any(|v| v.as_ref() == Some(&y_alpha)) {
            return Err(Error::Witness(format!("{alpha} was captured during extension")));
        }
        self.used.insert(alpha.clone());
        while let Some(a) = self.cfg.kappa.enum_element(self.witness_floor) {
            if !self.used.contains(&a) && self.cfg.y.apply(&a).is_some() {
                break;
            }
            self.witness_floor += 1;
        }
        let cert = WitnessCert {
            step,
            origin: item.origin,
            terms: item.terms,
            alpha,
            y_alpha,
            values,
            extensions,
            snapshot: self.cfg.ctx.len(),
        };
        self.certs.push(cert.clone());
        self.events.push(EngineEvent::Task1(cert));
        Ok(())
    }

    fn find_witness(&self, item: &Task1Item) -> Result<(Ordinal, Ordinal)> {
        pick_witness(
            &item.terms,
            &self.g,
            &self.cfg.frame,
            &self.cfg.kappa,
            self.cfg.y.as_ref(),
            item.lower.max(self.witness_floor),
            &self.used,
            &self.cfg.ctx,
            self.cfg.budget,
        )
        .map_err(|e| match e {
            Error::BudgetExhausted { spent, context } => Error::BudgetExhausted {
                spent,
                context: format!("{}: {context}", self.cfg.name),
            },
            e => e,
        })
    }

    /// Steps until `x` is in the domain (or the range, with `inverse`).
    pub fn query(&mut self, x: &Ordinal, inverse: bool) -> Result<Ordinal> {
        let r = self.cfg.frame.a.enum_index(x).ok_or_else(|| Error::NotMember {
            point: x.to_string(),
            set: self.cfg.frame.a.to_string(),
        })?;
        // TASK₀ item 2r (resp. 2r+1) runs at step 4r (resp. 4r+2).
        let deadline = 4 * r + 3;
        loop {
            let hit = if inverse { self.g.get_inv(x) } else { self.g.get(x) };
            if let Some(v) = hit {
                return Ok(v.clone());
            }
            if self.step > deadline {
                return Err(Error::Witness(format!("{x} missed its scheduled step")));
            }
            self.step()?;
        }
    }

    /// Queues `k` items for `H` (closed under subterms first) and runs until
    /// they are processed; returns their certificates.
    pub fn witness(&mut self, h: &[Term], k: usize, lower: u64) -> Result<Vec<WitnessCert>> {
        let terms: Vec<Term> = subterm_closure(h, TERM_BOUND)?.into_iter().collect();
        let mut ids = Vec::with_capacity(k);
        for _ in 0..k {
            let id = self.demand_next;
            self.demand_next += 1;
            ids.push(id);
            self.queue.push_back(Task1Item {
                terms: terms.clone(),
                lower,
                origin: Task1Origin::Demand(id),
            });
        }
        while !self.queue.is_empty() {
            self.step()?;
        }
        Ok(self
            .certs
            .iter()
            .filter(|c| matches!(c.origin, Task1Origin::Demand(i) if ids.contains(&i)))
            .cloned()
            .collect())
    }

    /// Runs until the first `n` points of `A` are in both domain and range.
    pub fn saturate_prefix(&mut self, n: u64) -> Result<()> {
        let target = 4 * n;
        while self.step < target {
            self.step()?;
        }
        Ok(())
    }

    /// Re-evaluates every certificate against the current map.
    pub fn verify_certs(&self) -> Result<usize> {
        for c in &self.certs {
            let now = witness_values(&c.terms, &self.g, &self.cfg.frame, &c.alpha, &self.cfg.ctx)?;
            if now != c.values {
                return Err(Error::Witness(format!("values at {} changed", c.alpha)));
            }
            if now.iter().any(|v| v.as_ref() == Some(&c.y_alpha)) {
                return Err(Error::Witness(format!("{} is covered", c.alpha)));
            }
            for (t, v) in c.terms.iter().zip(&now) {
                if v.is_none() && stuck_at_x(t, &self.g, &self.cfg.frame, &c.alpha, &self.cfg.ctx)? {
                    return Err(Error::Witness(format!("{t} undefined at {} through x", c.alpha)));
                }
            }
        }
        Ok(self.certs.len())
    }
}

fn stuck_at_x(t: &Term, g: &FiniteInjection, frame: &Frame, alpha: &Ordinal, ctx: &TermContext) -> Result<bool> {
    use crate::termcalc::{term_trace, EvalOutcome};
    Ok(matches!(
        term_trace(t, &frame.view(g), alpha, ctx)?,
        EvalOutcome::Stuck { atom: Atom::X | Atom::XInv, .. }
    ))
}

/// Shared handle to an engine: the lazily built permutation of `A`.
#[derive(Clone)]
pub struct EngineHandle {
    inner: Arc<Mutex<EngineState>>,
    a: IntervalSet,
}

impl EngineHandle {
    pub fn new(state: EngineState) -> Self {
        let a = state.cfg.frame.a.clone();
        EngineHandle {
            inner: Arc::new(Mutex::new(state)),
            a,
        }
    }

    pub fn domain(&self) -> &IntervalSet {
        &self.a
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut EngineState) -> R) -> R {
        let mut s = self.inner.lock().unwrap_or_else(|p| p.into_inner());
        f(&mut s)
    }

    pub fn query(&self, x: &Ordinal) -> Result<Ordinal> {
        self.with(|s| s.query(x, false))
    }

    pub fn query_inv(&self, x: &Ordinal) -> Result<Ordinal> {
        self.with(|s| s.query(x, true))
    }

    pub fn snapshot(&self) -> FiniteInjection {
        self.with(|s| s.g.clone())
    }
}

impl Injection for EngineHandle {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        if !self.a.contains(x) {
            return None;
        }
        self.query(x).ok()
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        if !self.a.contains(y) {
            return None;
        }
        self.query_inv(y).ok()
    }

    fn fragment(&self) -> Option<(FiniteInjection, bool)> {
        Some((self.snapshot(), false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::funcalc::FnInjection;
    use crate::termcalc::term_eval;

    fn swap_y() -> Arc<dyn Injection> {
        let f = |x: &Ordinal| x.as_nat().map(|v| Ordinal::nat(v ^ 1));
        Arc::new(FnInjection::new(f, f))
    }

    fn engine(schedule: Task1Schedule) -> EngineState {
        EngineState::new(EngineConfig {
            name: "test".into(),
            frame: Frame::split(IntervalSet::naturals(), PointSet::evens(), PointSet::odds()),
            kappa: IntervalSet::naturals(),
            y: swap_y(),
            ctx: TermContext::new(),
            budget: DEFAULT_BUDGET,
            schedule,
        })
        .unwrap()
    }

    #[test]
    fn shortlex_terms() {
        let al = [Atom::X, Atom::XInv];
        let got: Vec<String> = (0..6).map(|i| canonical_term(&al, i).to_string()).collect();
        assert_eq!(got, ["x", "x^-1", "x.x", "x.x^-1", "x^-1.x", "x^-1.x^-1"]);
        assert_eq!(canonical_term_set(&al, 0).unwrap(), vec![Term::empty()]);
        assert_eq!(unpair(0), (0, 0));
        assert_eq!(unpair(1), (1, 0));
        assert_eq!(unpair(2), (0, 1));
    }

    #[test]
    fn canonical_schedule_start() {
        let mut s = engine(Task1Schedule::canonical_for(&TermContext::new()));
        for _ in 0..3 {
            s.step().unwrap();
        }
        let pairs: Vec<_> = s.g().pairs().map(|(a, b)| (a.clone(), b.clone())).collect();
        assert_eq!(pairs, vec![(Ordinal::nat(0), Ordinal::nat(1)), (Ordinal::nat(1), Ordinal::nat(0))]);
    }

    #[test]
    fn query_is_memoized_and_split_respected() {
        let mut s = engine(Task1Schedule::canonical_for(&TermContext::new()));
        let a = s.query(&Ordinal::nat(7), false).unwrap();
        let b = s.query(&Ordinal::nat(7), false).unwrap();
        assert_eq!(a, b);
        s.saturate_prefix(100).unwrap();
        for (x, v) in s.g().pairs() {
            assert_eq!(PointSet::evens().contains(x), PointSet::odds().contains(v));
        }
        for k in 0..100 {
            assert!(s.g().in_dom(&Ordinal::nat(k)) && s.g().in_ran(&Ordinal::nat(k)));
        }
        s.verify_certs().unwrap();
    }

    #[test]
    fn three_witnesses() {
        let mut s = engine(Task1Schedule::DemandOnly);
        let certs = s.witness(&[Term::x()], 3, 0).unwrap();
        assert_eq!(certs.len(), 3);
        let alphas: BTreeSet<_> = certs.iter().map(|c| c.alpha.clone()).collect();
        assert_eq!(alphas.len(), 3);
        s.saturate_prefix(50).unwrap();
        let y = swap_y();
        for c in &certs {
            let v = term_eval(&Term::x(), s.g(), &c.alpha, &TermContext::new()).unwrap();
            assert_ne!(v, y.apply(&c.alpha));
        }
    }
}
