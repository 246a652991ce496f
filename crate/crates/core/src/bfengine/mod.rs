//! The avoidance extension step, the back-and-forth engine built on it, and
//! the pair catalog with its Key Lemma construction.
//!
//! A partial injection `g` on a set `A` is evaluated through its *frame*
//! `g ∪ id_{λ∖A}`: inside `A` it is as defined so far, outside it is the
//! identity. One extension step adds a single pair while keeping a given
//! pair `⟨α, α*⟩` out of `⋃H[g]`.

mod engine;
mod grid;
mod keylemma;

pub use engine::{
    canonical_term, canonical_term_set, unpair, EngineConfig, EngineEvent, EngineHandle, EngineState,
    Task1Item, Task1Origin, Task1Schedule, WitnessCert, DEFAULT_BUDGET,
};
pub use grid::{lemma_grid, partial_injection_classes, GridReport};
pub use keylemma::{
    itrace, s_atoms_between, CoverCert, IntransitiveCert, KeyLemmaBuild, PairCatalog, PairEntry,
};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcalc::{FiniteInjection, Injection};
use crate::ordcore::{IntervalSet, Ordinal, PointSet};
use crate::termcalc::{term_eval, term_eval_inv, term_trace, Atom, EvalOutcome, Term, TermContext};

/// Restrictions on where new pairs may go. With a split `⟨B, C⟩` the map is
/// being built to send `B` onto `C`, so a new pair never crosses the
/// boundary.
#[derive(Clone, Debug)]
pub enum Split {
    None,
    Sets { b: PointSet, c: PointSet },
}

#[derive(Clone, Debug)]
pub struct Frame {
    pub a: IntervalSet,
    pub split: Split,
}

impl Frame {
    pub fn plain(a: IntervalSet) -> Self {
        Frame { a, split: Split::None }
    }

    pub fn split(a: IntervalSet, b: PointSet, c: PointSet) -> Self {
        Frame {
            a,
            split: Split::Sets { b, c },
        }
    }

    /// May `ζ ↦ η` be added as far as the split is concerned?
    pub fn compatible(&self, zeta: &Ordinal, eta: &Ordinal) -> bool {
        match &self.split {
            Split::None => true,
            Split::Sets { b, c } => b.contains(zeta) == c.contains(eta),
        }
    }

    pub fn view<'a>(&'a self, g: &'a FiniteInjection) -> FrameView<'a> {
        FrameView { g, a: &self.a }
    }
}

/// `g ∪ id_{λ∖A}` as an [`Injection`].
pub struct FrameView<'a> {
    g: &'a FiniteInjection,
    a: &'a IntervalSet,
}

impl Injection for FrameView<'_> {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        if self.a.contains(x) {
            self.g.get(x).cloned()
        } else {
            Some(x.clone())
        }
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        if self.a.contains(y) {
            self.g.get_inv(y).cloned()
        } else {
            Some(y.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtendMode {
    /// Put the given point into the domain.
    Domain(Ordinal),
    /// Put the given point into the range.
    Range(Ordinal),
}

/// The points a new pair must avoid so that `⟨α, α*⟩` stays out of
/// `⋃H[g]`: every defined `t[g](α)` and `t[g]⁻¹(α*)`.
pub fn avoid_set(
    h: &[Term],
    g: &FiniteInjection,
    frame: &Frame,
    alpha: &Ordinal,
    alpha_star: &Ordinal,
    ctx: &TermContext,
) -> Result<BTreeSet<Ordinal>> {
    let view = frame.view(g);
    let mut out = BTreeSet::new();
    for t in h {
        if let Some(v) = term_eval(t, &view, alpha, ctx)? {
            out.insert(v);
        }
        if let Some(v) = term_eval_inv(t, &view, alpha_star, ctx)? {
            out.insert(v);
        }
    }
    Ok(out)
}

/// Scan positions below which every candidate of a given side and class is
/// permanently unavailable (already used, or on the wrong side of the
/// split). Both conditions only grow as `g` does, so a cursor never needs to
/// move back.
#[derive(Clone, Debug, Default)]
pub struct Cursors {
    pos: [u64; 4],
}

/// Adds one pair to `g` according to `mode`, returning it. The partner is
/// the least allowed point in the canonical enumeration of `A` that keeps
/// injectivity, respects the split and avoids [`avoid_set`]. At most
/// `budget` candidates are examined.
///
/// `H` must be closed under subsequences and `⟨α, α*⟩ ∉ ⋃H[g]` must hold on
/// entry; the same is then true of the extension.
#[allow(clippy::too_many_arguments)]
pub fn extend_step(
    h: &[Term],
    g: &mut FiniteInjection,
    frame: &Frame,
    alpha: &Ordinal,
    alpha_star: &Ordinal,
    mode: &ExtendMode,
    ctx: &TermContext,
    budget: u64,
) -> Result<(Ordinal, Ordinal)> {
    extend_step_with(h, g, frame, alpha, alpha_star, mode, ctx, budget, &mut Cursors::default())
}

/// [`extend_step`] resuming the candidate scan from `cursors`.
#[allow(clippy::too_many_arguments)]
pub fn extend_step_with(
    h: &[Term],
    g: &mut FiniteInjection,
    frame: &Frame,
    alpha: &Ordinal,
    alpha_star: &Ordinal,
    mode: &ExtendMode,
    ctx: &TermContext,
    budget: u64,
    cursors: &mut Cursors,
) -> Result<(Ordinal, Ordinal)> {
    let (zeta, range_side) = match mode {
        ExtendMode::Domain(z) => (z, false),
        ExtendMode::Range(z) => (z, true),
    };
    if !frame.a.contains(zeta) {
        return Err(Error::NotMember {
            point: zeta.to_string(),
            set: frame.a.to_string(),
        });
    }
    let already = if range_side {
        g.get_inv(zeta).map(|v| (v.clone(), zeta.clone()))
    } else {
        g.get(zeta).map(|v| (zeta.clone(), v.clone()))
    };
    if let Some(p) = already {
        return Ok(p);
    }
    let avoid = avoid_set(h, g, frame, alpha, alpha_star, ctx)?;
    let class = match &frame.split {
        Split::None => false,
        Split::Sets { b, c } => {
            if range_side {
                c.contains(zeta)
            } else {
                b.contains(zeta)
            }
        }
    };
    let slot = 2 * range_side as usize + class as usize;
    let mut contiguous = true;
    let mut spent = 0u64;
    let mut r = cursors.pos[slot];
    loop {
        if spent >= budget {
            return Err(Error::BudgetExhausted {
                spent,
                context: format!("extension at {zeta}"),
            });
        }
        let Some(eta) = frame.a.enum_element(r) else { break };
        spent += 1;
        let usable = if range_side {
            !g.in_dom(&eta) && frame.compatible(&eta, zeta)
        } else {
            !g.in_ran(&eta) && frame.compatible(zeta, &eta)
        };
        if !usable {
            if contiguous {
                cursors.pos[slot] = r + 1;
            }
            r += 1;
            continue;
        }
        contiguous = false;
        if avoid.contains(&eta) {
            r += 1;
            continue;
        }
        let pair = if range_side { (eta, zeta.clone()) } else { (zeta.clone(), eta) };
        g.insert(pair.0.clone(), pair.1.clone())?;
        return Ok(pair);
    }
    Err(Error::NoTarget(format!("{zeta}: every candidate in {} is excluded", frame.a)))
}

/// Extends `g` until every `t ∈ H` is either defined at `α` or stuck at an
/// `ℱ`-atom (which no extension of `g` can repair). Returns the added pairs.
pub fn make_defined(
    h: &[Term],
    g: &mut FiniteInjection,
    frame: &Frame,
    alpha: &Ordinal,
    alpha_star: &Ordinal,
    ctx: &TermContext,
    budget: u64,
) -> Result<Vec<(Ordinal, Ordinal)>> {
    make_defined_with(h, g, frame, alpha, alpha_star, ctx, budget, &mut Cursors::default())
}

/// [`make_defined`] sharing scan cursors with the caller.
#[allow(clippy::too_many_arguments)]
pub fn make_defined_with(
    h: &[Term],
    g: &mut FiniteInjection,
    frame: &Frame,
    alpha: &Ordinal,
    alpha_star: &Ordinal,
    ctx: &TermContext,
    budget: u64,
    cursors: &mut Cursors,
) -> Result<Vec<(Ordinal, Ordinal)>> {
    let bound: usize = h.iter().map(Term::len).sum::<usize>() + 1;
    let mut added = Vec::new();
    loop {
        let mut next = None;
        for t in h {
            if let EvalOutcome::Stuck { atom, point, .. } = term_trace(t, &frame.view(g), alpha, ctx)? {
                match atom {
                    Atom::X => next = Some(ExtendMode::Domain(point)),
                    Atom::XInv => next = Some(ExtendMode::Range(point)),
                    Atom::Sym(_) | Atom::SymInv(_) => continue,
                }
                break;
            }
        }
        let Some(mode) = next else { return Ok(added) };
        if added.len() >= bound {
            return Err(Error::Witness("extension loop did not terminate".into()));
        }
        added.push(extend_step_with(h, g, frame, alpha, alpha_star, &mode, ctx, budget, cursors)?);
    }
}

/// The least `α` at or after position `lower` of `kappa`'s enumeration that
/// is not in `used`, has `y(α)` defined and `⟨α, y(α)⟩ ∉ ⋃H[g]`.
#[allow(clippy::too_many_arguments)]
pub fn pick_witness(
    h: &[Term],
    g: &FiniteInjection,
    frame: &Frame,
    kappa: &IntervalSet,
    y: &dyn Injection,
    lower: u64,
    used: &BTreeSet<Ordinal>,
    ctx: &TermContext,
    budget: u64,
) -> Result<(Ordinal, Ordinal)> {
    let view = frame.view(g);
    let mut spent = 0u64;
    for r in lower.. {
        if spent >= budget {
            break;
        }
        let Some(alpha) = kappa.enum_element(r) else { break };
        spent += 1;
        if used.contains(&alpha) {
            continue;
        }
        let Some(ya) = y.apply(&alpha) else { continue };
        if !crate::termcalc::graph_member(&alpha, &ya, h, &view, ctx)? {
            return Ok((alpha, ya));
        }
    }
    Err(Error::BudgetExhausted {
        spent,
        context: format!("no witness for a term set of size {}", h.len()),
    })
}

/// Per-term outcome at a witness: the value, or `None` when stuck at an
/// `ℱ`-atom.
pub fn witness_values(
    h: &[Term],
    g: &FiniteInjection,
    frame: &Frame,
    alpha: &Ordinal,
    ctx: &TermContext,
) -> Result<Vec<Option<Ordinal>>> {
    let view = frame.view(g);
    h.iter().map(|t| term_eval(t, &view, alpha, ctx)).collect()
}
