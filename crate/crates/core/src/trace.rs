//! JSON-lines trace records and a replay verifier.
//!
//! The verifier never runs an engine. Lazily built maps are replayed from
//! the finite fragments logged at the end of a run, closed-form maps from
//! their specs, and every certificate is re-checked by evaluation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::bfengine::{ExtendMode, Frame, IntransitiveCert, WitnessCert};
use crate::error::{Error, Result};
use crate::funcalc::{Extended, FiniteInjection, FnInjection, Injection};
use crate::genericity::RWitness;
use crate::homgroup::{EscapeCertificate, MonotoneSpec, WitnessY};
use crate::niceord::{N2Report, NiceFamily};
use crate::ordcore::{IntervalSet, Ordinal, OrderIso, PointSet};
use crate::termcalc::{
    kappa_normalize, subsequence_cover, term_eval, term_eval_inv, term_trace, word_eval_extended,
    Atom, EvalOutcome, NoX, Term, TermContext,
};

/// How a registered function is replayed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegKind {
    /// A fragment of a (partial) permutation of `domain`. With `extended`
    /// it acts as the identity off `domain`.
    Fun {
        pairs: FiniteInjection,
        domain: Option<IntervalSet>,
        extended: bool,
    },
    Iso {
        source: IntervalSet,
        target: IntervalSet,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegEntry {
    pub name: String,
    #[serde(flatten)]
    pub kind: RegKind,
}

/// The map a witness must escape.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum YSpec {
    /// `2k ↔ 2k+1` on the naturals.
    Swap,
    Finite { pairs: FiniteInjection },
}

impl YSpec {
    pub fn build(&self) -> Arc<dyn Injection> {
        match self {
            YSpec::Swap => {
                let f = |x: &Ordinal| x.as_nat().map(|v| Ordinal::nat(v ^ 1));
                Arc::new(FnInjection::new(f, f))
            }
            YSpec::Finite { pairs } => Arc::new(pairs.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankSample {
    pub u: Ordinal,
    pub v: Ordinal,
    /// Ranks of `u`, `v` in the first and second member.
    pub ranks: [u64; 4],
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum Record {
    Header {
        command: String,
        config: serde_json::Value,
    },
    Registry {
        entries: Vec<RegEntry>,
    },
    YMap {
        name: String,
        spec: YSpec,
    },
    Engine {
        name: String,
        a: IntervalSet,
        y: String,
        snapshot: usize,
        pairs: FiniteInjection,
        /// `(B, C)` when the engine keeps `B` and `A∖B` apart.
        #[serde(default)]
        split: Option<(PointSet, PointSet)>,
    },
    Task0 {
        engine: String,
        step: u64,
        point: Ordinal,
        range_side: bool,
        pair: (Ordinal, Ordinal),
    },
    Witness {
        engine: String,
        cert: WitnessCert,
    },
    REscape {
        y: String,
        snapshot: usize,
        cert: RWitness,
    },
    Escape {
        kappa: IntervalSet,
        y: String,
        cert: IntransitiveCert,
    },
    Homog {
        x: PointSet,
        k: PointSet,
        word: Term,
        samples: Vec<(Ordinal, Ordinal)>,
    },
    OrdinalOp {
        op: String,
        args: Vec<Ordinal>,
        result: Option<Ordinal>,
    },
    Family {
        family: NiceFamily,
        report: N2Report,
    },
    Ranks {
        family: NiceFamily,
        member: usize,
        prefix: Vec<Ordinal>,
    },
    Partition {
        family: NiceFamily,
        alpha: usize,
        beta: usize,
        pieces: Vec<IntervalSet>,
        samples: Vec<RankSample>,
    },
    HomogPairs {
        a: IntervalSet,
        x: PointSet,
        y: PointSet,
        pairs: Vec<(Ordinal, Ordinal)>,
    },
    MonoEscape {
        mul: u64,
        add: u64,
        h: Vec<MonotoneSpec>,
        n: u64,
        cert: EscapeCertificate,
    },
    Extension {
        universe: Ordinal,
        g: FiniteInjection,
        terms: Vec<Term>,
        alpha: Ordinal,
        alpha_star: Ordinal,
        mode: ExtendMode,
        pair: (Ordinal, Ordinal),
    },
    Summary {
        ok: bool,
        detail: serde_json::Value,
    },
}

impl Record {
    pub fn kind(&self) -> &'static str {
        match self {
            Record::Header { .. } => "header",
            Record::Registry { .. } => "registry",
            Record::YMap { .. } => "y_map",
            Record::Engine { .. } => "engine",
            Record::Task0 { .. } => "task0",
            Record::Witness { .. } => "witness",
            Record::REscape { .. } => "r_escape",
            Record::Escape { .. } => "escape",
            Record::Homog { .. } => "homog",
            Record::OrdinalOp { .. } => "ordinal_op",
            Record::Family { .. } => "family",
            Record::Ranks { .. } => "ranks",
            Record::Partition { .. } => "partition",
            Record::HomogPairs { .. } => "homog_pairs",
            Record::MonoEscape { .. } => "mono_escape",
            Record::Extension { .. } => "extension",
            Record::Summary { .. } => "summary",
        }
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[Record]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_records<R: BufRead>(r: R) -> Result<Vec<Record>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse(format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

/// Registry entries describing everything in `ctx`, with lazily built maps
/// captured by their materialized pairs.
pub fn registry_entries(ctx: &TermContext) -> Result<Vec<RegEntry>> {
    let mut out = Vec::new();
    for id in ctx.ids() {
        let e = ctx.get(id)?;
        let kind = match &e.kind {
            crate::termcalc::EntryKind::Iso(r) => RegKind::Iso {
                source: r.source().clone(),
                target: r.target().clone(),
            },
            crate::termcalc::EntryKind::Fun => {
                let (pairs, extended) = e
                    .map
                    .fragment()
                    .ok_or_else(|| Error::Precondition(format!("{} has no finite fragment", e.name)))?;
                let domain = match &e.domain {
                    None => None,
                    Some(PointSet::Interval(d)) => Some(d.clone()),
                    Some(d) => return Err(Error::Precondition(format!("{}: domain {d} is not an interval set", e.name))),
                };
                RegKind::Fun {
                    pairs,
                    domain,
                    extended,
                }
            }
        };
        out.push(RegEntry {
            name: e.name.clone(),
            kind,
        });
    }
    Ok(out)
}

/// Rebuilds a term context from registry entries, keeping ids aligned.
pub fn replay_context(entries: &[RegEntry]) -> Result<TermContext> {
    let mut ctx = TermContext::new();
    for (i, e) in entries.iter().enumerate() {
        let id = match &e.kind {
            RegKind::Fun {
                pairs,
                domain,
                extended,
            } => {
                let dom = domain.clone().map(PointSet::Interval);
                let map: Arc<dyn Injection> = match (extended, &dom) {
                    (true, Some(d)) => Arc::new(Extended::new(Arc::new(pairs.clone()), d.clone(), None)),
                    _ => Arc::new(pairs.clone()),
                };
                ctx.register_fun(e.name.clone(), map, dom)
            }
            RegKind::Iso { source, target } => ctx.register_iso(OrderIso::new(source.clone(), target.clone())?),
        };
        if id.0 as usize != i {
            return Err(Error::Witness(format!("registry entry {i} ({}) is a duplicate", e.name)));
        }
    }
    Ok(ctx)
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct VerifyReport {
    pub records: usize,
    pub checked: BTreeMap<String, usize>,
    pub failures: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

struct Replay {
    ctx: TermContext,
    ys: BTreeMap<String, Arc<dyn Injection>>,
    engines: BTreeMap<String, (IntervalSet, String, usize, FiniteInjection)>,
}

fn max_id(t: &Term) -> Option<usize> {
    t.atoms().iter().filter_map(|a| a.id()).map(|i| i.0 as usize).max()
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Witness(msg()))
    }
}

impl Replay {
    fn y(&self, name: &str) -> Result<&Arc<dyn Injection>> {
        self.ys
            .get(name)
            .ok_or_else(|| Error::Witness(format!("no map named {name}")))
    }

    fn within(&self, terms: &[Term], snapshot: usize) -> Result<()> {
        check(snapshot <= self.ctx.len(), || format!("snapshot {snapshot} exceeds the registry"))?;
        for t in terms {
            if let Some(m) = max_id(t) {
                check(m < snapshot, || format!("{t} mentions f{m}, outside snapshot {snapshot}"))?;
            }
        }
        Ok(())
    }

    fn witness(&self, engine: &str, c: &WitnessCert, seen: &mut BTreeSet<(String, Ordinal)>) -> Result<()> {
        let (a, y, snap, g) = self
            .engines
            .get(engine)
            .ok_or_else(|| Error::Witness(format!("unknown engine {engine}")))?;
        check(c.snapshot == *snap, || format!("certificate snapshot {} ≠ {snap}", c.snapshot))?;
        self.within(&c.terms, *snap)?;
        let closed: BTreeSet<Term> = c.terms.iter().flat_map(|t| t.subterms()).collect();
        check(closed.iter().all(|t| c.terms.contains(t)), || "term set not closed under subterms".into())?;
        check(seen.insert((engine.to_string(), c.alpha.clone())), || format!("witness {} reused", c.alpha))?;
        check(self.y(y)?.apply(&c.alpha).as_ref() == Some(&c.y_alpha), || {
            format!("{y}({}) is not {}", c.alpha, c.y_alpha)
        })?;
        for (x, v) in &c.extensions {
            check(g.get(x) == Some(v), || format!("extension {x} ↦ {v} missing from the fragment"))?;
        }
        let frame = Frame::plain(a.clone());
        let view = frame.view(g);
        check(c.values.len() == c.terms.len(), || "value count mismatch".into())?;
        for (t, v) in c.terms.iter().zip(&c.values) {
            let out = term_trace(t, &view, &c.alpha, &self.ctx)?;
            match (&out, v) {
                (EvalOutcome::Value(w), Some(v)) if w == v => {
                    check(*w != c.y_alpha, || format!("{t} maps {} to y of it", c.alpha))?;
                }
                (EvalOutcome::Stuck { atom: Atom::Sym(_) | Atom::SymInv(_), .. }, None) => {}
                _ => return Err(Error::Witness(format!("{t} at {}: logged {v:?}, replayed {out:?}", c.alpha))),
            }
        }
        Ok(())
    }

    fn r_escape(&self, y: &str, snapshot: usize, c: &RWitness) -> Result<()> {
        self.within(&c.terms, snapshot)?;
        check(c.alpha.as_nat().is_some_and(|a| a >= c.lower), || format!("{} below {}", c.alpha, c.lower))?;
        check(self.y(y)?.apply(&c.alpha).as_ref() == Some(&c.r_alpha), || format!("{y}({}) mismatch", c.alpha))?;
        for (t, v) in c.terms.iter().zip(&c.values) {
            let w = term_eval(t, &NoX, &c.alpha, &self.ctx)?;
            check(w == *v, || format!("{t} at {}: logged {v:?}, replayed {w:?}", c.alpha))?;
            check(w.as_ref() != Some(&c.r_alpha), || format!("{t} covers {}", c.alpha))?;
        }
        Ok(())
    }

    fn escape(&self, kappa: &IntervalSet, y: &str, c: &IntransitiveCert) -> Result<()> {
        check(self.y(y)?.apply(&c.alpha).as_ref() == Some(&c.y_alpha), || format!("{y}({}) mismatch", c.alpha))?;
        let cover = subsequence_cover(&c.word)?;
        check(cover.len() == c.covers.len() && cover.iter().zip(&c.covers).all(|(a, b)| *a == b.cover), || {
            "cover differs from the subsequences of the word".into()
        })?;
        let mut scratch = self.ctx.clone();
        for cc in &c.covers {
            let n = kappa_normalize(&cc.with_rho, kappa, &mut scratch)?;
            check(n == cc.normalized, || format!("{} normalizes to {n}", cc.with_rho))?;
            for t in [&cc.cover, &cc.with_rho, &cc.normalized] {
                let v = term_eval(t, &NoX, &c.alpha, &scratch)?;
                check(v.as_ref() != Some(&c.y_alpha), || format!("{t} covers ⟨{}, {}⟩", c.alpha, c.y_alpha))?;
            }
            let v = term_eval(&cc.cover, &NoX, &c.alpha, &scratch)?;
            check(v == cc.value, || format!("{} value mismatch", cc.cover))?;
        }
        let w = word_eval_extended(&c.word, &self.ctx, &c.alpha)?;
        check(w == c.word_value && w.as_ref() != Some(&c.y_alpha), || format!("{} hits y", c.word))?;
        Ok(())
    }
}

fn verify_one(rec: &Record, rp: &Replay, seen: &mut BTreeSet<(String, Ordinal)>) -> Result<()> {
    match rec {
        Record::Header { .. } | Record::Registry { .. } | Record::YMap { .. } | Record::Summary { .. } => Ok(()),
        Record::Engine { name, a, pairs, split, .. } => {
            for (x, v) in pairs.pairs() {
                check(a.contains(x) && a.contains(v), || format!("{name}: {x} ↦ {v} leaves {a}"))?;
                if let Some((b, c)) = split {
                    check(b.contains(x) == c.contains(v), || format!("{name}: {x} ↦ {v} crosses the split"))?;
                }
            }
            Ok(())
        }
        Record::Task0 { engine, pair, .. } => {
            let (_, _, _, g) = rp
                .engines
                .get(engine)
                .ok_or_else(|| Error::Witness(format!("unknown engine {engine}")))?;
            check(g.get(&pair.0) == Some(&pair.1), || format!("{engine}: {pair:?} not in fragment"))
        }
        Record::Witness { engine, cert } => rp.witness(engine, cert, seen),
        Record::REscape { y, snapshot, cert } => rp.r_escape(y, *snapshot, cert),
        Record::Escape { kappa, y, cert } => rp.escape(kappa, y, cert),
        Record::Homog { x, k, word, samples } => {
            for (p, v) in samples {
                check(x.contains(p) && k.contains(v), || format!("{p} ↦ {v} breaks X → K"))?;
                let w = word_eval_extended(word, &rp.ctx, p)?;
                check(w.as_ref() == Some(v), || format!("{word}({p}) replays as {w:?}"))?;
            }
            Ok(())
        }
        Record::OrdinalOp { op, args, result } => {
            let got = match (op.as_str(), args.as_slice()) {
                ("add", [a, b]) => Some(a.add(b)),
                ("left_sub", [a, b]) => a.left_sub(b).ok(),
                ("succ", [a]) => Some(a.succ()),
                ("parse", [a]) => Some(a.clone()),
                _ => return Err(Error::Parse(format!("ordinal op {op}/{}", args.len()))),
            };
            check(got == *result, || format!("{op}{args:?} = {got:?}, logged {result:?}"))
        }
        Record::Family { family, report } => {
            let again = family.check_n2();
            check(again == *report, || "N2 report does not replay".into())
        }
        Record::Ranks { family, member, prefix } => {
            let a = family
                .members
                .get(*member)
                .ok_or_else(|| Error::Witness(format!("no member {member}")))?;
            let distinct: BTreeSet<&Ordinal> = prefix.iter().collect();
            check(distinct.len() == prefix.len(), || "rank prefix repeats a point".into())?;
            check(prefix.iter().all(|p| a.contains(p)), || "rank prefix leaves the member".into())
        }
        Record::Partition {
            family,
            alpha,
            beta,
            pieces,
            samples,
        } => {
            let (a, b) = (&family.members[*alpha], &family.members[*beta]);
            let meet = a.intersection(b);
            let mut union = IntervalSet::empty();
            for (i, p) in pieces.iter().enumerate() {
                for q in &pieces[i + 1..] {
                    check(p.is_disjoint(q), || format!("pieces {p} and {q} overlap"))?;
                }
                union = union.union(p);
            }
            check(union == meet, || format!("pieces cover {union}, not {meet}"))?;
            for s in samples {
                let piece = pieces.iter().find(|p| p.contains(&s.u));
                check(piece.is_some_and(|p| p.contains(&s.v)), || format!("{} and {} split", s.u, s.v))?;
                let [ua, va, ub, vb] = s.ranks;
                check((ua < va) == (ub < vb), || format!("orders disagree on {}, {}", s.u, s.v))?;
            }
            Ok(())
        }
        Record::HomogPairs { a, x, y, pairs } => {
            let mut dom = BTreeSet::new();
            let mut ran = BTreeSet::new();
            for (p, v) in pairs {
                check(a.contains(p) && a.contains(v), || format!("{p} ↦ {v} leaves {a}"))?;
                check(x.contains(p) == y.contains(v), || format!("{p} ↦ {v} crosses the split"))?;
                check(dom.insert(p) == ran.insert(v), || format!("{p} ↦ {v} breaks injectivity"))?;
            }
            check(dom.len() == pairs.len(), || "repeated point".into())
        }
        Record::MonoEscape { mul, add, h, n, cert } => {
            let y = WitnessY::affine(*mul, *add);
            check(y.apply(&cert.point).as_ref() == Some(&cert.value), || "value is not y(point)".into())?;
            check(y.index_of(&cert.point).is_some_and(|k| k >= *n), || "point below the bound".into())?;
            for s in h {
                let f = s.build(&y)?;
                check(f.apply(&cert.point).as_ref() != Some(&cert.value), || format!("{s:?} covers the pair"))?;
            }
            Ok(())
        }
        Record::Extension {
            universe,
            g,
            terms,
            alpha,
            alpha_star,
            mode,
            pair,
        } => {
            let frame = Frame::plain(IntervalSet::below(universe.clone()));
            let ctx = TermContext::new();
            let mut g2 = g.clone();
            let zeta = match mode {
                ExtendMode::Domain(z) => z == &pair.0 && !g.in_dom(z),
                ExtendMode::Range(z) => z == &pair.1 && !g.in_ran(z),
            };
            check(zeta, || format!("{pair:?} does not extend at {mode:?}"))?;
            g2.insert(pair.0.clone(), pair.1.clone())?;
            for t in terms {
                let before = term_eval(t, &frame.view(g), alpha, &ctx)?;
                check(before.as_ref() != Some(alpha_star), || "precondition fails".into())?;
                let after = term_eval(t, &frame.view(&g2), alpha, &ctx)?;
                check(after.as_ref() != Some(alpha_star), || format!("{t} now covers the pair"))?;
                let inv = term_eval_inv(t, &frame.view(&g2), alpha_star, &ctx)?;
                check(inv.as_ref() != Some(alpha), || format!("{t}⁻¹ now covers the pair"))?;
            }
            Ok(())
        }
    }
}

/// Re-checks every record. Replay material (registry, maps, engine
/// fragments) may appear anywhere in the trace.
pub fn verify_records(records: &[Record]) -> VerifyReport {
    let mut rep = VerifyReport {
        records: records.len(),
        ..Default::default()
    };
    let mut rp = Replay {
        ctx: TermContext::new(),
        ys: BTreeMap::new(),
        engines: BTreeMap::new(),
    };
    for r in records {
        match r {
            Record::Registry { entries } => match replay_context(entries) {
                Ok(c) => rp.ctx = c,
                Err(e) => rep.failures.push(format!("registry: {e}")),
            },
            Record::YMap { name, spec } => {
                rp.ys.insert(name.clone(), spec.build());
            }
            Record::Engine {
                name,
                a,
                y,
                snapshot,
                pairs,
                ..
            } => {
                rp.engines.insert(name.clone(), (a.clone(), y.clone(), *snapshot, pairs.clone()));
            }
            _ => {}
        }
    }
    let mut seen = BTreeSet::new();
    for (i, r) in records.iter().enumerate() {
        match verify_one(r, &rp, &mut seen) {
            Ok(()) => *rep.checked.entry(r.kind().to_string()).or_default() += 1,
            Err(e) => rep.failures.push(format!("record {} ({}): {e}", i + 1, r.kind())),
        }
        if let Record::Summary { ok: false, .. } = r {
            rep.failures.push(format!("record {}: run reported failure", i + 1));
        }
    }
    rep
}

pub fn verify_log<R: BufRead>(r: R) -> Result<VerifyReport> {
    Ok(verify_records(&read_records(r)?))
}
