//! Piecewise monotone permutations of a member `A`, the matching maps that
//! witness homogeneity, the block witness `y(b_{2^i+j}) = b_{2^{i+1}-j}`, and
//! the block-agreement analysis showing `y` escapes every finite set of
//! monotone maps.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::funcalc::{FiniteInjection, Injection};
use crate::niceord::{CoherentOrders, RankOrder};
use crate::ordcore::{IntervalSet, Ordinal, PointSet};

/// Default cap on how far a subset enumeration scans its parent order.
pub const SCAN_LIMIT: u64 = 1 << 24;

/// The order `n ↦ mul·n + add` on an arithmetic progression of naturals.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AffineOrder {
    pub mul: u64,
    pub add: u64,
}

impl RankOrder for AffineOrder {
    fn rank(&self, x: &Ordinal) -> Option<u64> {
        let v = x.as_nat()?;
        (v >= self.add && (v - self.add) % self.mul == 0).then(|| (v - self.add) / self.mul)
    }

    fn element(&self, n: u64) -> Option<Ordinal> {
        Some(Ordinal::nat(self.mul.checked_mul(n)?.checked_add(self.add)?))
    }
}

#[derive(Default)]
struct SubsetMemo {
    elems: Vec<Ordinal>,
    index: HashMap<Ordinal, u64>,
    cursor: u64,
    exhausted: bool,
}

/// The order a parent order induces on a subset (`≤_A ↾ X`).
pub struct SubsetOrder {
    parent: Arc<dyn RankOrder>,
    set: PointSet,
    limit: u64,
    memo: Mutex<SubsetMemo>,
}

impl SubsetOrder {
    pub fn new(parent: Arc<dyn RankOrder>, set: PointSet) -> Self {
        SubsetOrder {
            parent,
            set,
            limit: SCAN_LIMIT,
            memo: Mutex::new(SubsetMemo::default()),
        }
    }

    pub fn set(&self) -> &PointSet {
        &self.set
    }

    fn step(&self, m: &mut SubsetMemo) -> bool {
        if m.exhausted || m.cursor >= self.limit {
            return false;
        }
        match self.parent.element(m.cursor) {
            None => {
                m.exhausted = true;
                false
            }
            Some(x) => {
                m.cursor += 1;
                if self.set.contains(&x) {
                    m.index.insert(x.clone(), m.elems.len() as u64);
                    m.elems.push(x);
                }
                true
            }
        }
    }
}

impl RankOrder for SubsetOrder {
    fn rank(&self, x: &Ordinal) -> Option<u64> {
        if !self.set.contains(x) {
            return None;
        }
        let r = self.parent.rank(x)?;
        let mut m = self.memo.lock().expect("subset memo");
        while m.cursor <= r {
            if !self.step(&mut m) {
                return None;
            }
        }
        m.index.get(x).copied()
    }

    fn element(&self, n: u64) -> Option<Ordinal> {
        let mut m = self.memo.lock().expect("subset memo");
        while m.elems.len() as u64 <= n {
            if !self.step(&mut m) {
                return None;
            }
        }
        Some(m.elems[n as usize].clone())
    }
}

/// Maps the `n`-th point of one order to the `n`-th point of another.
#[derive(Clone)]
pub struct MonotoneMatch {
    from: Arc<dyn RankOrder>,
    to: Arc<dyn RankOrder>,
}

impl MonotoneMatch {
    pub fn new(from: Arc<dyn RankOrder>, to: Arc<dyn RankOrder>) -> Self {
        MonotoneMatch { from, to }
    }
}

impl Injection for MonotoneMatch {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        self.to.element(self.from.rank(x)?)
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        self.from.element(self.to.rank(y)?)
    }
}

/// The unique `≤_A`-increasing bijection `X → Y`.
pub fn monotone_match(x: PointSet, y: PointSet, order: Arc<dyn RankOrder>) -> MonotoneMatch {
    MonotoneMatch::new(
        Arc::new(SubsetOrder::new(order.clone(), x)),
        Arc::new(SubsetOrder::new(order, y)),
    )
}

/// Prefix certificate of infinitude: `set` meets ranks `[p/2, p)` of `order`.
pub fn certify_infinite(order: &dyn RankOrder, set: &PointSet, p: u64) -> bool {
    (p / 2..p).any(|n| order.element(n).is_some_and(|x| set.contains(&x)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Direction {
    Increasing,
    Decreasing,
}

impl Direction {
    pub fn then(self, other: Direction) -> Direction {
        if self == other {
            Direction::Increasing
        } else {
            Direction::Decreasing
        }
    }
}

/// A permutation of a family member `A`, extended by the identity, with a
/// finite partition of `A` on whose cells it is `≤_A`-monotone.
#[derive(Clone)]
pub struct Generator {
    pub member: usize,
    pub domain: IntervalSet,
    pub map: Arc<dyn Injection>,
    pub pieces: Vec<(PointSet, Direction)>,
}

impl Generator {
    pub fn piece_of(&self, x: &Ordinal) -> Option<usize> {
        self.pieces.iter().position(|(p, _)| p.contains(x))
    }

    /// Acts as `map` on `domain`, the identity elsewhere.
    pub fn apply_ext(&self, x: &Ordinal) -> Option<Ordinal> {
        if self.domain.contains(x) {
            self.map.apply(x)
        } else {
            Some(x.clone())
        }
    }

    pub fn apply_ext_inv(&self, x: &Ordinal) -> Option<Ordinal> {
        if self.domain.contains(x) {
            self.map.apply_inv(x)
        } else {
            Some(x.clone())
        }
    }
}

/// `c ∪ d` where `c: X → Y` and `d: A∖X → A∖Y` are the monotone matchings.
#[derive(Clone)]
pub struct HomogMap {
    a: IntervalSet,
    x: PointSet,
    y: PointSet,
    c: MonotoneMatch,
    d: MonotoneMatch,
}

impl HomogMap {
    pub fn generator(self: &Arc<Self>, member: usize) -> Generator {
        let ax = PointSet::minus(PointSet::Interval(self.a.clone()), self.x.clone());
        Generator {
            member,
            domain: self.a.clone(),
            map: self.clone(),
            pieces: vec![(self.x.clone(), Direction::Increasing), (ax, Direction::Increasing)],
        }
    }
}

impl Injection for HomogMap {
    fn apply(&self, v: &Ordinal) -> Option<Ordinal> {
        if !self.a.contains(v) {
            return Some(v.clone());
        }
        if self.x.contains(v) {
            self.c.apply(v)
        } else {
            self.d.apply(v)
        }
    }

    fn apply_inv(&self, v: &Ordinal) -> Option<Ordinal> {
        if !self.a.contains(v) {
            return Some(v.clone());
        }
        if self.y.contains(v) {
            self.c.apply_inv(v)
        } else {
            self.d.apply_inv(v)
        }
    }
}

/// The homogeneity map `g = c ∪ d` with `g[X] = Y`. Infinitude of `X`, `Y`
/// and both complements in `A` is certified on the first `certify` ranks.
pub fn homog_map(
    a: &IntervalSet,
    order: Arc<dyn RankOrder>,
    x: PointSet,
    y: PointSet,
    certify: u64,
) -> Result<HomogMap> {
    let whole = PointSet::Interval(a.clone());
    let ax = PointSet::minus(whole.clone(), x.clone());
    let ay = PointSet::minus(whole, y.clone());
    for (name, s) in [("X", &x), ("Y", &y), ("A\\X", &ax), ("A\\Y", &ay)] {
        if !certify_infinite(order.as_ref(), s, certify) {
            return Err(Error::Precondition(format!(
                "{name} = {s} not certified infinite within {certify} ranks"
            )));
        }
    }
    let inside = |s: &PointSet| {
        (0..certify).all(|n| order.element(n).map_or(true, |p| !s.contains(&p) || a.contains(&p)))
            && s.certified_subset_of(&PointSet::Interval(a.clone()), certify)
    };
    if !inside(&x) || !inside(&y) {
        return Err(Error::Precondition("X and Y must lie inside A".into()));
    }
    Ok(HomogMap {
        a: a.clone(),
        c: monotone_match(x.clone(), y.clone(), order.clone()),
        d: monotone_match(ax, ay, order),
        x,
        y,
    })
}

/// Index form of the witness: `k = 2^i + j ↦ 2^{i+1} − j` for `k ≥ 1`.
pub fn y_index(k: u64) -> Option<u64> {
    if k == 0 {
        return None;
    }
    let i = 63 - k.leading_zeros();
    let j = k - (1u64 << i);
    Some((1u64 << (i + 1)) - j)
}

/// Inverse of [`y_index`], defined for `m ≥ 2`.
pub fn y_index_inv(m: u64) -> Option<u64> {
    if m < 2 {
        return None;
    }
    // m ∈ (2^i, 2^{i+1}]
    let i = 63 - (m - 1).leading_zeros();
    let j = (1u64 << (i + 1)) - m;
    Some((1u64 << i) + j)
}

/// Block `i` in index form: `2^i .. 2^{i+1}`.
pub fn block_range(i: u32) -> std::ops::Range<u64> {
    (1u64 << i)..(1u64 << (i + 1))
}

pub fn block_of(k: u64) -> Option<u32> {
    (k >= 1).then(|| 63 - k.leading_zeros())
}

/// `y` over the increasing enumeration `b₀, b₁, …` of `B`.
#[derive(Clone)]
pub struct WitnessY {
    b: Arc<dyn RankOrder>,
}

impl WitnessY {
    pub fn new(b: Arc<dyn RankOrder>) -> Self {
        WitnessY { b }
    }

    /// `B` as an arithmetic progression of naturals.
    pub fn affine(mul: u64, add: u64) -> Self {
        WitnessY::new(Arc::new(AffineOrder { mul, add }))
    }

    /// `B` as a subset of `A` under `≤_A`.
    pub fn on_subset(order: Arc<dyn RankOrder>, b: PointSet) -> Self {
        WitnessY::new(Arc::new(SubsetOrder::new(order, b)))
    }

    pub fn b(&self, k: u64) -> Option<Ordinal> {
        self.b.element(k)
    }

    pub fn index_of(&self, x: &Ordinal) -> Option<u64> {
        self.b.rank(x)
    }

    pub fn block_points(&self, i: u32) -> Vec<Ordinal> {
        block_range(i).filter_map(|k| self.b(k)).collect()
    }
}

impl Injection for WitnessY {
    fn apply(&self, x: &Ordinal) -> Option<Ordinal> {
        self.b(y_index(self.index_of(x)?)?)
    }

    fn apply_inv(&self, y: &Ordinal) -> Option<Ordinal> {
        self.b(y_index_inv(self.index_of(y)?)?)
    }
}

/// `a_i = |{j < 2^i : c(b_{2^i+j}) = y(b_{2^i+j})}|` for `i < m`. Points where
/// `c` is undefined count as disagreements.
pub fn block_agreements(c: &dyn Injection, y: &WitnessY, m: u32) -> Vec<u64> {
    (0..m)
        .map(|i| {
            block_range(i)
                .filter(|&k| {
                    let Some(b) = y.b(k) else { return false };
                    let Some(v) = c.apply(&b) else { return false };
                    y.b(y_index(k).expect("k ≥ 1")) == Some(v)
                })
                .count() as u64
        })
        .collect()
}

/// Blocks with at least two agreements.
pub fn special_blocks(counts: &[u64]) -> Vec<u32> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &a)| a >= 2)
        .map(|(i, _)| i as u32)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscapeCertificate {
    pub block: u32,
    pub j: u64,
    pub point: Ordinal,
    pub value: Ordinal,
    /// Blocks passed over because some member agreed with `y` twice there.
    pub skipped: Vec<u32>,
}

/// A pair `⟨b, y(b)⟩` with index `≥ n` covered by no member of `h`. Blocks
/// are scanned from the first `i` with `2^i ≥ max(n, |h|+1)`; blocks where a
/// member agrees twice are skipped, so at most `|h|` are skipped.
pub fn monotone_escape(
    h: &[Arc<dyn Injection>],
    y: &WitnessY,
    n: u64,
    m_max: u32,
) -> Result<EscapeCertificate> {
    let need = n.max(h.len() as u64 + 1);
    let first = 64 - (need - 1).leading_zeros().min(64);
    let first = if need <= 1 { 0 } else { first };
    let mut skipped = Vec::new();
    for i in first..m_max {
        let range = block_range(i);
        let mut hits = vec![0u64; range.clone().count()];
        let mut special = false;
        for c in h {
            let mut agree = 0;
            for (slot, k) in range.clone().enumerate() {
                let (Some(b), Some(t)) = (y.b(k), y.b(y_index(k).expect("k ≥ 1"))) else {
                    return Err(Error::Precondition(format!("B has no point {k}")));
                };
                if c.apply(&b).as_ref() == Some(&t) {
                    agree += 1;
                    hits[slot] += 1;
                }
            }
            if agree >= 2 {
                special = true;
            }
        }
        if special {
            skipped.push(i);
            continue;
        }
        if let Some(slot) = hits.iter().position(|&c| c == 0) {
            let k = range.start + slot as u64;
            return Ok(EscapeCertificate {
                block: i,
                j: slot as u64,
                point: y.b(k).expect("checked"),
                value: y.b(y_index(k).expect("k ≥ 1")).expect("checked"),
                skipped,
            });
        }
    }
    Err(Error::BudgetExhausted {
        spent: m_max as u64,
        context: format!("no uncovered pair below block {m_max}"),
    })
}

/// Closed-form monotone maps on naturals, for catalogs and traces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MonotoneSpec {
    Identity,
    /// `x ↦ mul·x + add`.
    Affine { mul: u64, add: u64 },
    /// An explicit finite map; the direction is checked on construction.
    Finite { pairs: Vec<(u64, u64)> },
    /// `y` restricted to block `block`.
    YBlock { block: u32 },
}

impl MonotoneSpec {
    pub fn build(&self, y: &WitnessY) -> Result<Arc<dyn Injection>> {
        Ok(match self {
            MonotoneSpec::Identity => Arc::new(crate::funcalc::FnInjection::new(
                |x| Some(x.clone()),
                |x| Some(x.clone()),
            )),
            &MonotoneSpec::Affine { mul, add } => {
                if mul == 0 {
                    return Err(Error::Precondition("affine map with mul = 0".into()));
                }
                Arc::new(crate::funcalc::FnInjection::new(
                    move |x| Some(Ordinal::nat(x.as_nat()?.checked_mul(mul)?.checked_add(add)?)),
                    move |v| {
                        let v = v.as_nat()?;
                        (v >= add && (v - add) % mul == 0).then(|| Ordinal::nat((v - add) / mul))
                    },
                ))
            }
            MonotoneSpec::Finite { pairs } => {
                let f = FiniteInjection::from_nat_pairs(pairs)?;
                let mut sorted = pairs.clone();
                sorted.sort();
                let inc = sorted.windows(2).all(|w| w[0].1 < w[1].1);
                let dec = sorted.windows(2).all(|w| w[0].1 > w[1].1);
                if !inc && !dec {
                    return Err(Error::Precondition("finite map is not monotone".into()));
                }
                Arc::new(f)
            }
            &MonotoneSpec::YBlock { block } => {
                let pairs: Vec<(Ordinal, Ordinal)> = block_range(block)
                    .filter_map(|k| Some((y.b(k)?, y.b(y_index(k)?)?)))
                    .collect();
                Arc::new(FiniteInjection::from_pairs(pairs)?)
            }
        })
    }
}

/// How one factor of a word treated a point.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum StepLabel {
    /// Off the factor's member: fixed.
    Fixed,
    /// Moved by piece `piece`, entering through cell `cell` of the
    /// partition between the tracked member and the factor's member.
    Moved { piece: usize, cell: usize },
}

/// One class of a word's graph on `A × A`; `≤_A`-monotone in `direction`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WordPiece {
    pub steps: Vec<StepLabel>,
    pub exit_cell: usize,
    pub direction: Direction,
    pub pairs: Vec<(Ordinal, Ordinal)>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Decomposition {
    pub pieces: Vec<WordPiece>,
    /// Product of per-factor `(pieces·cells + 1)` times the exit cells.
    pub bound: u64,
    pub audited: usize,
}

impl Decomposition {
    /// Every class is monotone in its direction under `rank`.
    pub fn audit(&self, rank: &dyn Fn(&Ordinal) -> Option<u64>) -> Result<()> {
        for p in &self.pieces {
            let mut pts: Vec<(u64, u64)> = p
                .pairs
                .iter()
                .map(|(x, v)| Ok((rank(x).ok_or_else(|| err_rank(x))?, rank(v).ok_or_else(|| err_rank(v))?)))
                .collect::<Result<_>>()?;
            pts.sort();
            let ok = pts.windows(2).all(|w| match p.direction {
                Direction::Increasing => w[0].1 < w[1].1,
                Direction::Decreasing => w[0].1 > w[1].1,
            });
            if !ok {
                return Err(Error::Witness(format!("class {:?} is not monotone", p.steps)));
            }
        }
        if self.pieces.len() as u64 > self.bound {
            return Err(Error::Witness(format!(
                "{} classes exceed the bound {}",
                self.pieces.len(),
                self.bound
            )));
        }
        Ok(())
    }
}

fn err_rank(x: &Ordinal) -> Error {
    Error::NotMember {
        point: x.to_string(),
        set: "A".into(),
    }
}

/// Splits the graph of `word` (rightmost factor first, each factor used
/// through its identity extension) on `A_α × A_α` into monotone classes, by
/// labelling each point with the piece and partition cell it passes through
/// at each factor.
pub fn word_monotone_decompose(
    word: &[(Generator, bool)],
    alpha: usize,
    orders: &CoherentOrders,
    points: &[Ordinal],
) -> Result<Decomposition> {
    let fam = orders.family();
    let a = fam
        .members
        .get(alpha)
        .ok_or_else(|| Error::Precondition(format!("no member {alpha}")))?
        .clone();
    let mut parts: BTreeMap<(usize, usize), Vec<IntervalSet>> = BTreeMap::new();
    let mut part = |p: usize, q: usize| -> Result<Vec<IntervalSet>> {
        if let Some(v) = parts.get(&(p, q)) {
            return Ok(v.clone());
        }
        let v = orders.partition_pair(p, q)?;
        parts.insert((p, q), v.clone());
        Ok(v)
    };
    let mut classes: BTreeMap<(Vec<StepLabel>, usize), (Direction, Vec<(Ordinal, Ordinal)>)> = BTreeMap::new();
    let mut audited = 0;
    let mut bound: u64 = 1;
    let mut tracked_bound = alpha;
    for (g, _) in word.iter().rev() {
        let cells = part(tracked_bound, g.member)?.len().max(1) as u64;
        bound = bound.saturating_mul(g.pieces.len() as u64 * cells + 1);
        tracked_bound = g.member;
    }
    let members: Vec<usize> = word.iter().map(|(g, _)| g.member).collect();
    let max_exit = std::iter::once(alpha)
        .chain(members.iter().copied())
        .map(|m| part(m, alpha).map(|v| v.len().max(1) as u64))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .max()
        .unwrap_or(1);
    bound = bound.saturating_mul(max_exit);
    for x in points {
        if !a.contains(x) {
            continue;
        }
        let mut cur = x.clone();
        let mut tracked = alpha;
        let mut dir = Direction::Increasing;
        let mut steps = Vec::with_capacity(word.len());
        let mut ok = true;
        for (g, inv) in word.iter().rev() {
            if !g.domain.contains(&cur) {
                steps.push(StepLabel::Fixed);
                continue;
            }
            let cells = part(tracked, g.member)?;
            let Some(cell) = cells.iter().position(|c| c.contains(&cur)) else {
                return Err(Error::Precondition(format!("{cur} lies in no partition cell")));
            };
            let (piece, d) = if *inv {
                let out = g.apply_ext_inv(&cur);
                let Some(out) = out else { ok = false; break };
                let p = g.piece_of(&out).ok_or_else(|| Error::Precondition(format!("{out} in no piece")))?;
                (p, g.pieces[p].1)
            } else {
                let p = g.piece_of(&cur).ok_or_else(|| Error::Precondition(format!("{cur} in no piece")))?;
                (p, g.pieces[p].1)
            };
            let next = if *inv { g.apply_ext_inv(&cur) } else { g.apply_ext(&cur) };
            let Some(next) = next else { ok = false; break };
            steps.push(StepLabel::Moved { piece, cell });
            dir = dir.then(d);
            tracked = g.member;
            cur = next;
        }
        if !ok || !a.contains(&cur) {
            continue;
        }
        let exits = part(tracked, alpha)?;
        let Some(exit) = exits.iter().position(|c| c.contains(&cur)) else {
            return Err(Error::Precondition(format!("{cur} lies in no exit cell")));
        };
        audited += 1;
        classes
            .entry((steps, exit))
            .or_insert_with(|| (dir, Vec::new()))
            .1
            .push((x.clone(), cur));
    }
    Ok(Decomposition {
        pieces: classes
            .into_iter()
            .map(|((steps, exit_cell), (direction, pairs))| WordPiece {
                steps,
                exit_cell,
                direction,
                pairs,
            })
            .collect(),
        bound,
        audited,
    })
}
