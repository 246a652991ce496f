//! Nice families, type-ω orders on their members that agree piecewise on
//! intersections, and the finite partitions certifying that agreement.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ordcore::{IntervalSet, Ordinal};

/// An order of type ω on some set, exposed as a rank bijection onto ℕ (or
/// an initial segment of ℕ for finite sets).
pub trait RankOrder: Send + Sync {
    fn rank(&self, x: &Ordinal) -> Option<u64>;
    fn element(&self, n: u64) -> Option<Ordinal>;
}

/// The canonical ω-enumeration of an interval set. For sets of type ≤ ω
/// this is the ambient ordinal order.
#[derive(Clone, Debug)]
pub struct CanonicalOrder(pub IntervalSet);

impl RankOrder for CanonicalOrder {
    fn rank(&self, x: &Ordinal) -> Option<u64> {
        self.0.enum_index(x)
    }

    fn element(&self, n: u64) -> Option<Ordinal> {
        self.0.enum_element(n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverWitness {
    pub alpha: usize,
    pub beta: usize,
    pub cover: Vec<usize>,
}

/// Strong form: `A_α ∩ A_β = A_ζ ∩ A_β`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrongWitness {
    pub alpha: usize,
    pub beta: usize,
    pub zeta: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NiceFamily {
    pub members: Vec<IntervalSet>,
    /// `I_β`, an enumeration of indices below `β`.
    pub witnesses: Vec<Vec<usize>>,
    #[serde(default)]
    pub covers: Vec<CoverWitness>,
    #[serde(default)]
    pub strong: Vec<StrongWitness>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct N2Report {
    pub ok: bool,
    pub violations: Vec<String>,
    /// `(α, β, n_α)`: the shortest prefix of `I_β` covering `A_α ∩ A_β`.
    pub prefix_lengths: Vec<(usize, usize, usize)>,
    /// Members with points outside every `A_{β_i}`; these are ordered as
    /// an extra piece.
    pub leftover: Vec<(usize, IntervalSet)>,
    /// Finite stand-in for cofinality: every pair of members lies inside
    /// a single member.
    pub directed: bool,
}

impl NiceFamily {
    /// A family whose `I_β` lists every earlier index. Finite families are
    /// always nice this way.
    pub fn with_all_earlier(members: Vec<IntervalSet>) -> Self {
        let witnesses = (0..members.len()).map(|b| (0..b).collect()).collect();
        NiceFamily {
            members,
            witnesses,
            covers: Vec::new(),
            strong: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    fn union_of(&self, idx: &[usize]) -> IntervalSet {
        idx.iter()
            .fold(IntervalSet::empty(), |u, &i| u.union(&self.members[i]))
    }

    /// `D_i = A_{β_i} ∖ ⋃_{j<i} A_{β_j}`.
    pub fn d_sets(&self, beta: usize) -> Vec<IntervalSet> {
        let mut seen = IntervalSet::empty();
        let mut out = Vec::new();
        for &b in &self.witnesses[beta] {
            out.push(self.members[b].difference(&seen));
            seen = seen.union(&self.members[b]);
        }
        out
    }

    pub fn leftover(&self, beta: usize) -> IntervalSet {
        self.members[beta].difference(&self.union_of(&self.witnesses[beta]))
    }

    fn n_alpha(&self, alpha: usize, beta: usize) -> Option<usize> {
        let meet = self.members[alpha].intersection(&self.members[beta]);
        let wit = &self.witnesses[beta];
        (0..=wit.len()).find(|&n| meet.is_subset(&self.union_of(&wit[..n])))
    }

    pub fn check_n2(&self) -> N2Report {
        let mut r = N2Report {
            ok: true,
            directed: true,
            ..Default::default()
        };
        let m = self.len();
        if self.witnesses.len() != m {
            r.ok = false;
            r.violations.push(format!("{} witness lists for {m} members", self.witnesses.len()));
            return r;
        }
        for (b, wit) in self.witnesses.iter().enumerate() {
            if let Some(&bad) = wit.iter().find(|&&i| i >= b) {
                r.ok = false;
                r.violations.push(format!("I_{b} contains {bad}, not below {b}"));
            }
        }
        if !r.ok {
            return r;
        }
        for b in 0..m {
            for a in 0..b {
                match self.n_alpha(a, b) {
                    Some(n) => r.prefix_lengths.push((a, b, n)),
                    None => {
                        r.ok = false;
                        r.violations
                            .push(format!("A_{a} ∩ A_{b} is not covered by members indexed by I_{b}"));
                    }
                }
            }
            let left = self.leftover(b);
            if b > 0 && !left.is_empty() {
                r.leftover.push((b, left));
            }
        }
        for c in &self.covers {
            let ok = c.alpha < c.beta
                && c.beta < m
                && c.cover.iter().all(|z| self.witnesses[c.beta].contains(z))
                && self.members[c.alpha]
                    .intersection(&self.members[c.beta])
                    .is_subset(&self.union_of(&c.cover));
            if !ok {
                r.ok = false;
                r.violations.push(format!("cover witness {c:?} fails"));
            }
        }
        for s in &self.strong {
            let ok = s.alpha < s.beta
                && s.beta < m
                && self.witnesses[s.beta].contains(&s.zeta)
                && self.members[s.alpha].intersection(&self.members[s.beta])
                    == self.members[s.zeta].intersection(&self.members[s.beta]);
            if !ok {
                r.ok = false;
                r.violations.push(format!("strong witness {s:?} fails"));
            }
        }
        'pairs: for a in 0..m {
            for b in a + 1..m {
                let u = self.members[a].union(&self.members[b]);
                if !self.members.iter().any(|c| u.is_subset(c)) {
                    r.directed = false;
                    break 'pairs;
                }
            }
        }
        r
    }
}

/// Compact-open style subsets of `[0, ω^k)`: initial segments and
/// consecutive blocks cut at successor points whose base-`depth` digits are
/// all below `depth`, plus the whole space. Members are sorted so that
/// proper subsets come first.
pub fn clopen_family(k: u32, depth: u64) -> Result<NiceFamily> {
    if k == 0 {
        return Err(Error::Precondition("k must be at least 1".into()));
    }
    let top = Ordinal::omega_pow(k);
    let whole = IntervalSet::below(top.clone());
    if depth == 0 {
        return Ok(NiceFamily {
            members: vec![whole],
            witnesses: vec![Vec::new()],
            covers: Vec::new(),
            strong: Vec::new(),
        });
    }
    let mut cuts = vec![Ordinal::zero()];
    let total = depth.checked_pow(k).ok_or_else(|| Error::Precondition("family too large".into()))?;
    for code in 0..total {
        let mut digits = vec![0u64; k as usize];
        let mut c = code;
        for d in digits.iter_mut().rev() {
            *d = c % depth;
            c /= depth;
        }
        cuts.push(Ordinal::from_digits(&digits).succ());
    }
    cuts.sort();
    cuts.dedup();
    let mut members: Vec<IntervalSet> = Vec::new();
    let mut push = |s: IntervalSet| {
        if !s.is_empty() && !members.contains(&s) {
            members.push(s);
        }
    };
    for p in &cuts[1..] {
        push(IntervalSet::below(p.clone()));
    }
    for w in cuts.windows(2) {
        push(IntervalSet::interval(w[0].clone(), w[1].clone()));
    }
    push(IntervalSet::interval(cuts.last().expect("cuts").clone(), top));
    push(whole);
    // Topological order by inclusion, ties broken by the textual form.
    let mut sorted = Vec::with_capacity(members.len());
    let mut rest = members;
    while !rest.is_empty() {
        let mut minimal: Vec<usize> = (0..rest.len())
            .filter(|&i| !(0..rest.len()).any(|j| j != i && rest[j].is_subset(&rest[i])))
            .collect();
        minimal.sort_by_key(|&i| rest[i].to_string());
        let pick = minimal[0];
        sorted.push(rest.remove(pick));
    }
    let m = sorted.len();
    let mut witnesses: Vec<Vec<usize>> = (0..m)
        .map(|b| (0..b).filter(|&a| sorted[a].is_subset(&sorted[b])).collect())
        .collect();
    let mut strong = Vec::new();
    for b in 0..m {
        for a in 0..b {
            let meet = sorted[a].intersection(&sorted[b]);
            let zeta = (0..b).find(|&z| sorted[z] == meet).unwrap_or(a);
            if !witnesses[b].contains(&zeta) {
                witnesses[b].push(zeta);
                witnesses[b].sort();
            }
            strong.push(StrongWitness { alpha: a, beta: b, zeta });
        }
    }
    Ok(NiceFamily {
        members: sorted,
        witnesses,
        covers: Vec::new(),
        strong,
    })
}

#[derive(Debug)]
struct Piece {
    set: IntervalSet,
    /// Member whose order this piece inherits; `None` for the leftover,
    /// which uses its own canonical enumeration.
    source: Option<usize>,
    size: Option<u64>,
    elems: Vec<Ordinal>,
    cursor: u64,
}

#[derive(Debug)]
struct Cache {
    seq: Vec<Ordinal>,
    index: HashMap<Ordinal, u64>,
    pieces: Vec<Piece>,
    size: Option<u64>,
    diag_s: u64,
    diag_i: usize,
}

/// The coherent orders `≤_{A_β}` built lazily by dovetailing.
#[derive(Debug)]
pub struct CoherentOrders {
    fam: NiceFamily,
    state: Mutex<Vec<Cache>>,
}

impl CoherentOrders {
    pub fn family(&self) -> &NiceFamily {
        &self.fam
    }

    /// `rank_β(x)`; `None` when `x ∉ A_β`.
    pub fn rank(&self, beta: usize, x: &Ordinal) -> Result<Option<u64>> {
        let member = self.member(beta)?;
        if !member.contains(x) {
            return Ok(None);
        }
        let mut st = self.state.lock().expect("orders lock");
        loop {
            if let Some(&r) = st[beta].index.get(x) {
                return Ok(Some(r));
            }
            if !advance(&mut st, beta)? {
                return Err(Error::Precondition(format!("{x} never enumerated in member {beta}")));
            }
        }
    }

    /// The point of rank `n` in `A_β`.
    pub fn element(&self, beta: usize, n: u64) -> Result<Option<Ordinal>> {
        self.member(beta)?;
        let mut st = self.state.lock().expect("orders lock");
        element_of(&mut st, beta, n)
    }

    fn member(&self, beta: usize) -> Result<&IntervalSet> {
        self.fam
            .members
            .get(beta)
            .ok_or_else(|| Error::Precondition(format!("no member {beta}")))
    }

    /// A finite partition of `A_α ∩ A_β` on whose pieces both orders agree.
    pub fn partition_pair(&self, alpha: usize, beta: usize) -> Result<Vec<IntervalSet>> {
        self.member(alpha)?;
        self.member(beta)?;
        let mut memo = BTreeMap::new();
        partition_rec(&self.fam, alpha, beta, &mut memo)
    }

    pub fn view(self: &Arc<Self>, beta: usize) -> MemberOrder {
        MemberOrder {
            orders: self.clone(),
            beta,
        }
    }
}

/// `≤_{A_β}` as a [`RankOrder`].
#[derive(Clone, Debug)]
pub struct MemberOrder {
    orders: Arc<CoherentOrders>,
    beta: usize,
}

impl RankOrder for MemberOrder {
    fn rank(&self, x: &Ordinal) -> Option<u64> {
        self.orders.rank(self.beta, x).ok().flatten()
    }

    fn element(&self, n: u64) -> Option<Ordinal> {
        self.orders.element(self.beta, n).ok().flatten()
    }
}

fn partition_rec(
    fam: &NiceFamily,
    alpha: usize,
    beta: usize,
    memo: &mut BTreeMap<(usize, usize), Vec<IntervalSet>>,
) -> Result<Vec<IntervalSet>> {
    if alpha == beta {
        return Ok(vec![fam.members[alpha].clone()]);
    }
    let (a, b) = if alpha < beta { (alpha, beta) } else { (beta, alpha) };
    if let Some(p) = memo.get(&(a, b)) {
        return Ok(p.clone());
    }
    let n = fam
        .n_alpha(a, b)
        .ok_or_else(|| Error::Precondition(format!("I_{b} does not cover A_{a} ∩ A_{b}")))?;
    let meet = fam.members[a].intersection(&fam.members[b]);
    let ds = fam.d_sets(b);
    let mut out = Vec::new();
    for (i, d) in ds.iter().enumerate().take(n) {
        let c = meet.intersection(d);
        if c.is_empty() {
            continue;
        }
        let bi = fam.witnesses[b][i];
        for piece in partition_rec(fam, bi, a, memo)? {
            let p = c.intersection(&piece);
            if !p.is_empty() {
                out.push(p);
            }
        }
    }
    memo.insert((a, b), out.clone());
    Ok(out)
}

fn element_of(st: &mut Vec<Cache>, beta: usize, n: u64) -> Result<Option<Ordinal>> {
    while st[beta].seq.len() as u64 <= n {
        if !advance(st, beta)? {
            return Ok(None);
        }
    }
    Ok(Some(st[beta].seq[n as usize].clone()))
}

/// The `n`-th element of piece `i` of member `beta`, if it exists.
fn piece_element(st: &mut Vec<Cache>, beta: usize, i: usize, n: u64) -> Result<Option<Ordinal>> {
    loop {
        let p = &st[beta].pieces[i];
        if (p.elems.len() as u64) > n {
            return Ok(Some(p.elems[n as usize].clone()));
        }
        if p.size.is_some_and(|s| n >= s) {
            return Ok(None);
        }
        let cursor = p.cursor;
        let next = match p.source {
            None => p.set.enum_element(cursor),
            Some(src) => element_of(st, src, cursor)?,
        };
        let p = &mut st[beta].pieces[i];
        p.cursor += 1;
        match next {
            None => {
                return Err(Error::Precondition(format!(
                    "piece {i} of member {beta} ran out before its size"
                )))
            }
            Some(x) if p.set.contains(&x) => p.elems.push(x),
            Some(_) => {}
        }
    }
}

/// Appends the next point of `rank_β`; false once a finite member is done.
fn advance(st: &mut Vec<Cache>, beta: usize) -> Result<bool> {
    if st[beta].size.is_some_and(|s| st[beta].seq.len() as u64 >= s) {
        return Ok(false);
    }
    loop {
        let c = &st[beta];
        let (s, i) = (c.diag_s, c.diag_i);
        let m = c.pieces.len() - 1;
        // Diagonal order: i + n ascending, then i descending.
        let (ns, ni) = if i == 0 {
            let s2 = s + 1;
            (s2, (s2 as usize).min(m))
        } else {
            (s, i - 1)
        };
        st[beta].diag_s = ns;
        st[beta].diag_i = ni;
        let n = s - i as u64;
        if let Some(x) = piece_element(st, beta, i, n)? {
            let c = &mut st[beta];
            if c.index.contains_key(&x) {
                return Err(Error::Precondition(format!("{x} enumerated twice in member {beta}")));
            }
            c.index.insert(x.clone(), c.seq.len() as u64);
            c.seq.push(x);
            return Ok(true);
        }
    }
}

/// Prepares lazy rank caches. Fails when the witnesses do not form a nice
/// family.
pub fn build_orders(fam: &NiceFamily) -> Result<Arc<CoherentOrders>> {
    let report = fam.check_n2();
    if !report.ok {
        return Err(Error::Precondition(report.violations.join("; ")));
    }
    let caches = (0..fam.len())
        .map(|b| {
            let mut pieces: Vec<Piece> = fam
                .d_sets(b)
                .into_iter()
                .zip(&fam.witnesses[b])
                .map(|(d, &src)| {
                    let set = fam.members[b].intersection(&d);
                    Piece {
                        size: set.finite_size(),
                        set,
                        source: Some(src),
                        elems: Vec::new(),
                        cursor: 0,
                    }
                })
                .collect();
            let left = fam.leftover(b);
            pieces.push(Piece {
                size: left.finite_size(),
                set: left,
                source: None,
                elems: Vec::new(),
                cursor: 0,
            });
            Cache {
                seq: Vec::new(),
                index: HashMap::new(),
                pieces,
                size: fam.members[b].finite_size(),
                diag_s: 0,
                diag_i: 0,
            }
        })
        .collect();
    Ok(Arc::new(CoherentOrders {
        fam: fam.clone(),
        state: Mutex::new(caches),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ordcore::{iset, ord};

    fn example() -> NiceFamily {
        NiceFamily {
            members: vec![iset("[0,w)"), iset("[w,w*2)"), iset("[0,w*2)")],
            witnesses: vec![vec![], vec![], vec![0, 1]],
            covers: vec![CoverWitness { alpha: 0, beta: 2, cover: vec![0] }],
            strong: vec![],
        }
    }

    #[test]
    fn n2_examples() {
        let r = example().check_n2();
        assert!(r.ok, "{:?}", r.violations);
        assert!(r.directed);
        let mut bad = example();
        bad.members[1] = iset("[5,w*2)");
        assert!(!bad.check_n2().ok);
        assert!(NiceFamily::with_all_earlier(vec![iset("[0,w)")]).check_n2().ok);
    }

    #[test]
    fn dovetail_trace() {
        let o = build_orders(&example()).unwrap();
        let got: Vec<String> = (0..6).map(|n| o.element(2, n).unwrap().unwrap().to_string()).collect();
        assert_eq!(got, ["0", "w", "1", "w+1", "2", "w+2"]);
        assert_eq!(o.rank(2, &ord("w+3")).unwrap(), Some(7));
        assert_eq!(o.rank(0, &ord("9")).unwrap(), Some(9));
        assert_eq!(o.rank(0, &ord("w")).unwrap(), None);
    }

    #[test]
    fn single_member_uses_ambient_position() {
        let o = build_orders(&NiceFamily::with_all_earlier(vec![iset("[3,w)")])).unwrap();
        for k in 0..20 {
            assert_eq!(o.element(0, k).unwrap(), Some(Ordinal::nat(3 + k)));
        }
    }

    #[test]
    fn partitions() {
        let o = build_orders(&example()).unwrap();
        assert_eq!(o.partition_pair(1, 1).unwrap(), vec![iset("[w,w*2)")]);
        assert_eq!(o.partition_pair(0, 2).unwrap(), vec![iset("[0,w)")]);
        assert!(o.partition_pair(0, 1).unwrap().is_empty());
    }

    #[test]
    fn clopen_families() {
        let f0 = clopen_family(2, 0).unwrap();
        assert_eq!(f0.len(), 1);
        let f = clopen_family(1, 2).unwrap();
        let names: Vec<String> = f.members.iter().map(|m| m.to_string()).collect();
        assert_eq!(names, ["[0,1)", "[1,2)", "[0,2)", "[2,w)", "[0,w)"]);
        assert!(f.check_n2().ok);
        let f2 = clopen_family(2, 2).unwrap();
        let r = f2.check_n2();
        assert!(r.ok, "{:?}", r.violations);
        assert!(f2.members.iter().all(|m| !m.is_empty()));
    }

    #[test]
    fn piece_orders_agree_with_source() {
        let fam = clopen_family(2, 2).unwrap();
        let o = build_orders(&fam).unwrap();
        for b in 0..fam.len() {
            for (i, d) in fam.d_sets(b).iter().enumerate() {
                let src = fam.witnesses[b][i];
                let piece = fam.members[b].intersection(d);
                let pts: Vec<Ordinal> = (0..60).filter_map(|n| o.element(b, n).unwrap()).filter(|x| piece.contains(x)).collect();
                for w in pts.windows(2) {
                    let (r0, r1) = (o.rank(src, &w[0]).unwrap(), o.rank(src, &w[1]).unwrap());
                    assert!(r0 < r1, "member {b} piece {i}");
                }
            }
        }
    }

    #[test]
    fn catalog_json() {
        let f = example();
        let s = serde_json::to_string(&f).unwrap();
        let g: NiceFamily = serde_json::from_str(&s).unwrap();
        assert_eq!(f, g);
    }
}
