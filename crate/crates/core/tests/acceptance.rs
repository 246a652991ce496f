//! Acceptance run: one line per criterion, `PASS` only when the property
//! holds with zero exceptions and the run finished inside its time limit.

mod common;

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::*;
use homperm::bfengine::{lemma_grid, KeyLemmaBuild};
use homperm::cli::commands::{
    default_rounds, engine_run, generic_records, keylemma_records, random_word, EngineRunSpec,
};
use homperm::funcalc::{FiniteInjection, Injection};
use homperm::genericity::{
    generic_run, push_down_exceptions, word_apply, word_push_down, word_restrict_small, Factor,
    GenericConfig,
};
use homperm::homgroup::{block_agreements, homog_map, monotone_escape, y_index, MonotoneSpec, WitnessY};
use homperm::niceord::{build_orders, clopen_family, CanonicalOrder, NiceFamily};
use homperm::ordcore::{iset, IntervalSet, Ordinal, OrderIso, PointSet};
use homperm::termcalc::{subsequence_cover, subterm_closure, term_eval, word_eval_extended, Atom, FnId, NoX, Term, TermContext};
use homperm::trace::{read_records, verify_records, write_records, Record, YSpec};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const GRID_UNIVERSE: usize = 7;
const GRID_TERM_LEN: usize = 3;
const GRID_TERMS: usize = 2;
const GRID_SAMPLE: u64 = 997;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn relayout(rng: &mut ChaCha8Rng, s: &IntervalSet) -> IntervalSet {
    let lengths: Vec<Ordinal> = s
        .intervals()
        .iter()
        .map(|(lo, hi)| lo.left_sub(hi).expect("lo < hi"))
        .collect();
    layout(rng, &lengths)
}

fn rho_calculus() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut checked, mut fused_nonempty) = (0u64, 0u64);
    for i in 0..1000 {
        let pieces = rng.gen_range(1..4);
        let l = rand_lengths(&mut rng, pieces);
        let s0 = layout(&mut rng, &l);
        let t0 = relayout(&mut rng, &s0);
        let r0 = OrderIso::new(s0.clone(), t0.clone()).map_err(|e| e.to_string())?;
        // Half the time the second source overlaps the first target.
        let s1 = if i % 2 == 0 {
            let extra = rand_lengths(&mut rng, 1);
            t0.union(&layout(&mut rng, &extra))
        } else {
            let l1 = rand_lengths(&mut rng, 2);
            layout(&mut rng, &l1)
        };
        let r1 = OrderIso::new(s1.clone(), relayout(&mut rng, &s1)).map_err(|e| e.to_string())?;
        let fused = OrderIso::compose(&r1, &r0);
        if !fused.is_empty() {
            fused_nonempty += 1;
        }
        for x in (0..50).map_while(|k| fused.source().enum_element(k)) {
            let want = r0.apply(&x).and_then(|m| r1.apply(&m)).map_err(|e| format!("{x}: {e}"))?;
            ensure(fused.apply(&x).ok() == Some(want.clone()), || format!("fusion differs at {x}"))?;
            checked += 1;
        }
        let u = relayout(&mut rng, &t0);
        let tu = OrderIso::new(t0.clone(), u.clone()).map_err(|e| e.to_string())?;
        let su = OrderIso::new(s0.clone(), u).map_err(|e| e.to_string())?;
        for x in (0..50).map_while(|k| s0.enum_element(k)) {
            let via = r0.apply(&x).and_then(|m| tu.apply(&m)).map_err(|e| e.to_string())?;
            ensure(via == su.apply(&x).map_err(|e| e.to_string())?, || format!("ρ composition fails at {x}"))?;
            checked += 1;
        }
    }
    Ok(format!("1000 pairs, {fused_nonempty} nonempty fusions, {checked} points, 0 mismatches"))
}

fn hand_catalogs() -> Vec<NiceFamily> {
    let fams: [&[&str]; 4] = [
        &["[0,w^3)"],
        &["[0,w)", "[w,w*2)", "[0,w*2)"],
        &["[0,w^2)", "[w^2,w^2*2)", "[0,w^2*2)", "[w^2*2,w^3)", "[0,w^3)"],
        &["[0,5)", "[5,w)", "[0,w)", "[w,w^2)", "[0,w^2)", "[w^2,w^2+w)", "[0,w^2+w)", "[w^2+w,w^3)", "[0,w^3)"],
    ];
    fams.iter().map(|m| NiceFamily::with_all_earlier(m.iter().map(|s| iset(s)).collect())).collect()
}

fn coherence() -> Outcome {
    let mut fams = Vec::new();
    for k in 1..=3 {
        for depth in 1..=3 {
            let f = clopen_family(k, depth).map_err(|e| e.to_string())?;
            if f.len() <= 12 {
                fams.push(f);
            }
        }
    }
    let generated = fams.len();
    fams.extend(hand_catalogs());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut pairs, mut samples) = (0u64, 0u64);
    for fam in &fams {
        let orders = build_orders(fam).map_err(|e| format!("{:?}: {e}", fam.members))?;
        for a in 0..fam.len() {
            for b in 0..fam.len() {
                if a == b {
                    continue;
                }
                let pieces = orders.partition_pair(a, b).map_err(|e| e.to_string())?;
                let meet = fam.members[a].intersection(&fam.members[b]);
                let mut union = IntervalSet::empty();
                for (i, p) in pieces.iter().enumerate() {
                    for q in &pieces[i + 1..] {
                        ensure(p.is_disjoint(q), || format!("({a},{b}): {p} meets {q}"))?;
                    }
                    union = union.union(p);
                }
                ensure(union == meet, || format!("({a},{b}): pieces cover {union}, not {meet}"))?;
                for p in &pieces {
                    let pool: Vec<Ordinal> = (0..300).map_while(|i| p.enum_element(i)).collect();
                    if pool.len() < 2 {
                        continue;
                    }
                    for _ in 0..100 {
                        let u = &pool[rng.gen_range(0..pool.len())];
                        let v = &pool[rng.gen_range(0..pool.len())];
                        let r = |m: usize, x: &Ordinal| orders.rank(m, x).ok().flatten();
                        let (ua, va, ub, vb) = (r(a, u), r(a, v), r(b, u), r(b, v));
                        ensure(ua.is_some() && va.is_some() && ub.is_some() && vb.is_some(), || {
                            format!("({a},{b}): unranked point")
                        })?;
                        ensure((ua < va) == (ub < vb), || format!("({a},{b}): orders disagree on {u}, {v}"))?;
                        samples += 1;
                    }
                }
                pairs += 1;
            }
        }
    }
    Ok(format!(
        "{generated} clopen + {} hand families, {pairs} ordered pairs, {samples} sampled pairs, 0 violations",
        fams.len() - generated
    ))
}

fn random_split(rng: &mut ChaCha8Rng) -> PointSet {
    match rng.gen_range(0..3) {
        0 => PointSet::hashed(PointSet::naturals(), rng.gen(), rng.gen_range(300..700)),
        1 => {
            let m = rng.gen_range(2..6);
            PointSet::residue(PointSet::naturals(), m, vec![rng.gen_range(0..m)])
        }
        _ => PointSet::minus(
            PointSet::hashed(PointSet::naturals(), rng.gen(), 600),
            PointSet::residue(PointSet::naturals(), 3, vec![0]),
        ),
    }
}

fn homogeneity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = IntervalSet::naturals();
    let n = 500usize;
    let first = |s: &dyn Fn(&Ordinal) -> bool| -> Vec<Ordinal> {
        (0u64..).map(Ordinal::nat).filter(|p| s(p)).take(n).collect()
    };
    for i in 0..100 {
        let (x, y) = (random_split(&mut rng), random_split(&mut rng));
        let g = homog_map(&a, Arc::new(CanonicalOrder(a.clone())), x.clone(), y.clone(), 2000)
            .map_err(|e| format!("pair {i}: {e}"))?;
        for (from, to) in [
            (first(&|p| x.contains(p)), first(&|p| y.contains(p))),
            (first(&|p| !x.contains(p)), first(&|p| !y.contains(p))),
        ] {
            let img: Vec<Ordinal> = from.iter().filter_map(|p| g.apply(p)).collect();
            ensure(img == to, || format!("pair {i} ({x}, {y}): prefix not sent onto prefix"))?;
            for (p, v) in from.iter().zip(&img) {
                ensure(g.apply_inv(v).as_ref() == Some(p), || format!("pair {i}: inverse fails at {v}"))?;
            }
        }
    }
    Ok(format!("100 pairs, prefixes of {n} in X and in A∖X matched exactly"))
}

/// Agreements of `f` with the closed-form witness `2^i + j ↦ 2^{i+1} − j`.
fn oracle_agreements(f: &dyn Injection, blocks: u32) -> Vec<u64> {
    (0..blocks)
        .map(|i| {
            let lo = 1u64 << i;
            (0..lo)
                .filter(|j| f.apply(&Ordinal::nat(lo + j)) == Some(Ordinal::nat(2 * lo - j)))
                .count() as u64
        })
        .collect()
}

/// A monotone finite map that copies the witness wherever the direction
/// allows it, so agreements are as frequent as monotonicity permits.
fn greedy_monotone(rng: &mut ChaCha8Rng, increasing: bool) -> MonotoneSpec {
    let mut dom: Vec<u64> = (0..rng.gen_range(5..200)).map(|_| rng.gen_range(1..8192)).collect();
    dom.sort_unstable();
    dom.dedup();
    let mut pairs = Vec::new();
    let mut last: Option<u64> = None;
    let start = if increasing { 0 } else { 20_000 };
    for k in dom {
        let want = y_index(k).expect("k ≥ 1");
        let fits = |v: u64| last.map_or(true, |l| if increasing { v > l } else { v < l });
        let v = if rng.gen_bool(0.7) && fits(want) {
            want
        } else {
            let base = last.unwrap_or(start);
            if increasing {
                base + rng.gen_range(1..6)
            } else if base > 6 {
                base - rng.gen_range(1..6)
            } else {
                break;
            }
        };
        pairs.push((k, v));
        last = Some(v);
    }
    MonotoneSpec::Finite { pairs }
}

fn block_claim() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y = WitnessY::affine(1, 0);
    let mut worst = 0;
    for i in 0..1000 {
        let spec = match i % 4 {
            0 | 1 => greedy_monotone(&mut rng, i % 4 == 0),
            2 => MonotoneSpec::Affine {
                mul: rng.gen_range(1..4),
                add: rng.gen_range(0..50),
            },
            _ => MonotoneSpec::YBlock {
                block: rng.gen_range(0..13),
            },
        };
        let f = spec.build(&y).map_err(|e| e.to_string())?;
        let counts = oracle_agreements(f.as_ref(), 13);
        ensure(counts == block_agreements(f.as_ref(), &y, 13), || format!("map {i}: histogram mismatch"))?;
        let special = counts.iter().filter(|&&c| c >= 2).count();
        worst = worst.max(special);
        ensure(special <= 1, || format!("map {i} {spec:?}: {special} blocks with two agreements"))?;
    }
    Ok(format!("1000 maps, max special blocks per map = {worst}"))
}

fn coverage_escape() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for i in 0..100 {
        let y = WitnessY::affine(rng.gen_range(1..4), rng.gen_range(0..6));
        let size = rng.gen_range(0..=8);
        let specs: Vec<MonotoneSpec> = (0..size)
            .map(|j| match j % 3 {
                0 => greedy_monotone(&mut rng, j % 2 == 0),
                1 => MonotoneSpec::YBlock {
                    block: rng.gen_range(0..12),
                },
                _ => MonotoneSpec::Affine {
                    mul: rng.gen_range(1..3),
                    add: rng.gen_range(0..9),
                },
            })
            .collect();
        let h = specs.iter().map(|s| s.build(&y)).collect::<Result<Vec<_>, _>>().map_err(|e| e.to_string())?;
        let n = rng.gen_range(0..=1024);
        let cert = monotone_escape(&h, &y, n, 48).map_err(|e| format!("family {i}: {e}"))?;
        let k = y.index_of(&cert.point).ok_or("escape point outside B")?;
        ensure(k >= n, || format!("family {i}: index {k} below {n}"))?;
        ensure(y.apply(&cert.point).as_ref() == Some(&cert.value), || format!("family {i}: value is not y(point)"))?;
        for (s, f) in specs.iter().zip(&h) {
            ensure(f.apply(&cert.point).as_ref() != Some(&cert.value), || format!("family {i}: {s:?} covers the pair"))?;
        }
    }
    Ok("100 families, 100 escapes verified".into())
}

fn lemma_grid_check() -> Outcome {
    let rep = lemma_grid(GRID_UNIVERSE, GRID_TERM_LEN, GRID_TERMS, false, GRID_SAMPLE).map_err(|e| e.to_string())?;
    let with_fun = lemma_grid(5, GRID_TERM_LEN, GRID_TERMS, true, GRID_SAMPLE).map_err(|e| e.to_string())?;
    ensure(rep.counterexamples.is_empty() && with_fun.counterexamples.is_empty(), || {
        format!("{:?}", rep.counterexamples.iter().chain(&with_fun.counterexamples).take(3).collect::<Vec<_>>())
    })?;
    Ok(format!(
        "{} + {} instances, {} + {} extensions, 0 counterexamples",
        rep.instances, with_fun.instances, rep.extensions, with_fun.extensions
    ))
}

fn random_term_set(rng: &mut ChaCha8Rng, perms: usize) -> Vec<Term> {
    loop {
        let mut alphabet = vec![Atom::X, Atom::XInv];
        for i in 0..perms as u32 {
            alphabet.extend([Atom::Sym(FnId(i)), Atom::SymInv(FnId(i))]);
        }
        let count = rng.gen_range(1..=2);
        let seeds: Vec<Term> = (0..count)
            .map(|_| Term((0..rng.gen_range(1..=3)).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()))
            .collect();
        let closed = subterm_closure(&seeds, usize::MAX).expect("short terms");
        if closed.len() <= 4 {
            return closed.into_iter().collect();
        }
    }
}

fn engine_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut witnesses = 0;
    for i in 0..50 {
        let perms = rng.gen_range(0..=3);
        let spec = EngineRunSpec {
            a: IntervalSet::naturals(),
            b: PointSet::hashed(PointSet::naturals(), rng.gen(), 500),
            c: PointSet::hashed(PointSet::naturals(), rng.gen(), 500),
            perms,
            terms: random_term_set(&mut rng, perms),
            k: 5,
            prefix: 300,
            seed: rng.gen(),
            budget: 10_000,
        };
        let out = engine_run(&spec).map_err(|e| format!("run {i}: {e}"))?;
        ensure(out.ok, || format!("run {i}: {}", out.lines.join("; ")))?;
        let mut demand = BTreeSet::new();
        for r in &out.records {
            match r {
                Record::Witness { cert, .. } if matches!(cert.origin, homperm::bfengine::Task1Origin::Demand(_)) => {
                    ensure(demand.insert(cert.alpha.clone()), || format!("run {i}: witness {} repeated", cert.alpha))?;
                }
                Record::Engine { pairs, .. } => {
                    for p in (0..300).map(Ordinal::nat) {
                        let v = pairs.get(&p).ok_or_else(|| format!("run {i}: {p} outside the domain"))?;
                        ensure(spec.b.contains(&p) == spec.c.contains(v), || format!("run {i}: {p} ↦ {v} crosses"))?;
                        ensure(pairs.in_ran(&p), || format!("run {i}: {p} outside the range"))?;
                    }
                }
                _ => {}
            }
        }
        ensure(demand.len() == 5, || format!("run {i}: {} demand witnesses", demand.len()))?;
        witnesses += demand.len();
        let rep = verify_records(&out.records);
        ensure(rep.ok(), || format!("run {i}: replay {:?}", rep.failures.first()))?;
    }
    Ok(format!("50 term sets, {witnesses} distinct witnesses, all replayed; prefix 300 in domain and range"))
}

fn swap_y() -> Arc<dyn Injection> {
    YSpec::Swap.build()
}

fn pipeline() -> Outcome {
    let catalog_json = r#"{"pairs":[{"a":"[0,w*2)","b":"evens"},{"a":"[0,w*2)","b":"[w,w*2)"},{"a":"[0,w)|[w*2,w*3)","b":"[w*2,w*3)"}]}"#;
    let v: serde_json::Value = serde_json::from_str(catalog_json).map_err(|e| e.to_string())?;
    let mut cat = homperm::bfengine::PairCatalog::new(IntervalSet::naturals());
    for p in v["pairs"].as_array().ok_or("pairs")? {
        let a: IntervalSet = p["a"].as_str().ok_or("a")?.parse().map_err(|e: homperm::Error| e.to_string())?;
        let b: PointSet = p["b"].as_str().ok_or("b")?.parse().map_err(|e: homperm::Error| e.to_string())?;
        cat.request(a, b).map_err(|e| e.to_string())?;
    }
    let mut kl = KeyLemmaBuild::new(cat, PointSet::evens(), swap_y(), 10_000);
    kl.build_all().map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut tail = Vec::new();
    let mut covers = 0;
    for i in 0..20 {
        let w = random_word(&kl, 4, &mut rng);
        let n = Ordinal::nat(rng.gen_range(0..40));
        let cert = kl.intransitive_cert(&w, &n, 10_000).map_err(|e| format!("word {i} {w}: {e}"))?;
        ensure(cert.alpha >= n, || format!("word {i}: escape below {n}"))?;
        ensure(kl.y.apply(&cert.alpha).as_ref() == Some(&cert.y_alpha), || format!("word {i}: bad y"))?;
        for c in &cert.covers {
            for t in [&c.cover, &c.with_rho, &c.normalized] {
                let v = term_eval(t, &NoX, &cert.alpha, &kl.ctx).map_err(|e| e.to_string())?;
                ensure(v.as_ref() != Some(&cert.y_alpha), || format!("word {i}: {t} covers the pair"))?;
            }
            covers += 1;
        }
        let wv = word_eval_extended(&w, &kl.ctx, &cert.alpha).map_err(|e| e.to_string())?;
        ensure(wv.as_ref() != Some(&cert.y_alpha), || format!("word {i}: {w} covers the pair"))?;
        tail.push(Record::Escape {
            kappa: kl.kappa().clone(),
            y: "y".into(),
            cert,
        });
    }
    let bases = ["evens", "[w,w*2)", "[w*2,w*3)"];
    for i in 0..20 {
        let base: PointSet = bases[i % 3].parse().map_err(|e: homperm::Error| e.to_string())?;
        let x = PointSet::hashed(base, rng.gen(), rng.gen_range(300..700));
        let hw = kl.homog_word(&x).map_err(|e| format!("X {i} = {x}: {e}"))?;
        kl.check_onto_k(&hw.word, &x, 200).map_err(|e| format!("X {i} = {x}: {e}"))?;
        let mut samples = Vec::new();
        for p in x.prefix(200) {
            let v = word_eval_extended(&hw.word, &kl.ctx, &p).map_err(|e| e.to_string())?;
            samples.push((p, v.ok_or("word undefined on X")?));
        }
        tail.push(Record::Homog {
            x: x.clone(),
            k: kl.k.clone(),
            word: hw.word,
            samples,
        });
    }
    kl.verify_certificates().map_err(|e| e.to_string())?;
    let mut records = keylemma_records(&kl).map_err(|e| e.to_string())?;
    records.extend(tail);
    let rep = verify_records(&records);
    ensure(rep.ok(), || format!("replay: {:?}", rep.failures.first()))?;
    Ok(format!(
        "{} generators, 20 certificates ({covers} cover terms), 20 homogeneity words onto K on prefix 200, replay ok",
        kl.fs.len()
    ))
}

/// Oracle evaluation of a word of permutations given as lookup tables.
fn apply_tables(word: &[&[usize]], x: usize) -> usize {
    word.iter().rev().fold(x, |cur, f| f[cur])
}

fn random_perm(rng: &mut ChaCha8Rng, n: usize, support: &[usize]) -> Vec<usize> {
    let mut table: Vec<usize> = (0..n).collect();
    let mut img = support.to_vec();
    for i in (1..img.len()).rev() {
        img.swap(i, rng.gen_range(0..=i));
    }
    for (a, b) in support.iter().zip(img) {
        table[*a] = b;
    }
    table
}

fn table_injection(t: &[usize]) -> FiniteInjection {
    FiniteInjection::from_pairs(t.iter().enumerate().filter(|(i, v)| *i != **v).map(|(i, &v)| (Ordinal::nat(i as u64), Ordinal::nat(v as u64))))
        .expect("a permutation table")
}

fn all_words(letters: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<usize>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|w| (0..letters).map(move |l| [w.as_slice(), &[l]].concat()))
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

fn covers_and_push_down() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut points, mut words) = (0u64, 0u64);
    for n in 1..=8usize {
        for _ in 0..3 {
            // Three permutations of random subsets of [0, n), each acting
            // as the identity elsewhere once extended.
            let mut ctx = TermContext::new();
            let mut tables = Vec::new();
            let mut domains = Vec::new();
            for i in 0..3 {
                let dom: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.6)).collect();
                let t = random_perm(&mut rng, n, &dom);
                let f = FiniteInjection::from_pairs(dom.iter().map(|&a| (Ordinal::nat(a as u64), Ordinal::nat(t[a] as u64))))
                    .map_err(|e| e.to_string())?;
                let dset = IntervalSet::new(dom.iter().map(|&a| (Ordinal::nat(a as u64), Ordinal::nat(a as u64 + 1))));
                ctx.register_fun(format!("f{i}"), Arc::new(f), Some(PointSet::Interval(dset)));
                tables.push(t);
                domains.push(dom);
            }
            let inv: Vec<Vec<usize>> = tables
                .iter()
                .map(|t| {
                    let mut v = vec![0; n];
                    for (i, &x) in t.iter().enumerate() {
                        v[x] = i;
                    }
                    v
                })
                .collect();
            for w in all_words(6, 4) {
                let term = Term(
                    w.iter()
                        .map(|&l| if l % 2 == 0 { Atom::Sym(FnId(l as u32 / 2)) } else { Atom::SymInv(FnId(l as u32 / 2)) })
                        .collect(),
                );
                let cover = subsequence_cover(&term).map_err(|e| e.to_string())?;
                let mut want: BTreeSet<Term> = BTreeSet::new();
                for mask in 0u32..(1 << term.len()) {
                    want.insert(Term(term.atoms().iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, a)| *a).collect()));
                }
                let got: BTreeSet<Term> = cover.iter().cloned().collect();
                ensure(got == want, || format!("cover of {term} is not its subsequences"))?;
                let factors: Vec<&[usize]> =
                    w.iter().map(|&l| if l % 2 == 0 { tables[l / 2].as_slice() } else { inv[l / 2].as_slice() }).collect();
                for x in 0..n {
                    let expect = Ordinal::nat(apply_tables(&factors, x) as u64);
                    let o = Ordinal::nat(x as u64);
                    let lib = word_eval_extended(&term, &ctx, &o).map_err(|e| e.to_string())?;
                    ensure(lib.as_ref() == Some(&expect), || format!("{term}({x}) evaluates wrongly"))?;
                    let mut hit = false;
                    for t in &cover {
                        if term_eval(t, &NoX, &o, &ctx).map_err(|e| e.to_string())? == Some(expect.clone()) {
                            hit = true;
                            break;
                        }
                    }
                    ensure(hit, || format!("⟨{x}, {expect}⟩ of {term} not covered"))?;
                    points += 1;
                }
                words += 1;
            }
            let _ = domains;
        }
        // Push-down: small universe [0, n), large universe [0, n+4).
        let big = n + 4;
        let small = IntervalSet::below(Ordinal::nat(n as u64));
        let a: Vec<Ordinal> = (0..n as u64).map(Ordinal::nat).collect();
        // G letters permute the small universe and are undefined beyond it;
        // H letters have finite support in the large one.
        let mut letters: Vec<(Factor, Vec<usize>, bool)> = Vec::new();
        for _ in 0..2 {
            let sup: Vec<usize> = (0..n).filter(|_| rng.gen_bool(0.7)).collect();
            let t = random_perm(&mut rng, n, &sup);
            let g = FiniteInjection::from_pairs(t.iter().enumerate().map(|(i, &v)| (Ordinal::nat(i as u64), Ordinal::nat(v as u64))))
                .map_err(|e| e.to_string())?;
            letters.push((Factor::G(Arc::new(g)), t, true));
        }
        for _ in 0..2 {
            let sup: Vec<usize> = (0..big).filter(|_| rng.gen_bool(0.6)).collect();
            let t = random_perm(&mut rng, big, &sup);
            letters.push((Factor::H(table_injection(&t)), t, false));
        }
        for w in all_words(4, 4) {
            let s: Vec<Factor> = w.iter().map(|&l| letters[l].0.clone()).collect();
            let oracle = |x: usize| -> Option<usize> {
                w.iter().rev().try_fold(x, |cur, &l| {
                    let (_, t, is_g) = &letters[l];
                    t.get(cur).copied().filter(|_| !*is_g || cur < n)
                })
            };
            for x in 0..n {
                let v = word_apply(&s, &Ordinal::nat(x as u64));
                ensure(v == oracle(x).map(|k| Ordinal::nat(k as u64)), || format!("word_apply wrong at {x}"))?;
            }
            let pd = word_push_down(&s, &a, &small);
            let ex = push_down_exceptions(&s, &pd.u, &a);
            ensure(ex.is_empty(), || format!("push-down exceptions {ex:?}"))?;
            for x in 0..n {
                let Some(sx) = oracle(x).filter(|&v| v < n) else { continue };
                {
                    let ux = word_apply(&pd.u, &Ordinal::nat(x as u64));
                    ensure(ux == Some(Ordinal::nat(sx as u64)), || format!("u misses ⟨{x}, {sx}⟩"))?;
                }
            }
            for f in &pd.u {
                if let Factor::H(h) = f {
                    ensure(h.support().iter().all(|p| small.contains(p)), || "pushed factor leaves A".into())?;
                }
            }
            let hs: Vec<FiniteInjection> = w
                .iter()
                .filter_map(|&l| match &letters[l].0 {
                    Factor::H(h) => Some(h.clone()),
                    Factor::G(_) => None,
                })
                .collect();
            let hs_tabs: Vec<&[usize]> = w.iter().filter(|&&l| l >= 2).map(|&l| letters[l].1.as_slice()).collect();
            let r = word_restrict_small(&hs, &a);
            for x in 0..n {
                let sx = apply_tables(&hs_tabs, x);
                if sx < n && sx != x {
                    ensure(r.get(&Ordinal::nat(x as u64)) == Some(&Ordinal::nat(sx as u64)), || {
                        format!("restriction misses ⟨{x}, {sx}⟩")
                    })?;
                }
            }
            words += 1;
        }
    }
    Ok(format!("{words} words, {points} cover points, 0 exceptions"))
}

fn generic() -> Outcome {
    let cfg = GenericConfig {
        requirements: 15,
        rounds: default_rounds().map_err(|e| e.to_string())?,
        ..GenericConfig::default()
    };
    let trace = |cfg: GenericConfig| -> Result<(Vec<u8>, usize), String> {
        let run = generic_run(cfg).map_err(|e| e.to_string())?;
        let records = generic_records(&run).map_err(|e| e.to_string())?;
        let mut buf = Vec::new();
        write_records(&mut buf, &records).map_err(|e| e.to_string())?;
        Ok((buf, run.density_log().len()))
    };
    let (a, met) = trace(cfg.clone())?;
    let (b, _) = trace(cfg)?;
    ensure(met >= 30, || format!("only {met} requirements met"))?;
    ensure(a == b, || "two runs with one config differ".into())?;
    let records = read_records(&a[..]).map_err(|e| e.to_string())?;
    let rep = verify_records(&records);
    ensure(rep.ok(), || format!("replay: {:?}", rep.failures.first()))?;
    let witnesses = rep.checked.get("witness").copied().unwrap_or(0);
    let escapes = rep.checked.get("r_escape").copied().unwrap_or(0);
    ensure(witnesses >= 30, || format!("{witnesses} witnesses replayed"))?;
    Ok(format!("2 rounds, {met} requirements met, {witnesses} witnesses + {escapes} escapes replayed, traces identical"))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("rho calculus", 5, rho_calculus),
        ("coherent orders", 30, coherence),
        ("homogeneity map", 10, homogeneity),
        ("block agreements", 10, block_claim),
        ("coverage escape", 20, coverage_escape),
        ("one-step extension grid", 300, lemma_grid_check),
        ("back-and-forth engine", 60, engine_check),
        ("key-lemma pipeline", 300, pipeline),
        ("covers and push-down", 60, covers_and_push_down),
        ("generic run", 60, generic),
    ];
    let mut failed = 0;
    for (i, (name, limit, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let res = f();
        let el = t.elapsed();
        let res = match res {
            Ok(d) if el < Duration::from_secs(*limit) => Ok(d),
            Ok(d) => Err(format!("over time: {d}")),
            Err(e) => Err(e),
        };
        let (tag, detail) = match &res {
            Ok(d) => ("PASS", d.clone()),
            Err(e) => {
                failed += 1;
                ("FAIL", e.clone())
            }
        };
        println!("[{tag}] {:>2} {name}: {detail} ({:.2}s, limit {limit}s)", i + 1, el.as_secs_f64());
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
