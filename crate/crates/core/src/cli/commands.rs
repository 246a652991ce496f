use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use serde_json::json;

use super::{Cli, Command, FamilySource, Outcome};
use crate::bfengine::{
    lemma_grid, EngineConfig, EngineEvent, EngineHandle, EngineState, Frame, KeyLemmaBuild, PairCatalog,
    Task1Schedule, DEFAULT_BUDGET,
};
use crate::error::{Error, Result};
use crate::funcalc::Injection;
use crate::genericity::{finite_support, generic_run, sample_finite_support, GenericConfig, GenericRun, RoundSpec};
use crate::homgroup::{
    block_agreements, homog_map, monotone_escape, special_blocks, MonotoneSpec, WitnessY,
};
use crate::niceord::{build_orders, clopen_family, CanonicalOrder, NiceFamily};
use crate::ordcore::{IntervalSet, Ordinal, PointSet};
use crate::termcalc::{word_eval_extended, Atom, Term, TermContext};
use crate::trace::{registry_entries, verify_log, verify_records, RankSample, Record, YSpec};

pub fn dispatch(cli: &Cli) -> Result<Outcome> {
    let g = &cli.global;
    let budget = g.budget.unwrap_or(DEFAULT_BUDGET);
    let mut out = match &cli.command {
        Command::Ordinal { op, args } => ordinal(op, args)?,
        Command::FamilyCheck(src) => family_check(&load_family(cli, src)?),
        Command::OrdersBuild { source, prefix } => orders_build(&load_family(cli, source)?, *prefix)?,
        Command::Partition {
            source,
            alpha,
            beta,
            samples,
        } => partition(&load_family(cli, source)?, *alpha, *beta, *samples, g.seed)?,
        Command::HomogMap { x, y, prefix } => {
            let a = IntervalSet::below(g.lambda.clone().unwrap_or_else(Ordinal::omega));
            homog_pairs(&a, x.parse()?, y.parse()?, *prefix)?
        }
        Command::WitnessEscape {
            mul,
            add,
            h,
            random,
            n,
            blocks,
        } => witness_escape(*mul, *add, h, *random, *n, *blocks, g.seed)?,
        Command::ExtendFuzz {
            universe,
            max_term,
            max_terms,
            with_fun,
            sample,
        } => extend_fuzz(*universe, *max_term, *max_terms, *with_fun, *sample)?,
        Command::EngineRun {
            b,
            c,
            perms,
            terms,
            k,
            prefix,
        } => {
            let a = IntervalSet::below(g.lambda.clone().unwrap_or_else(Ordinal::omega));
            let terms = terms
                .split(';')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse())
                .collect::<Result<Vec<Term>>>()?;
            let spec = EngineRunSpec {
                a,
                b: b.parse()?,
                c: c.parse()?,
                perms: *perms,
                terms,
                k: *k,
                prefix: *prefix,
                seed: g.seed,
                budget,
            };
            engine_run(&spec)?
        }
        Command::Keylemma { x, prefix } => {
            let mut xs = x.iter().map(|s| s.parse()).collect::<Result<Vec<PointSet>>>()?;
            if xs.is_empty() {
                xs = vec!["[w,w*2)%2=0".parse()?, "nat%4=0".parse()?];
            }
            keylemma(load_catalog(cli)?, &xs, *prefix, budget)?
        }
        Command::IntransitiveCert {
            word,
            random,
            max_len,
            n,
        } => {
            let n: Ordinal = n.parse()?;
            let words = word.iter().map(|w| w.parse()).collect::<Result<Vec<Term>>>()?;
            intransitive(load_catalog(cli)?, words, *random, *max_len, &n, g.seed, budget)?
        }
        Command::GenericRun { requirements, r_steps } => {
            let cfg = match &cli.global.catalog {
                Some(p) => serde_json::from_str(&read(p)?)?,
                None => GenericConfig {
                    universe: IntervalSet::below(g.lambda.clone().unwrap_or(Ordinal::omega().add(&Ordinal::omega()))),
                    seed: g.seed,
                    r_steps: *r_steps,
                    requirements: *requirements,
                    budget,
                    rounds: default_rounds()?,
                    ..GenericConfig::default()
                },
            };
            let run = generic_run(cfg)?;
            let lines = vec![format!(
                "{} base maps, {} rounds, {} density witnesses, {} escapes of r",
                run.base.len(),
                run.rounds.len(),
                run.density_log().len(),
                run.r_log().len()
            )];
            outcome(generic_records(&run)?, lines, true)
        }
        Command::VerifyLog { path } => return verify_file(path),
    };
    let rep = verify_records(&out.records);
    if !rep.ok() {
        out.ok = false;
        out.lines.extend(rep.failures.iter().map(|f| format!("replay failure: {f}")));
    }
    out.records.push(Record::Summary {
        ok: out.ok,
        detail: json!({ "checked": rep.checked, "failures": rep.failures.len() }),
    });
    Ok(out)
}

fn outcome(records: Vec<Record>, lines: Vec<String>, ok: bool) -> Outcome {
    Outcome { records, lines, ok }
}

fn read(p: &std::path::Path) -> Result<String> {
    std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))
}

fn load_family(cli: &Cli, src: &FamilySource) -> Result<NiceFamily> {
    match &cli.global.catalog {
        Some(p) => Ok(serde_json::from_str(&read(p)?)?),
        None => clopen_family(src.clopen, src.depth).map_err(|e| Error::Parse(e.to_string())),
    }
}

#[derive(Deserialize)]
struct CatalogFile {
    #[serde(default = "IntervalSet::naturals")]
    kappa: IntervalSet,
    #[serde(default = "PointSet::evens")]
    k: PointSet,
    pairs: Vec<CatalogPair>,
}

#[derive(Deserialize)]
struct CatalogPair {
    a: IntervalSet,
    b: PointSet,
}

/// The pair catalog and `K` from `--catalog`, or a built-in three-pair one.
pub fn load_catalog(cli: &Cli) -> Result<(PairCatalog, PointSet)> {
    let file: CatalogFile = match &cli.global.catalog {
        Some(p) => serde_json::from_str(&read(p)?)?,
        None => serde_json::from_value(json!({
            "pairs": [
                { "a": "[0,w*2)", "b": "evens" },
                { "a": "[0,w*2)", "b": "[w,w*2)" },
                { "a": "[0,w)|[w*2,w*3)", "b": "[w*2,w*3)" },
            ]
        }))?,
    };
    let mut cat = PairCatalog::new(file.kappa);
    for p in file.pairs {
        cat.request(p.a, p.b)?;
    }
    Ok((cat, file.k))
}

pub fn default_rounds() -> Result<Vec<RoundSpec>> {
    Ok(vec![
        RoundSpec {
            x: PointSet::evens(),
            y: PointSet::odds(),
            z: IntervalSet::naturals(),
        },
        RoundSpec {
            x: "[w,w*2)%3=0".parse()?,
            y: "nat%2=0".parse()?,
            z: "[0,w*2)".parse()?,
        },
    ])
}

fn ordinal(op: &str, args: &[String]) -> Result<Outcome> {
    let xs = args.iter().map(|a| a.parse()).collect::<Result<Vec<Ordinal>>>()?;
    let (name, result) = match (op, xs.as_slice()) {
        ("add", [a, b]) => ("add", Some(a.add(b))),
        ("left-sub" | "sub", [a, b]) => ("left_sub", a.left_sub(b).ok()),
        ("succ", [a]) => ("succ", Some(a.succ())),
        ("parse", [a]) => ("parse", Some(a.clone())),
        _ => return Err(Error::Parse(format!("unknown ordinal operation {op} with {} arguments", xs.len()))),
    };
    let line = result.as_ref().map_or("undefined".to_string(), |r| r.to_string());
    let ok = result.is_some();
    let rec = Record::OrdinalOp {
        op: name.into(),
        args: xs,
        result,
    };
    Ok(outcome(vec![rec], vec![line], ok))
}

fn family_check(fam: &NiceFamily) -> Outcome {
    let report = fam.check_n2();
    let line = serde_json::to_string(&report).unwrap_or_default();
    let ok = report.ok;
    outcome(
        vec![Record::Family {
            family: fam.clone(),
            report,
        }],
        vec![line],
        ok,
    )
}

fn orders_build(fam: &NiceFamily, prefix: u64) -> Result<Outcome> {
    let orders = build_orders(fam)?;
    let mut records = Vec::new();
    let mut lines = Vec::new();
    for beta in 0..fam.len() {
        let mut pts = Vec::new();
        for n in 0..prefix {
            match orders.element(beta, n)? {
                Some(p) => pts.push(p),
                None => break,
            }
        }
        let shown: Vec<String> = pts.iter().take(8).map(|p| p.to_string()).collect();
        lines.push(format!("member {beta} {}: {} ...", fam.members[beta], shown.join(" ")));
        records.push(Record::Ranks {
            family: fam.clone(),
            member: beta,
            prefix: pts,
        });
    }
    Ok(outcome(records, lines, true))
}

fn partition(
    fam: &NiceFamily,
    alpha: Option<usize>,
    beta: Option<usize>,
    samples: usize,
    seed: u64,
) -> Result<Outcome> {
    let orders = build_orders(fam)?;
    let n = fam.len();
    let pairs: Vec<(usize, usize)> = match (alpha, beta) {
        (Some(a), Some(b)) => vec![(a, b)],
        _ => (0..n).flat_map(|a| (0..n).filter(move |&b| b != a).map(move |b| (a, b))).collect(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::new();
    let mut lines = Vec::new();
    let mut ok = true;
    for (a, b) in pairs {
        let pieces = orders.partition_pair(a, b)?;
        let mut rs = Vec::new();
        for piece in &pieces {
            let pool: Vec<Ordinal> = (0..64).map_while(|i| piece.enum_element(i)).collect();
            if pool.len() < 2 {
                continue;
            }
            for _ in 0..samples {
                let u = &pool[rng.gen_range(0..pool.len())];
                let v = &pool[rng.gen_range(0..pool.len())];
                if u == v {
                    continue;
                }
                let rank = |m: usize, x: &Ordinal| -> Result<u64> {
                    orders.rank(m, x)?.ok_or_else(|| Error::Witness(format!("{x} missing from member {m}")))
                };
                let ranks = [rank(a, u)?, rank(a, v)?, rank(b, u)?, rank(b, v)?];
                ok &= (ranks[0] < ranks[1]) == (ranks[2] < ranks[3]);
                rs.push(RankSample {
                    u: u.clone(),
                    v: v.clone(),
                    ranks,
                });
            }
        }
        let shown: Vec<String> = pieces.iter().map(|p| p.to_string()).collect();
        lines.push(format!("({a},{b}): {}", shown.join(" ; ")));
        records.push(Record::Partition {
            family: fam.clone(),
            alpha: a,
            beta: b,
            pieces,
            samples: rs,
        });
    }
    Ok(outcome(records, lines, ok))
}

/// `homog_map` on the first `prefix` points of `A`, with the check that the
/// `X`-points of the prefix go onto an initial segment of `Y`.
pub fn homog_pairs(a: &IntervalSet, x: PointSet, y: PointSet, prefix: u64) -> Result<Outcome> {
    let order = Arc::new(CanonicalOrder(a.clone()));
    let g = homog_map(a, order, x.clone(), y.clone(), prefix)?;
    let pts: Vec<Ordinal> = (0..prefix).map_while(|i| a.enum_element(i)).collect();
    let mut pairs = Vec::new();
    for p in &pts {
        let v = g
            .apply(p)
            .ok_or_else(|| Error::Witness(format!("g undefined at {p}")))?;
        pairs.push((p.clone(), v));
    }
    let mut img: Vec<Ordinal> = pairs.iter().filter(|(p, _)| x.contains(p)).map(|(_, v)| v.clone()).collect();
    img.sort_by_key(|v| a.enum_index(v));
    let want: Vec<Ordinal> = (0..)
        .map_while(|i| a.enum_element(i))
        .filter(|p| y.contains(p))
        .take(img.len())
        .collect();
    let ok = img == want;
    let line = format!("{} pairs; X-prefix of {} points onto an initial segment of Y: {ok}", pairs.len(), img.len());
    let rec = Record::HomogPairs {
        a: a.clone(),
        x,
        y,
        pairs,
    };
    Ok(outcome(vec![rec], vec![line], ok))
}

fn parse_mono(s: &str) -> Result<MonotoneSpec> {
    let bad = || Error::Parse(format!("bad map spec {s:?}"));
    let num = |t: &str| t.trim().parse::<u64>().map_err(|_| bad());
    let mut parts = s.splitn(2, ':');
    let head = parts.next().unwrap_or("");
    let rest = parts.next().unwrap_or("");
    Ok(match head {
        "id" => MonotoneSpec::Identity,
        "affine" => {
            let (m, a) = rest.split_once(':').ok_or_else(bad)?;
            MonotoneSpec::Affine { mul: num(m)?, add: num(a)? }
        }
        "block" => MonotoneSpec::YBlock {
            block: num(rest)? as u32,
        },
        "finite" => MonotoneSpec::Finite {
            pairs: rest
                .split(',')
                .filter(|p| !p.is_empty())
                .map(|p| {
                    let (a, b) = p.split_once('-').ok_or_else(bad)?;
                    Ok((num(a)?, num(b)?))
                })
                .collect::<Result<_>>()?,
        },
        _ => return Err(bad()),
    })
}

/// A seeded monotone map: affine, a `y` block, or a finite run in either
/// direction.
pub fn random_mono(rng: &mut ChaCha8Rng) -> MonotoneSpec {
    match rng.gen_range(0..4) {
        0 => MonotoneSpec::Affine {
            mul: rng.gen_range(1..4),
            add: rng.gen_range(0..40),
        },
        1 => MonotoneSpec::YBlock {
            block: rng.gen_range(0..12),
        },
        dir => {
            let len = rng.gen_range(2..40u64);
            let start = rng.gen_range(0..2000u64);
            let mut ys: Vec<u64> = (0..len).map(|_| rng.gen_range(0..4000)).collect();
            ys.sort_unstable();
            ys.dedup();
            if dir == 3 {
                ys.reverse();
            }
            MonotoneSpec::Finite {
                pairs: ys.into_iter().enumerate().map(|(i, v)| (start + i as u64, v)).collect(),
            }
        }
    }
}

fn witness_escape(
    mul: u64,
    add: u64,
    h: &[String],
    random: usize,
    n: u64,
    blocks: u32,
    seed: u64,
) -> Result<Outcome> {
    if mul == 0 {
        return Err(Error::Parse("--mul must be positive".into()));
    }
    let y = WitnessY::affine(mul, add);
    let mut specs = h.iter().map(|s| parse_mono(s)).collect::<Result<Vec<_>>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    specs.extend((0..random).map(|_| random_mono(&mut rng)));
    let maps = specs.iter().map(|s| s.build(&y)).collect::<Result<Vec<Arc<dyn Injection>>>>()?;
    let mut ok = true;
    let mut histograms = Vec::new();
    for (s, m) in specs.iter().zip(&maps) {
        let counts = block_agreements(m.as_ref(), &y, blocks);
        let special = special_blocks(&counts);
        ok &= special.len() <= 1;
        histograms.push(json!({ "map": s, "agreements": counts, "special": special }));
    }
    let cert = monotone_escape(&maps, &y, n, 48)?;
    let lines = vec![
        serde_json::to_string(&cert)?,
        format!("{} maps; at most one special block each: {ok}", specs.len()),
    ];
    let records = vec![
        Record::Summary {
            ok,
            detail: json!({ "histograms": histograms }),
        },
        Record::MonoEscape {
            mul,
            add,
            h: specs,
            n,
            cert,
        },
    ];
    Ok(outcome(records, lines, ok))
}

fn extend_fuzz(universe: usize, max_term: usize, max_terms: usize, with_fun: bool, sample: u64) -> Result<Outcome> {
    let rep = lemma_grid(universe, max_term, max_terms, with_fun, sample.max(1))?;
    let ok = rep.counterexamples.is_empty();
    let lines = vec![
        format!(
            "{} instances, {} extensions, {} cross-checked",
            rep.instances, rep.extensions, rep.cross_checked
        ),
        format!("{} counterexamples", rep.counterexamples.len()),
    ];
    let rec = Record::Summary {
        ok,
        detail: serde_json::to_value(&rep)?,
    };
    Ok(outcome(vec![rec], lines, ok))
}

/// Inputs of one `engine-run`.
#[derive(Clone, Debug)]
pub struct EngineRunSpec {
    pub a: IntervalSet,
    pub b: PointSet,
    pub c: PointSet,
    pub perms: usize,
    pub terms: Vec<Term>,
    pub k: usize,
    pub prefix: u64,
    pub seed: u64,
    pub budget: u64,
}

/// A registry of seeded finite-support permutations of `a`.
pub fn perm_registry(a: &IntervalSet, count: usize, seed: u64) -> Result<TermContext> {
    let mut ctx = TermContext::new();
    for (i, f) in sample_finite_support(count, 4, a, 24, seed).into_iter().enumerate() {
        let ext = finite_support(&f)?;
        let dom = ext.domain().clone();
        ctx.register_fun(format!("f{i}"), Arc::new(ext), Some(dom));
    }
    Ok(ctx)
}

fn engine_events(name: &str, events: &[EngineEvent]) -> Vec<Record> {
    events
        .iter()
        .filter_map(|e| match e {
            EngineEvent::Task0 {
                step,
                point,
                range_side,
                pair,
                ..
            } => Some(Record::Task0 {
                engine: name.to_string(),
                step: *step,
                point: point.clone(),
                range_side: *range_side,
                pair: pair.clone(),
            }),
            EngineEvent::Task1(c) => Some(Record::Witness {
                engine: name.to_string(),
                cert: c.clone(),
            }),
            EngineEvent::Idle { .. } => None,
        })
        .collect()
}

/// Point sets whose text form reads back; lazily defined images do not.
fn replayable(s: &PointSet) -> bool {
    s.to_string().parse::<PointSet>().is_ok_and(|t| t == *s)
}

fn engine_record(h: &EngineHandle, y: &str, split: Option<(PointSet, PointSet)>) -> Vec<Record> {
    h.with(|s| {
        let cfg = s.config();
        let mut out = vec![Record::Engine {
            name: cfg.name.clone(),
            a: cfg.frame.a.clone(),
            y: y.to_string(),
            snapshot: cfg.ctx.len(),
            pairs: s.g().clone(),
            split: split.filter(|(b, c)| replayable(b) && replayable(c)),
        }];
        out.extend(engine_events(&cfg.name, s.events()));
        out
    })
}

pub fn engine_run(spec: &EngineRunSpec) -> Result<Outcome> {
    let ctx = perm_registry(&spec.a, spec.perms, spec.seed)?;
    for t in &spec.terms {
        if let Some(id) = t.atoms().iter().filter_map(|a| a.id()).find(|i| i.0 as usize >= ctx.len()) {
            return Err(Error::Parse(format!("{t} mentions f{}, but only {} maps are registered", id.0, ctx.len())));
        }
    }
    let state = EngineState::new(EngineConfig {
        name: "g".into(),
        frame: Frame::split(spec.a.clone(), spec.b.clone(), spec.c.clone()),
        kappa: IntervalSet::naturals(),
        y: YSpec::Swap.build(),
        ctx: ctx.clone(),
        budget: spec.budget,
        schedule: Task1Schedule::canonical_for(&ctx),
    })?;
    let h = EngineHandle::new(state);
    let certs = h.with(|s| s.witness(&spec.terms, spec.k, 0))?;
    h.with(|s| s.saturate_prefix(spec.prefix))?;
    h.with(|s| s.verify_certs())?;
    let mut onto = true;
    h.with(|s| {
        for p in (0..spec.prefix).map_while(|i| spec.a.enum_element(i)) {
            onto &= s.g().in_dom(&p) && s.g().in_ran(&p);
        }
    });
    let alphas: Vec<String> = certs.iter().map(|c| c.alpha.to_string()).collect();
    let lines = vec![
        format!("{} witnesses: {}", certs.len(), alphas.join(" ")),
        format!("prefix {} inside domain and range: {onto}", spec.prefix),
    ];
    let mut records = vec![
        Record::Registry {
            entries: registry_entries(&ctx)?,
        },
        Record::YMap {
            name: "y".into(),
            spec: YSpec::Swap,
        },
    ];
    records.extend(engine_record(&h, "y", Some((spec.b.clone(), spec.c.clone()))));
    Ok(outcome(records, lines, onto && certs.len() == spec.k))
}

/// Registry, `y`, and every engine of a Key-Lemma build.
pub fn keylemma_records(kl: &KeyLemmaBuild) -> Result<Vec<Record>> {
    let mut records = vec![
        Record::Registry {
            entries: registry_entries(&kl.ctx)?,
        },
        Record::YMap {
            name: "y".into(),
            spec: YSpec::Swap,
        },
    ];
    for (p, h) in kl.engines.iter().enumerate() {
        let b = kl.catalog.pairs()[p].b.clone();
        records.extend(engine_record(h, "y", Some((b, kl.k.clone()))));
    }
    Ok(records)
}

fn capture(kl: &KeyLemmaBuild, mut tail: Vec<Record>) -> Result<Vec<Record>> {
    let mut records = keylemma_records(kl)?;
    records.append(&mut tail);
    Ok(records)
}

fn keylemma(cat: (PairCatalog, PointSet), xs: &[PointSet], prefix: u64, budget: u64) -> Result<Outcome> {
    let mut kl = KeyLemmaBuild::new(cat.0, cat.1, YSpec::Swap.build(), budget);
    kl.build_all()?;
    let mut lines = Vec::new();
    let mut tail = Vec::new();
    let mut ok = true;
    for x in xs {
        let hw = kl.homog_word(x)?;
        let onto = kl.check_onto_k(&hw.word, x, prefix);
        if let Err(e) = &onto {
            lines.push(format!("{x}: {e}"));
        }
        ok &= onto.is_ok();
        let mut samples = Vec::new();
        for p in x.prefix(prefix) {
            if let Some(v) = word_eval_extended(&hw.word, &kl.ctx, &p)? {
                samples.push((p, v));
            }
        }
        lines.push(format!("{x}: word {} onto K on prefix {prefix}: {}", hw.word, onto.is_ok()));
        tail.push(Record::Homog {
            x: x.clone(),
            k: kl.k.clone(),
            word: hw.word,
            samples,
        });
    }
    let checked = kl.verify_certificates()?;
    lines.push(format!("{} generators, {checked} certificates", kl.fs.len()));
    Ok(outcome(capture(&kl, tail)?, lines, ok))
}

/// A seeded word of length `1..=max_len` over the generators and their inverses.
pub fn random_word(kl: &KeyLemmaBuild, max_len: usize, rng: &mut ChaCha8Rng) -> Term {
    let len = rng.gen_range(1..=max_len.max(1));
    Term(
        (0..len)
            .map(|_| {
                let f = kl.fs[rng.gen_range(0..kl.fs.len())];
                if rng.gen_bool(0.5) {
                    Atom::Sym(f)
                } else {
                    Atom::SymInv(f)
                }
            })
            .collect(),
    )
}

fn intransitive(
    cat: (PairCatalog, PointSet),
    mut words: Vec<Term>,
    random: usize,
    max_len: usize,
    n: &Ordinal,
    seed: u64,
    budget: u64,
) -> Result<Outcome> {
    let mut kl = KeyLemmaBuild::new(cat.0, cat.1, YSpec::Swap.build(), budget);
    kl.build_all()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if !kl.fs.is_empty() {
        words.extend((0..random).map(|_| random_word(&kl, max_len, &mut rng)));
    }
    let mut lines: Vec<String> = kl
        .fs
        .iter()
        .enumerate()
        .map(|(p, f)| format!("f{} generates pair {p}", f.0))
        .collect();
    let mut tail = Vec::new();
    for w in words {
        let cert = kl.intransitive_cert(&w, n, budget)?;
        lines.push(format!("{w}: escapes <{}, {}> with {} covers", cert.alpha, cert.y_alpha, cert.covers.len()));
        tail.push(Record::Escape {
            kappa: kl.kappa().clone(),
            y: "y".into(),
            cert,
        });
    }
    Ok(outcome(capture(&kl, tail)?, lines, true))
}

/// The full trace of a generic run: registry, `r`, rounds, and escapes.
pub fn generic_records(run: &GenericRun) -> Result<Vec<Record>> {
    let mut rounds = Vec::new();
    for rr in &run.rounds {
        rounds.extend(engine_record(&rr.engine, "r", Some((rr.spec.x.clone(), rr.spec.y.clone()))));
    }
    let base = run.base.len();
    let escapes: Vec<Record> = run
        .r_log()
        .into_iter()
        .map(|cert| Record::REscape {
            y: "r".into(),
            snapshot: base,
            cert,
        })
        .collect();
    let mut records = vec![
        Record::Registry {
            entries: registry_entries(&run.ctx)?,
        },
        Record::YMap {
            name: "r".into(),
            spec: YSpec::Finite {
                pairs: run.r.with(|s| s.map().clone()),
            },
        },
    ];
    records.extend(rounds);
    records.extend(escapes);
    Ok(records)
}

fn verify_file(path: &std::path::Path) -> Result<Outcome> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match verify_log(std::io::BufReader::new(file)) {
        Ok(rep) => {
            let mut lines = vec![serde_json::to_string(&rep.checked)?];
            lines.extend(rep.failures.iter().cloned());
            lines.push(format!("{} records, {} failures", rep.records, rep.failures.len()));
            Ok(outcome(vec![], lines, rep.ok()))
        }
        Err(e) => Ok(outcome(vec![], vec![format!("unreadable trace: {e}")], false)),
    }
}
