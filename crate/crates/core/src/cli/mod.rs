//! Command-line entry point. Every command writes a JSON-lines trace to
//! `--out` when given and prints a short human summary to stdout.
//!
//! Exit codes: 0 success, 1 property failure, 2 usage error, 3 budget
//! exhaustion.

pub mod commands;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::error::Error;
use crate::ordcore::Ordinal;
use crate::trace::{write_records, Record};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_BUDGET: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "homperm", version)]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Ambient ordinal; its meaning depends on the command.
    #[arg(long, global = true, value_parser = parse_ordinal)]
    pub lambda: Option<Ordinal>,
    /// Candidate budget for searches and engines.
    #[arg(long, global = true, value_parser = parse_budget)]
    pub budget: Option<u64>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Trace destination (JSON lines).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Family or pair-catalog file (JSON).
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    /// key=value file mirroring the long flags; explicit flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Ordinal arithmetic: add, left-sub, succ, parse.
    Ordinal { op: String, args: Vec<String> },
    /// Check (N2) on a family file or a generated clopen family.
    FamilyCheck(FamilySource),
    /// Build the coherent orders and log rank prefixes.
    OrdersBuild {
        #[command(flatten)]
        source: FamilySource,
        #[arg(long, default_value_t = 20)]
        prefix: u64,
    },
    /// Partition `A_α ∩ A_β` into agreement pieces and sample agreements.
    Partition {
        #[command(flatten)]
        source: FamilySource,
        #[arg(long)]
        alpha: Option<usize>,
        #[arg(long)]
        beta: Option<usize>,
        #[arg(long, default_value_t = 100)]
        samples: usize,
    },
    /// The homogeneity map `g` with `g[X] = Y` inside `A = [0, λ)`.
    HomogMap {
        #[arg(long, default_value = "evens")]
        x: String,
        #[arg(long, default_value = "nat%3=0")]
        y: String,
        #[arg(long, default_value_t = 500)]
        prefix: u64,
    },
    /// Escape a family of monotone maps along the witness `y`.
    WitnessEscape {
        #[arg(long, default_value_t = 1)]
        mul: u64,
        #[arg(long, default_value_t = 0)]
        add: u64,
        /// Map specs: `id`, `affine:M:A`, `block:I`, `finite:a-b,c-d`.
        #[arg(long = "h", value_delimiter = ';')]
        h: Vec<String>,
        /// Add this many seeded random monotone maps.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long, default_value_t = 0)]
        n: u64,
        #[arg(long, default_value_t = 13)]
        blocks: u32,
    },
    /// Exhaustive one-step extension grid.
    ExtendFuzz {
        #[arg(long, default_value_t = 5)]
        universe: usize,
        #[arg(long = "max-term", default_value_t = 3)]
        max_term: usize,
        #[arg(long = "max-terms", default_value_t = 2)]
        max_terms: usize,
        #[arg(long = "with-fun")]
        with_fun: bool,
        #[arg(long, default_value_t = 997)]
        sample: u64,
    },
    /// Run the back-and-forth engine on `A = [0, λ)` with `g[B] = C`.
    EngineRun {
        #[arg(long, default_value = "evens")]
        b: String,
        #[arg(long, default_value = "nat%3=0")]
        c: String,
        /// Seeded finite-support permutations in the registry.
        #[arg(long, default_value_t = 2)]
        perms: usize,
        /// Terms separated by `;`, e.g. `x;f0.x`.
        #[arg(long, default_value = "x;f0.x")]
        terms: String,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 300)]
        prefix: u64,
    },
    /// Build the Key-Lemma generators and homogeneity words.
    Keylemma {
        #[arg(long = "x", value_delimiter = ';')]
        x: Vec<String>,
        #[arg(long, default_value_t = 200)]
        prefix: u64,
    },
    /// Intransitivity certificates for words over the generators.
    IntransitiveCert {
        #[arg(long = "word", value_delimiter = ';')]
        word: Vec<String>,
        /// Add this many seeded random words.
        #[arg(long, default_value_t = 0)]
        random: usize,
        #[arg(long = "max-len", default_value_t = 4)]
        max_len: usize,
        /// Escape pairs are sought at or above this point.
        #[arg(long, default_value = "0")]
        n: String,
    },
    /// Density-meeting run over seeded base permutations.
    GenericRun {
        #[arg(long, default_value_t = 15)]
        requirements: u64,
        #[arg(long = "r-steps", default_value_t = 400)]
        r_steps: u64,
    },
    /// Re-check every record of a trace without running any engine.
    VerifyLog { path: PathBuf },
}

#[derive(Args, Debug, Clone)]
pub struct FamilySource {
    /// Exponent `k` of the generated clopen family on `[0, ω^k)`.
    #[arg(long, default_value_t = 2)]
    pub clopen: u32,
    #[arg(long, default_value_t = 2)]
    pub depth: u64,
}

fn parse_ordinal(s: &str) -> Result<Ordinal, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_budget(s: &str) -> Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("budget must be positive".into()),
        Ok(n) => Ok(n),
        Err(e) => Err(e.to_string()),
    }
}

/// Result of one command before it is written out.
pub struct Outcome {
    pub records: Vec<Record>,
    pub lines: Vec<String>,
    pub ok: bool,
}

/// Reads `key=value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

const VALUED: [&str; 6] = ["--lambda", "--budget", "--seed", "--out", "--catalog", "--config"];

/// Position of the subcommand name, skipping global flags and their values.
fn subcommand_index(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = &argv[i];
        if VALUED.contains(&a.as_str()) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Splices config entries in after the subcommand name. Keys also given on
/// the command line are skipped, so explicit flags win.
fn merge_config(argv: &[String]) -> Result<Vec<String>, String> {
    let pos = argv.iter().position(|a| a == "--config");
    let path = match pos {
        Some(p) => argv.get(p + 1).cloned().ok_or("--config needs a path")?,
        None => match argv.iter().find_map(|a| a.strip_prefix("--config=")) {
            Some(p) => p.to_string(),
            None => return Ok(argv.to_vec()),
        },
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{path}: {e}"))?;
    let mut extra = Vec::new();
    for (k, v) in parse_config(&text)? {
        let flag = format!("--{k}");
        if argv.iter().any(|a| *a == flag || a.starts_with(&format!("{flag}="))) {
            continue;
        }
        match v.as_str() {
            "true" => extra.push(format!("--{k}")),
            "false" => {}
            _ => {
                extra.push(format!("--{k}"));
                extra.push(v);
            }
        }
    }
    let sub = subcommand_index(argv).map_or(argv.len(), |i| i + 1);
    let mut out = argv[..sub].to_vec();
    out.extend(extra);
    out.extend_from_slice(&argv[sub..]);
    Ok(out)
}

/// Arguments as logged in the trace header, minus the output and config
/// paths (config entries are already spliced in).
fn header_config(argv: &[String]) -> serde_json::Value {
    let mut kept = Vec::new();
    let mut skip = false;
    for a in argv.iter().skip(1) {
        if skip {
            skip = false;
            continue;
        }
        if a == "--out" || a == "--config" {
            skip = true;
            continue;
        }
        if a.starts_with("--out=") || a.starts_with("--config=") {
            continue;
        }
        kept.push(a.clone());
    }
    let mut m = BTreeMap::new();
    m.insert("argv", kept);
    serde_json::to_value(m).unwrap_or_default()
}

fn exit_for(e: &Error) -> i32 {
    match e {
        Error::Parse(_) | Error::Io(_) => EXIT_USAGE,
        Error::BudgetExhausted { .. } => EXIT_BUDGET,
        _ => EXIT_PROPERTY,
    }
}

pub fn run(argv: Vec<String>) -> i32 {
    let argv = match merge_config(&argv) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let name = subcommand_index(&argv).map(|i| argv[i].clone());
    let outcome = match commands::dispatch(&cli) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    for l in &outcome.lines {
        println!("{l}");
    }
    if let Some(path) = &cli.global.out {
        let mut records = vec![Record::Header {
            command: name.unwrap_or_default(),
            config: header_config(&argv),
        }];
        records.extend(outcome.records);
        let res = std::fs::File::create(path)
            .map_err(Error::from)
            .and_then(|f| write_records(std::io::BufWriter::new(f), &records));
        if let Err(e) = res {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    }
    if outcome.ok {
        EXIT_OK
    } else {
        EXIT_PROPERTY
    }
}
