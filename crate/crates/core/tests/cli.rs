use std::path::PathBuf;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_homperm"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("homperm-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn ordinal_add() {
    let o = run(&["ordinal", "add", "w^2+w", "w"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o).trim(), "w^2+w*2");
}

#[test]
fn extend_fuzz_reports_no_counterexamples() {
    let o = run(&["extend-fuzz", "--universe", "5", "--max-term", "3"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("0 counterexamples"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(run(&["ordinal", "add", "w^x", "1"]).status.code(), Some(2));
    assert_eq!(run(&["engine-run", "--budget", "0"]).status.code(), Some(2));
    assert_eq!(run(&["engine-run", "--budget", "3"]).status.code(), Some(3));
    assert_eq!(run(&["ordinal", "left-sub", "w", "3"]).status.code(), Some(1));
}

#[test]
fn every_trace_replays() {
    let cases: &[(&str, &[&str])] = &[
        ("ordinal", &["ordinal", "succ", "w*3"]),
        ("family", &["family-check", "--clopen", "2", "--depth", "2"]),
        ("orders", &["orders-build", "--prefix", "10"]),
        ("partition", &["partition", "--samples", "10"]),
        ("homog", &["homog-map", "--prefix", "200"]),
        ("escape", &["witness-escape", "--random", "6", "--n", "300"]),
        ("fuzz", &["extend-fuzz", "--universe", "4"]),
        ("engine", &["engine-run", "--prefix", "100"]),
        ("keylemma", &["keylemma", "--prefix", "60"]),
        ("intrans", &["intransitive-cert", "--random", "3"]),
        ("generic", &["generic-run", "--requirements", "6"]),
    ];
    for (name, args) in cases {
        let path = tmp(&format!("{name}.jsonl"));
        let mut a: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap();
        a.extend(["--out", p]);
        let o = run(&a);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
        let v = run(&["verify-log", p]);
        assert_eq!(v.status.code(), Some(0), "{name}: {}", stdout(&v));
    }
}

#[test]
fn tampered_trace_fails_replay() {
    let path = tmp("tamper.jsonl");
    let p = path.to_str().unwrap();
    assert_eq!(run(&["engine-run", "--prefix", "40", "--out", p]).status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    let bad = text.replacen("\"y_alpha\":\"1\"", "\"y_alpha\":\"9\"", 1);
    assert_ne!(bad, text);
    let bad_path = tmp("tamper-bad.jsonl");
    std::fs::write(&bad_path, bad).unwrap();
    assert_eq!(run(&["verify-log", bad_path.to_str().unwrap()]).status.code(), Some(1));
    std::fs::write(&bad_path, "not json\n").unwrap();
    assert_eq!(run(&["verify-log", bad_path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn identical_config_gives_identical_traces() {
    let cfg = tmp("run.cfg");
    std::fs::write(&cfg, "seed = 11\nperms = 3\nterms = x;f2.x^-1\nprefix = 80\n").unwrap();
    let (a, b) = (tmp("det-a.jsonl"), tmp("det-b.jsonl"));
    for out in [&a, &b] {
        let o = run(&["engine-run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}
