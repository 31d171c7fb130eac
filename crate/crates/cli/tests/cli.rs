use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_attack-synth")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn workspace_root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR")).parent().and_then(Path::parent).unwrap()
}

#[test]
fn pin_attack_ends_on_the_secret() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let report = dir.path().join("report.json");
    let o = run(&[
        "synthesize", "--target", "pci", "--secret", "1337", "--strategy", "model", "--seed", "7",
        "--trace-out", trace.to_str().unwrap(), "--report-out", report.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("step,entropy_bits,input,observation_id,cost"));
    let last: Vec<&str> = csv.lines().last().unwrap().split(',').collect();
    assert_eq!(&last[1..4], &["0.000000", "1337", "4"]);

    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["strategy", "seed", "steps", "h_init", "h_final", "rows", "queries", "cache", "wall_time_secs"] {
        assert!(r.get(key).is_some(), "report lacks {key}");
    }
    assert_eq!(r["strategy"], "model");
    assert_eq!(r["h_final"], 0.0);
    assert_eq!(r["steps"].as_u64().unwrap() as usize, csv.lines().count() - 1);
    assert!(r["cache"]["hits"].is_u64());
}

#[test]
fn constant_time_target_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let o = run(&["synthesize", "--target", "pcs", "--strategy", "model", "--report-out", report.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["h_init"], r["h_final"]);
    assert_eq!(r["outcome"], "exhausted");
}

#[test]
fn step_budget_exits_three() {
    let o = run(&["synthesize", "--target", "pci", "--secret", "1337", "--strategy", "model", "--max-steps", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn same_seed_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut csvs = Vec::new();
    for (i, strategy) in ["sa-inc", "sa-inc", "sa"].iter().enumerate() {
        let p = dir.path().join(format!("{i}.csv"));
        let o = run(&["synthesize", "--target", "si", "--strategy", strategy, "--seed", "7", "--trace-out", p.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0));
        csvs.push(fs::read(&p).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0], csvs[2]);
}

#[test]
fn invalid_configuration_is_rejected() {
    let bad = [
        vec!["synthesize", "--target", "pci", "--secret", "12a4"],
        vec!["synthesize", "--target", "pci", "--secret", "123"],
        vec!["synthesize", "--target", "pci", "--strategy", "greedy"],
        vec!["synthesize", "--target", "pci", "--max-steps", "0"],
        vec!["synthesize", "--target", "pci", "--cooling", "1.5"],
        vec!["synthesize", "--target", "nope"],
    ];
    for args in bad {
        let o = run(&args);
        assert_ne!(o.status.code(), Some(0), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn dot_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "synthesize", "--target", "si", "--secret", "QB", "--seed", "1", "--emit-dot", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    for f in ["psi_0.dot", "psi_1.dot", "knowledge.dot"] {
        assert!(fs::read_to_string(dir.path().join(f)).unwrap().starts_with("digraph"));
    }
}

#[test]
fn count_command() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("c.smt");
    fs::write(&f, "(and)").unwrap();
    let o = run(&["count", f.to_str().unwrap()]);
    assert!(stdout(&o).contains("count 10000"), "{}", stdout(&o));
    fs::write(&f, "(<= h \"MZ\")").unwrap();
    let o = run(&["count", f.to_str().unwrap(), "--alphabet", "upper", "--length", "2"]);
    assert!(stdout(&o).contains("count 338"));
    assert!(stdout(&o).contains("log2 8.400879"));
    fs::write(&f, "(<= h \"MZ\"").unwrap();
    let o = run(&["count", f.to_str().unwrap(), "--alphabet", "upper", "--length", "2"]);
    assert_ne!(o.status.code(), Some(0));
    assert!(!o.stderr.is_empty());
}

#[test]
fn validate_command() {
    for name in ["pci", "pcs", "se", "si", "scoi", "io"] {
        let o = run(&["validate", "--target", name, "--samples", "100"]);
        assert_eq!(o.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let dir = tempfile::tempdir().unwrap();
    let overlap = dir.path().join("overlap.dsl");
    fs::write(
        &overlap,
        "(domain \"AB\" 2)\n(var h string high)\n(var l string low)\n(obs 10 (<= h l))\n(obs 50 (>= h l))\n",
    )
    .unwrap();
    let o = run(&["validate", "--target", overlap.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let empty = dir.path().join("empty.dsl");
    fs::write(&empty, "(domain \"AB\" 2)\n(var h string high)\n(var l string low)\n").unwrap();
    let o = run(&["validate", "--target", empty.to_str().unwrap()]);
    assert_ne!(o.status.code(), Some(0));
}

#[test]
fn exported_targets_match_shipped_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["export-targets", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    for name in ["pci", "pcs", "se", "si", "scoi", "io"] {
        let fresh = fs::read_to_string(dir.path().join(format!("{name}.dsl"))).unwrap();
        let shipped = fs::read_to_string(workspace_root().join("targets").join(format!("{name}.dsl"))).unwrap();
        assert_eq!(fresh, shipped, "{name}");
    }
}

#[test]
fn shipped_file_runs_like_the_builtin() {
    let path = workspace_root().join("targets/si.dsl");
    let a = run(&["synthesize", "--target", path.to_str().unwrap(), "--secret", "KQ", "--seed", "3"]);
    let b = run(&["synthesize", "--target", "si", "--secret", "KQ", "--seed", "3"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
}
