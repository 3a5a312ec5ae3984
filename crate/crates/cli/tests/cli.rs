use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const FOUR_PACKAGES: &str = r#"{
  "dependencies": [
    {"from": "A@1", "on": "B", "versions": "{1}"},
    {"from": "A@1", "on": "C", "versions": "{1}"},
    {"from": "B@1", "on": "D", "formula": ">=1 & <3"},
    {"from": "C@1", "on": "D", "formula": ">=2"}
  ],
  "packages": ["A@1", "B@1", "C@1", "D@1", "D@2", "D@3"],
  "query": [{"on": "A", "versions": "{1}"}]
}"#;

const DIAMOND: &str = r#"{
  "dependencies": [
    {"from": "A@1", "on": "B", "versions": "{1}"},
    {"from": "A@1", "on": "C", "versions": "{1}"},
    {"from": "B@1", "on": "D", "versions": "{1}"},
    {"from": "C@1", "on": "D", "versions": "{2}"}
  ],
  "packages": ["A@1", "B@1", "C@1", "D@1", "D@2"],
  "query": [{"on": "A", "versions": "{1}"}]
}"#;

const LOWER_BOUNDS: &str = r#"{
  "dependencies": [
    {"from": "A@1", "on": "B", "formula": ">=1"},
    {"from": "A@1", "on": "C", "formula": ">=2"},
    {"from": "C@2", "on": "B", "formula": ">=2"}
  ],
  "packages": ["A@1", "B@1", "B@2", "B@3", "C@1", "C@2"],
  "query": [{"on": "A", "formula": ">=1"}]
}"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        Workspace { dir: TempDir::new().unwrap() }
    }

    fn file(&self, name: &str, text: &str) -> PathBuf {
        let path = self.dir.path().join(name);
        fs::write(&path, text).unwrap();
        path
    }
}

fn pkgcalc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pkgcalc")).args(args).output().unwrap()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let out = pkgcalc(args);
    (
        out.status.code().unwrap(),
        String::from_utf8(out.stdout).unwrap(),
        String::from_utf8(out.stderr).unwrap(),
    )
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn selected(stdout: &str) -> Vec<String> {
    let doc: serde_json::Value = serde_json::from_str(stdout).unwrap();
    doc["selected"].as_array().unwrap().iter().map(|v| v.as_str().unwrap().to_owned()).collect()
}

#[test]
fn resolves_four_packages() {
    let ws = Workspace::new();
    let repo = ws.file("four.json", FOUR_PACKAGES);
    for solver in ["sat", "brute"] {
        let (code, out, _) = run(&["resolve", "--repo", path(&repo), "--solver", solver]);
        assert_eq!(code, 0, "{solver}");
        assert_eq!(selected(&out), ["<root>@#1", "A@1", "B@1", "C@1", "D@2"]);
    }
}

#[test]
fn diamond_is_unresolvable() {
    let ws = Workspace::new();
    let repo = ws.file("diamond.json", DIAMOND);
    for solver in ["sat", "brute"] {
        let (code, out, err) = run(&["resolve", "--repo", path(&repo), "--solver", solver]);
        assert_eq!(code, 1);
        assert!(err.contains("unresolvable"), "{err}");
        let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
        assert_eq!(doc["unresolvable"], true);
    }
    let (code, out, _) = run(&["enumerate", "--repo", path(&repo)]);
    assert_eq!((code, out.trim()), (1, "[]"));
}

#[test]
fn minimum_version_selection() {
    let ws = Workspace::new();
    let repo = ws.file("bounds.json", LOWER_BOUNDS);
    let (code, out, err) = run(&["resolve", "--repo", path(&repo), "--solver", "mvs"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(selected(&out), ["<root>@#1", "A@1", "B@2", "C@2"]);

    let four = ws.file("four.json", FOUR_PACKAGES);
    let (code, _, err) = run(&["resolve", "--repo", path(&four), "--solver", "mvs"]);
    assert_eq!(code, 2);
    assert!(err.contains("lower-bound"), "{err}");
}

#[test]
fn generated_instances_follow_satisfiability() {
    let ws = Workspace::new();
    for (text, sat) in [("p cnf 3 2\n1 -2 3 0\n-1 2 -3 0\n", true), ("p cnf 3 2\n1 1 1 0\n-1 -1 -1 0\n", false)] {
        let dimacs = ws.file("f.cnf", text);
        let (code, repo, _) = run(&["gen-3sat", "--dimacs", path(&dimacs)]);
        assert_eq!(code, 0);
        let repo = ws.file("gen.json", &repo);
        let (code, _, _) = run(&["resolve", "--repo", path(&repo)]);
        assert_eq!(code == 0, sat, "{text}");
    }
}

#[test]
fn outputs_are_byte_identical() {
    let ws = Workspace::new();
    let repo = ws.file("four.json", FOUR_PACKAGES);
    let commands: [&[&str]; 5] = [
        &["resolve", "--prefer-fresh"],
        &["enumerate"],
        &["lower", "--to", "debian"],
        &["graph", "--dot", "--include-root-edges"],
        &["graph", "--build-order"],
    ];
    for cmd in commands {
        let mut args = cmd.to_vec();
        args.extend(["--repo", path(&repo)]);
        let a = pkgcalc(&args);
        let b = pkgcalc(&args);
        assert!(a.status.success(), "{cmd:?}");
        assert_eq!(a.stdout, b.stdout, "{cmd:?}");
    }
}

#[test]
fn validate_and_lift_round_trip() {
    let ws = Workspace::new();
    let repo = ws.file("four.json", FOUR_PACKAGES);
    let (_, out, _) = run(&["resolve", "--repo", path(&repo)]);
    let res = ws.file("r.json", &out);
    let (code, report, _) = run(&["validate", "--repo", path(&repo), "--resolution", path(&res)]);
    assert_eq!(code, 0);
    assert!(report.contains("\"valid\": true"));
    let (code, lifted, _) = run(&["lift", "--repo", path(&repo), "--resolution", path(&res)]);
    assert_eq!((code, lifted), (0, out));

    let bad = ws.file("bad.json", r#"{"selected": ["<root>@#1", "A@1", "B@1", "C@1", "D@1"]}"#);
    let (code, report, _) = run(&["validate", "--repo", path(&repo), "--resolution", path(&bad)]);
    assert_eq!(code, 1);
    assert!(report.contains("\"valid\": false"));
}

#[test]
fn translation_keeps_resolutions() {
    let ws = Workspace::new();
    let repo = ws.file("four.json", FOUR_PACKAGES);
    for (dialect, ext) in [("debian", "debctl"), ("cargo", "toml")] {
        let (code, text, err) = run(&["translate", "--input", path(&repo), "--to", dialect]);
        assert_eq!(code, 0, "{err}");
        let other = ws.file(&format!("four.{ext}"), &text);
        let (code, out, _) = run(&["resolve", "--repo", path(&other)]);
        assert_eq!(code, 0);
        assert_eq!(selected(&out), ["<root>@#1", "A@1", "B@1", "C@1", "D@2"]);
    }
}

#[test]
fn input_errors_exit_with_two() {
    let ws = Workspace::new();
    let missing = ws.dir.path().join("missing.json");
    assert_eq!(run(&["resolve", "--repo", path(&missing)]).0, 2);
    let broken = ws.file("broken.json", "{\"packages\": [\"A@1\"], \"colour\": 1}");
    let (code, _, err) = run(&["resolve", "--repo", path(&broken)]);
    assert_eq!(code, 2);
    assert!(err.starts_with("error:"), "{err}");
    let repo = ws.file("four.json", FOUR_PACKAGES);
    assert_eq!(run(&["resolve", "--repo", path(&repo), "--stack", "bogus"]).0, 2);
    assert_eq!(run(&["resolve", "--repo", path(&repo), "--solver", "magic"]).0, 2);
}
