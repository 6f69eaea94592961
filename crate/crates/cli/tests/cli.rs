use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn dmtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dmtl")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Parsed JSON without wall-clock fields.
fn stable(text: &str) -> Value {
    fn strip(v: &mut Value) {
        match v {
            Value::Object(m) => {
                m.retain(|k, _| !k.to_lowercase().contains("time") && k != "total");
                m.values_mut().for_each(strip);
            }
            Value::Array(a) => a.iter_mut().for_each(strip),
            _ => {}
        }
    }
    let mut v: Value = serde_json::from_str(text).unwrap();
    strip(&mut v);
    v
}

fn assert_golden(o: &Output, name: &str) {
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let expected = std::fs::read_to_string(golden(name)).unwrap();
    assert_eq!(stable(&stdout(o)), stable(&expected), "{name}");
}

#[test]
fn check_immune() {
    let o = dmtl(&[
        "check",
        "--program",
        path(&fixture("immune.dmtl")),
        "--data",
        path(&fixture("immune.dtf")),
        "--fact",
        "Immune(james)@[7,10]",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "true\n");
}

#[test]
fn check_json_carries_every_result_field() {
    let o = dmtl(&[
        "check",
        "-p",
        path(&fixture("birthday.dmtl")),
        "-d",
        path(&fixture("birthday.dtf")),
        "-f",
        "Bday(t)@[0.5,0.5]",
        "--json",
        "--sequential",
    ]);
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["answer"], Value::Bool(false));
    assert_eq!(v["factType"], "T5");
    assert_eq!(v["winner"], "automata");
    assert_eq!(v["rounds"], 512);
    for k in ["inconsistent", "timings"] {
        assert!(v.get(k).is_some(), "{k}");
    }
    for k in ["total", "relevantRules", "preMaterialisation", "materialisation", "automata", "coalescing"] {
        assert!(v["timings"][k].is_f64(), "{k}");
    }
}

#[test]
fn check_round_limit_hands_over_to_the_automaton() {
    let o = dmtl(&[
        "check",
        "-p",
        path(&fixture("birthday.dmtl")),
        "-d",
        path(&fixture("birthday.dtf")),
        "-f",
        "Bday(t)@[30,30]",
        "--sequential",
        "--max-rounds",
        "5",
        "--json",
    ]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!((v["answer"].clone(), v["factType"].clone()), (Value::Bool(true), Value::from("T5")));
}

#[test]
fn load_and_usage_errors() {
    let o = dmtl(&["check", "-p", "/nonexistent.dmtl", "-d", path(&fixture("immune.dtf")), "-f", "A@[0,0]"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent.dmtl"));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.dmtl");
    std::fs::write(&bad, "P(X) :- Q(X) .\nP(X) :- DIAMONDPLUS[0,1] Q(Y) .\n").unwrap();
    let o = dmtl(&["analyze", "-p", path(&bad)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.dmtl"));

    let broken = dir.path().join("broken.dtf");
    std::fs::write(&broken, "P(a)@[0,1]\nP(a)@[0,\n").unwrap();
    let o = dmtl(&["materialize", "-p", path(&fixture("immune.dmtl")), "-d", path(&broken)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("2:"), "{}", String::from_utf8_lossy(&o.stderr));

    assert_eq!(dmtl(&["check"]).status.code(), Some(1));
    assert_eq!(dmtl(&["frobnicate"]).status.code(), Some(1));
    let o = dmtl(&["bench", "-p", "a", "-d", "b", "-q", "c", "--random-queries", "3"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn materialize_reports_round_limits() {
    let (prog, data) = (fixture("birthday.dmtl"), fixture("birthday.dtf"));
    let args = ["materialize", "-p", path(&prog), "-d", path(&data)];
    let o = dmtl(&[&args[..], &["--max-rounds", "3"]].concat());
    assert_eq!(o.status.code(), Some(3));
    assert_eq!(stdout(&o).lines().count(), 4);
    let o = dmtl(&["materialize", "-p", path(&fixture("immune.dmtl")), "-d", path(&fixture("immune.dtf")), "--json"]);
    assert_golden(&o, "materialize_immune.json");
}

#[test]
fn analyze_professor() {
    let o = dmtl(&["analyze", "-p", path(&fixture("professor.dmtl"))]);
    let dot = stdout(&o);
    assert!(dot.starts_with("digraph"));
    assert!(dot.contains("\"Chair\" -> \"FullProfessor\"") && dot.contains("\"FullProfessor\" -> \"Chair\""));
    let o = dmtl(&["analyze", "-p", path(&fixture("professor.dmtl")), "--json"]);
    assert_golden(&o, "analyze_professor.json");
    let o = dmtl(&["analyze", "-p", path(&fixture("professor.dmtl")), "--predicate", "AssistantProfessor", "--json"]);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["relevantRules"].as_array().unwrap().len(), 1);
}

#[test]
fn consistency() {
    let o =
        dmtl(&["consistency", "-p", path(&fixture("birthday.dmtl")), "-d", path(&fixture("birthday.dtf")), "--json"]);
    assert_golden(&o, "consistency_birthday.json");

    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("p.dmtl");
    std::fs::write(&p, "R :- DIAMONDMINUS[0,1] R .\nBOTTOM :- BOXPLUS[0,+inf) R, S .\n").unwrap();
    let d = dir.path().join("d.dtf");
    std::fs::write(&d, "R@[0,0]\nS@[0,0]\n").unwrap();
    let o = dmtl(&["consistency", "-p", path(&p), "-d", path(&d), "--trace"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.starts_with("false\n"));
    assert!(text.contains("digraph states"));
    let o = dmtl(&["consistency", "-p", path(&p), "-d", path(&d), "--max-states", "2"]);
    assert_eq!(o.status.code(), Some(3));

    let o = dmtl(&[
        "consistency",
        "-p",
        path(&fixture("university.dmtl")),
        "-d",
        path(&fixture("university.dtf")),
        "--trace",
    ]);
    let text = stdout(&o);
    assert!(text.starts_with("true\n# model window\n"));
    assert!(text.contains("Alumnus(sam)"));
}

#[test]
fn generate_is_deterministic() {
    let spec = golden("spec.json");
    let o = dmtl(&["generate", "--spec", path(&spec)]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), std::fs::read_to_string(golden("generate.dtf")).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.dtf");
    let o = dmtl(&["generate", "--spec", path(&spec), "-o", path(&out), "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 12);
    assert_ne!(text, std::fs::read_to_string(golden("generate.dtf")).unwrap());
}

#[test]
fn bench_report() {
    let dir = tempfile::tempdir().unwrap();
    let q = dir.path().join("q.dtf");
    std::fs::write(&q, "Bday(t)@[0,0]\nBday(t)@[2,2]\nBday(t)@[0.5,0.5]\n").unwrap();
    let (prog, data) = (fixture("birthday.dmtl"), fixture("birthday.dtf"));
    let args = ["bench", "-p", path(&prog), "-d", path(&data)];
    let o = dmtl(&[&args[..], &["-q", path(&q), "--sequential", "--json"]].concat());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["census"]["counts"], serde_json::json!({"T1": 1, "T4": 1, "T5": 1}));
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
    for k in ["query", "answer", "factType", "total", "coalescing", "rounds", "preMaterialisation"] {
        assert!(v["rows"][0].get(k).is_some(), "{k}");
    }
    let o = dmtl(&[&args[..], &["--random-queries", "4", "--seed", "1", "--sequential"]].concat());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("4 queries"));
}
