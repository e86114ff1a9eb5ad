use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn psdxc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_psdxc"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json_file(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

#[test]
fn chained_commands_reconstruct_the_square() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let steps: [&[&str]; 5] = [
        &["slack", "build", "--instance", "cube", "--n", "2", "--out", "s.json"],
        &["fact", "embed", "--slack", "s.json", "--out", "f.json"],
        &["rescale", "run", "--slack", "s.json", "--fact", "f.json", "--out", "r.json", "--trace", "t.csv"],
        &["round", "run", "--slack", "s.json", "--fact", "r.json", "--delta", "max", "--out", "sys.json"],
        &["reconstruct", "--system", "sys.json", "--n", "2", "--slack", "s.json", "--report", "recon.json"],
    ];
    for args in steps {
        let o = psdxc(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let recon = json_file(d, "recon.json");
    assert_eq!(recon["accepted"].as_array().unwrap().len(), 4);
    assert_eq!(recon["matches_expected"], Value::Bool(true));
    assert!(fs::read_to_string(d.join("t.csv")).unwrap().starts_with("iteration,phi,lmax_u,lmax_v"));

    let manifest = json_file(d, "recon.json.manifest.json");
    assert_eq!(manifest["seed"], 7);
    assert_eq!(manifest["exit_code"], 0);
    let inputs = manifest["inputs"].as_object().unwrap();
    assert!(inputs.contains_key("sys.json") && inputs.contains_key("s.json"));
    assert_eq!(inputs["sys.json"].as_str().unwrap().len(), 64);
}

#[test]
fn verify_flags_a_wrong_factorization() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&psdxc(d, &["slack", "build", "--instance", "simplex", "--n", "2", "--out", "s.json"])), 0);
    assert_eq!(code(&psdxc(d, &["fact", "embed", "--slack", "s.json", "--out", "f.json"])), 0);
    let mut f = json_file(d, "f.json");
    f["U"][0]["entries"][0] = serde_json::json!(5.0);
    fs::write(d.join("bad.json"), f.to_string()).unwrap();
    let o = psdxc(d, &["fact", "verify", "--slack", "s.json", "--fact", "bad.json"]);
    assert_eq!(code(&o), 1);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["passed"], Value::Bool(false));
}

#[test]
fn pipeline_matches_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = ["pipeline", "--instance", "simplex", "--n", "3", "--seed", "11"];
    let a = psdxc(d, &args);
    let b = psdxc(d, &args);
    assert_eq!(code(&a), 0, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let rep: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(rep["verdict"], "match");
    assert!(rep.get("stage_ms").is_none());
}

#[test]
fn skip_rescale_reports_the_budget_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = psdxc(
        dir.path(),
        &["pipeline", "--instance", "cube", "--n", "2", "--skip-rescale", "--unbalanced"],
    );
    assert_eq!(code(&o), 1);
    let rep: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["budget_check"]["passed"], Value::Bool(false));
    assert_ne!(rep["verdict"], "match");
}

#[test]
fn precondition_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = psdxc(d, &["pipeline", "--instance", "cube", "--n", "5"]);
    assert_eq!(code(&o), 2);
    // the manifest still goes to stderr
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("\"exit_code\":2"), "{stderr}");
    assert_eq!(code(&psdxc(d, &["fact", "verify", "--slack", "nope.json", "--fact", "nope.json"])), 2);
    assert_eq!(code(&psdxc(d, &["slack", "build", "--instance", "hypercube", "--n", "2"])), 2);
}

#[test]
fn bound_calculators() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = psdxc(d, &["bounds", "eval", "--formula", "xc01", "--n", "16"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    let x = v["value"].as_f64().unwrap();
    assert!((4.25..=4.35).contains(&x), "{x}");
    assert!(v["assumptions"][0].as_str().unwrap().contains("log2"));

    let o = psdxc(d, &["bounds", "eval", "--formula", "grid", "--n", "2", "--r", "2"]);
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["inverse"].as_f64().unwrap(), 768.0);

    let o = psdxc(d, &["bounds", "eval", "--formula", "polygon", "--d", "64", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("key,value\n"));

    assert_eq!(code(&psdxc(d, &["bounds", "eval", "--formula", "counting", "--n", "4"])), 2);
}

#[test]
fn derivative_report_as_csv() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = psdxc(d, &["check", "derivatives", "--pairs", "30", "--report", "out.csv"]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(d.join("out.csv")).unwrap();
    assert_eq!(text.lines().count(), 31);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn rescales_the_adversarial_pair() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("s.json"), r#"{"entries": [[1]], "max_entry": 1}"#).unwrap();
    fs::write(
        d.join("f.json"),
        r#"{"r": 2,
            "U": [{"side": 2, "entries": [100, 0, 0, 0]}],
            "V": [{"side": 2, "entries": [0.01, 0, 0, 5]}]}"#,
    )
    .unwrap();
    let o = psdxc(d, &["rescale", "run", "--slack", "s.json", "--fact", "f.json", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8_lossy(&o.stdout);
    let phis: Vec<f64> = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(phis.windows(2).all(|w| w[1] < w[0]));
    assert!(*phis.last().unwrap() <= 1.0 * 1.05f64.powi(2));
}
