use std::path::PathBuf;
use std::process::Command;

use normlike::cli::{run, Outcome};
use normlike::io::InstanceFile;
use serde_json::Value;

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("data")
        .join(name)
        .display()
        .to_string()
}

fn normlike(args: &[&str]) -> Outcome {
    run(std::iter::once("normlike").chain(args.iter().copied()))
}

fn scratch(name: &str, text: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("normlike-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn jump_on_scalar_example() {
    let o = normlike(&["jump", "--instance", &data("scalar_pair.json"), "--m", "1,1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("jump: 0.5\n"), "{}", o.stdout);
    assert!(o.stdout.contains("effective: true\n"));
    assert!(o.stdout.contains("f_bar: 4.5\n"));
}

#[test]
fn recession_and_slopes() {
    let o = normlike(&["recession", "--instance", &data("scalar_pair.json"), "--x", "1,1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("f: 4.5\n"), "{}", o.stdout);
    assert!(o.stdout.contains("mu: (1, 4)\n"));
}

#[test]
fn eval_decomposes_phi() {
    let o = normlike(&["eval", "--instance", &data("scalar_pair.json"), "--x", "1,1"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    assert!(o.stdout.contains("phi: 8\n"), "{}", o.stdout);
    assert!(o.stdout.contains("phi0: 3.5\n"));

    let o = normlike(&["eval", "--instance", &data("scalar_pair.json"), "--x", "2,3"]);
    assert!(o.stdout.contains("phi: 16.2\n"), "{}", o.stdout);
    assert!(o.stdout.contains("f: 12.8\n"));
}

#[test]
fn json_goes_to_stdout() {
    let o = normlike(&["--json", "jump", "--instance", &data("scalar_pair.json"), "--m", "1,2"]);
    assert_eq!(o.code, 0);
    let v: Value = serde_json::from_str(&o.stdout).expect("stdout is JSON");
    let jump = v["values"]["jump"].as_f64().unwrap();
    assert!((jump - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(v["checks"][0]["status"], "pass");
    assert_eq!(v["instance_digest"].as_str().unwrap().len(), 64);
    assert!(o.stderr.contains("jump:"));
}

#[test]
fn metric_matches_normlike_value() {
    let o = normlike(&["metric", "--instance", &data("scalar_pair_model.json"), "--x", "2,3"]);
    assert_eq!(o.code, 0, "{}{}", o.stdout, o.stderr);
    assert!(o.stdout.contains("16.2"), "{}", o.stdout);
    assert!(!o.stdout.contains("[FAIL]"));
}

#[test]
fn metric_rejects_normlike_files() {
    let o = normlike(&["metric", "--instance", &data("scalar_pair.json"), "--x", "2,3"]);
    assert_eq!(o.code, 2);
}

#[test]
fn failed_check_exits_one() {
    let text = std::fs::read_to_string(data("scalar_pair.json"))
        .unwrap()
        .replace("\"kappa\": 1", "\"kappa\": 0.5")
        .replace("[[0]]", "[[-3]]");
    let path = scratch("indefinite.json", &text);
    let o = normlike(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(o.code, 1, "{}", o.stdout);
    assert!(o.stdout.contains("[FAIL]"));
}

#[test]
fn input_errors_exit_two() {
    let missing = normlike(&["eval", "--instance", "/nonexistent/x.json", "--x", "1"]);
    assert_eq!(missing.code, 2);

    let broken = scratch("broken.json", "{\"schema_version\": \"1\", ");
    let o = normlike(&["validate", "--instance", broken.to_str().unwrap()]);
    assert_eq!(o.code, 2);

    let kind = scratch("kind.json", "{\"schema_version\": \"1\", \"kind\": \"torus\"}");
    let o = normlike(&["validate", "--instance", kind.to_str().unwrap()]);
    assert_eq!(o.code, 2);
    assert!(o.stderr.contains("kind"), "{}", o.stderr);

    let o = normlike(&["eval", "--instance", &data("scalar_pair.json"), "--x", "1,2,3"]);
    assert_eq!(o.code, 2, "{}", o.stdout);

    assert_eq!(normlike(&["jump", "--instance", &data("scalar_pair.json")]).code, 2);
}

#[test]
fn gen_round_trips() {
    let o = normlike(&["--seed", "1f2e", "gen", "--k", "2", "--g", "3", "--index", "5"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let parsed = InstanceFile::parse(&o.stdout).expect("generated file parses");
    assert_eq!(parsed.to_json(), o.stdout);
    let inst = parsed.to_instance().unwrap();
    assert_eq!((inst.k(), inst.g()), (2, 3));

    let again = normlike(&["--seed", "1f2e", "gen", "--k", "2", "--g", "3", "--index", "5"]);
    assert_eq!(again.stdout, o.stdout);
    let other = normlike(&["--seed", "1f2e", "gen", "--k", "2", "--g", "3", "--index", "6"]);
    assert_ne!(other.stdout, o.stdout);

    let path = std::env::temp_dir().join(format!("normlike-gen-{}.json", std::process::id()));
    let o = normlike(&[
        "--seed",
        "1f2e",
        "gen",
        "--k",
        "2",
        "--g",
        "3",
        "--index",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(o.code, 0);
    assert_eq!(std::fs::read_to_string(&path).unwrap(), again.stdout);
    let v = normlike(&["validate", "--instance", path.to_str().unwrap()]);
    assert_eq!(v.code, 0, "{}", v.stdout);
    std::fs::remove_file(path).ok();
}

#[test]
fn suite_reports_are_deterministic() {
    let args = ["--seed", "abc", "check-suite", "--samples", "4", "--probes", "5"];
    let a = normlike(&args);
    let b = normlike(&args);
    assert_eq!(a.code, 0, "{}", a.stdout);
    assert_eq!(
        a.report.unwrap().deterministic_json(),
        b.report.unwrap().deterministic_json()
    );
}

#[test]
fn suite_on_a_file() {
    let o = normlike(&[
        "check-suite",
        "--instance",
        &data("scalar_pair_model.json"),
        "--probes",
        "10",
    ]);
    assert_eq!(o.code, 0, "{}", o.stdout);
    assert!(o.stdout.contains("metric.bridge"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_normlike");
    let ok = Command::new(bin)
        .args(["jump", "--instance", &data("scalar_pair.json"), "--m", "1,1"])
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("jump: 0.5"));

    let bad = Command::new(bin).args(["frobnicate"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    assert!(!bad.stderr.is_empty());
}
