use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_oscillab"))
}

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> (Output, Value) {
    let out = bin().args(args).output().unwrap();
    let v = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (out, v)
}

#[test]
fn jn_norm_of_a_spike() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"dim":1,"depth":2,"values":[0,0,0,4]}"#);
    let (out, v) = run(&["jn-norm", "--p", "2", "--input", &g]);
    assert!(out.status.success());
    assert_eq!(v["jn_norm"], 1.5);
    assert_eq!(v["tool"], "oscillab");
    assert_eq!(v["command"], "jn-norm");
    assert_eq!(v["params"]["p"], 2.0);
}

#[test]
fn jn_norm_rational_mode_reports_a_fraction() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"dim":1,"depth":2,"values":[0,0,0,4]}"#);
    let (out, v) = run(&["jn-norm", "--p", "2", "--exact-rational", "--input", &g]);
    assert!(out.status.success());
    assert_eq!(v["jn_norm_pow_exact"], "9/4");
    let (out, _) = run(&["jn-norm", "--p", "1.5", "--exact-rational", "--input", &g]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gr_on_a_constant_weight() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(
        dir.path(),
        "c.json",
        r#"{"dim":1,"depth":3,"values":[1,1,1,1,1,1,1,1]}"#,
    );
    let (out, v) = run(&["gr", "--input", &g]);
    assert!(out.status.success());
    assert_eq!(v["epsilon"], 0.0);
    assert_eq!(v["p_of_eps"], "inf");
}

#[test]
fn gr_not_applicable_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "w.json", r#"{"dim":1,"depth":2,"values":[1,0,0,0]}"#);
    let (out, v) = run(&["gr", "--input", &g]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(v["applicable"], false);
    assert_eq!(v["pass"], false);
}

#[test]
fn good_lambda_jn_provider_passes() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"dim":1,"depth":2,"values":[0,0,0,4]}"#);
    let (out, v) = run(&[
        "good-lambda",
        "--provider",
        "jn",
        "--K",
        "4",
        "--gamma",
        "0.5",
        "--input",
        &g,
    ]);
    assert!(out.status.success());
    assert_eq!(v["pass"], true);
    assert_eq!(v["points"].as_array().unwrap().len(), 4);
    let (out, v) = run(&["good-lambda", "--exact-rational", "--p", "2", "--input", &g]);
    assert!(out.status.success());
    assert_eq!(v["levelset"]["exact"], true);
}

#[test]
fn csv_output_has_one_row_per_point() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"dim":1,"depth":2,"values":[0,0,0,4]}"#);
    let out = bin()
        .args(["good-lambda", "--format", "csv", "--input", &g])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().contains("lambda"));
    assert_eq!(lines.count(), 3 * 3 * 4);
}

#[test]
fn output_flag_writes_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"dim":1,"depth":2,"values":[0,1,2,3]}"#);
    let target = dir.path().join("out.json");
    let out = bin()
        .args(["bmo", "--input", &g, "--output", target.to_str().unwrap()])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(target).unwrap()).unwrap();
    assert!(v["bmo"].as_f64().unwrap() > 0.0);
}

#[test]
fn maximal_and_cz_on_a_subcube() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.json", r#"{"dim":1,"depth":2,"values":[0,0,0,4]}"#);
    let (out, v) = run(&["maximal", "--cube", "1:1", "--input", &g]);
    assert!(out.status.success());
    assert_eq!(v["max"], 4.0);
    let (out, v) = run(&["cz", "--lambda", "1.5", "--input", &g]);
    assert!(out.status.success());
    assert!(!v["stopping"]["cubes"].as_array().unwrap().is_empty());
    let (out, _) = run(&["cz", "--lambda", "0.5", "--input", &g]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn dp_norm_with_an_inline_functional() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(
        dir.path(),
        "g.json",
        r#"{"dim":1,"depth":3,"values":[0,1,0,1,3,0,2,0]}"#,
    );
    let (out, v) = run(&["dp-norm", "--p", "2", "--input", &g]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(v["fpw"]["hypothesis_pass"], true);
}

#[test]
fn bad_input_exits_one_with_a_message() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "bad.json", r#"{"dim":1,"depth":2,"values":[0,1]}"#);
    let out = bin().args(["bmo", "--input", &g]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));
    let out = bin().args(["bmo"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn gen_is_reproducible_and_feeds_the_metric_commands() {
    let dir = tempfile::tempdir().unwrap();
    let a = bin()
        .args(["gen", "--kind", "random-planar-space", "--points", "30", "--seed", "5"])
        .output()
        .unwrap();
    let b = bin()
        .args(["gen", "--kind", "random-planar-space", "--points", "30", "--seed", "5"])
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
    let s = write(dir.path(), "s.json", std::str::from_utf8(&a.stdout).unwrap());
    let space: Value = serde_json::from_str(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    let n = space["weights"].as_array().unwrap().len();
    let vals: Vec<f64> = (0..n).map(|i| (i % 7) as f64).collect();
    let f = write(dir.path(), "f.json", &serde_json::to_string(&vals).unwrap());
    let ones = write(dir.path(), "w.json", &serde_json::to_string(&vec![1.0; n]).unwrap());

    let (out, v) = run(&["metric-doubling", "--input", &s]);
    assert!(out.status.success());
    assert!(v["doubling"]["profile"]["c_mu"].as_f64().unwrap() >= 1.0);

    let (out, v) = run(&["metric-vitali", "--input", &s, "--values", &f, "--radius", "2"]);
    assert!(out.status.success());
    assert_eq!(v["cover"]["pass"], true);

    let (out, v) = run(&[
        "metric-jn",
        "--input",
        &s,
        "--values",
        &f,
        "--radius",
        "2",
        "--identity",
    ]);
    assert!(out.status.success());
    assert!(v["identity"]["relative_gap"].as_f64().unwrap() <= 1e-9);

    let (out, v) = run(&["metric-gr", "--input", &s, "--values", &ones, "--radius", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(v["epsilon"]["epsilon"], 0.0);

    let (out, v) = run(&[
        "metric-good-lambda",
        "--input",
        &s,
        "--values",
        &f,
        "--radius",
        "2",
        "--p",
        "2",
    ]);
    assert!(out.status.success());
    assert_eq!(v["pass"], true);
}

#[test]
fn gen_grid_round_trips_through_jn_norm() {
    let dir = tempfile::tempdir().unwrap();
    let a = bin()
        .args(["gen", "--kind", "bmo-log", "--dim", "2", "--depth", "3"])
        .output()
        .unwrap();
    assert!(a.status.success());
    let g = write(dir.path(), "g.json", std::str::from_utf8(&a.stdout).unwrap());
    let (out, v) = run(&["jn-norm", "--family", "polynomial", "--degree", "1", "--input", &g]);
    assert!(out.status.success());
    assert!(v["jn_norm"].as_f64().unwrap() > 0.0);
}
