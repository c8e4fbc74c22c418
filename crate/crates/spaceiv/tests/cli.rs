use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn spaceiv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spaceiv")).args(args).output().unwrap()
}

fn json_stdout(args: &[&str]) -> Value {
    let out = spaceiv(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn graphical_check_of_three_instrument_graph() {
    let v = json_stdout(&["check", "--graphical", path_str(&data("three_instruments.json"))]);
    assert_eq!(v["B1"], true);
    assert_eq!(v["B3"], true);
    assert_eq!(v["b1_paths"], 2);
    let sets: Vec<Value> = v["b3_checks"].as_array().unwrap().iter().map(|c| c["set"].clone()).collect();
    assert_eq!(sets, vec![serde_json::json!([1, 5]), serde_json::json!([2, 3])]);
}

#[test]
fn graphical_check_of_funnel_reports_witness() {
    let v = json_stdout(&["check", "--graphical", path_str(&data("funnel.json"))]);
    assert_eq!(v["B1"], true);
    assert_eq!(v["B3"], false);
    assert_eq!(v["b3_witness"]["set"], serde_json::json!([2, 5]));
    assert_eq!(v["b3_witness"]["cut_size"], 2);
}

#[test]
fn monte_carlo_genericity() {
    let v = json_stdout(&["check", "--monte-carlo", "50", path_str(&data("three_instruments.json"))]);
    assert_eq!(v["genericity"]["draws"], 50);
    assert_eq!(v["genericity"]["a1_and_a3"], 50);
    let v = json_stdout(&["check", "--monte-carlo", "20", path_str(&data("funnel.json"))]);
    assert_eq!(v["genericity"]["a1_only"], 20);
}

#[test]
fn algebraic_check_reports_a2_witness() {
    let v = json_stdout(&["check", path_str(&data("matched.json"))]);
    assert_eq!(v["A1"], true);
    assert_eq!(v["A2"], false);
    assert_eq!(v["a2_witness"], serde_json::json!([3]));
    assert_eq!(v["identifiable_coordinates"], serde_json::json!([]));
    let v = json_stdout(&["check", path_str(&data("example1.json"))]);
    assert_eq!(
        (v["A1"].clone(), v["A2"].clone(), v["A3"].clone()),
        (Value::Bool(true), Value::Bool(true), Value::Bool(true))
    );
}

#[test]
fn dot_output() {
    let out = spaceiv(&["check", "--dot", path_str(&data("three_instruments.json"))]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("digraph"));
    assert!(text.contains("X1 -> Y;"));
}

#[test]
fn simulate_is_deterministic_and_fit_finds_the_parent() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ex1.csv");
    let model = data("example1.json");
    let first = spaceiv(&["simulate", path_str(&model), "-n", "2000", "--seed", "7"]);
    let second = spaceiv(&["simulate", path_str(&model), "-n", "2000", "--seed", "7"]);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
    let other = spaceiv(&["simulate", path_str(&model), "-n", "2000", "--seed", "8"]);
    assert_ne!(first.stdout, other.stdout);
    fs::write(&csv, &first.stdout).unwrap();

    let fit = json_stdout(&["fit", path_str(&csv)]);
    assert_eq!(fit["support"], serde_json::json!([2]));
    assert_eq!(fit["accepted"], true);
    assert!((fit["beta"][1].as_f64().unwrap() - 1.0).abs() < 0.1);
    assert_eq!(fit["path"][0]["s"], 1);

    let tsls = json_stdout(&["fit", path_str(&csv), "--estimator", "tsls"]);
    assert_eq!(tsls["support"], serde_json::json!([2]));
    let ols = json_stdout(&["fit", path_str(&csv), "--method", "OLS-sparse"]);
    assert!(ols["path"].as_array().unwrap().is_empty());
}

#[test]
fn subset_modes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("ex1.csv");
    let out =
        spaceiv(&["simulate", path_str(&data("example1.json")), "-n", "2000", "--seed", "1", "-o", path_str(&csv)]);
    assert!(out.status.success() && out.stdout.is_empty());
    let v = json_stdout(&["subset", path_str(&csv), "--minimal"]);
    assert_eq!(v["size"], 1);
    assert_eq!(v["set"], serde_json::json!([2]));
    let v = json_stdout(&["subset", path_str(&csv), "--size", "2"]);
    assert_eq!(v["size"], 2);
}

fn error_json(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).unwrap()
}

#[test]
fn errors_are_machine_readable() {
    let v = error_json(&spaceiv(&["fit", "/nonexistent/data.csv"]));
    assert_eq!(v["error"], "io");
    let v = error_json(&spaceiv(&["fit"]));
    assert_eq!(v["error"], "usage");
    let v =
        error_json(&spaceiv(&["check", path_str(&data("example1.json")), "--a2-max-size", "3", "--monte-carlo", "x"]));
    assert_eq!(v["error"], "usage");

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"d":2,"m":1,"B":[[0,1],[1,0]],"A":[[1],[1]],"beta":[1,0]}"#).unwrap();
    let v = error_json(&spaceiv(&["simulate", path_str(&bad), "-n", "10"]));
    assert!(v["message"].as_str().unwrap().len() > 3);

    let csv = dir.path().join("short.csv");
    fs::write(&csv, "I1,X1,Y\n1,2,3\n").unwrap();
    let v = error_json(&spaceiv(&["fit", path_str(&csv)]));
    assert_eq!(v["error"], "invalid_sample_size");
}

const SMALL: [&str; 10] =
    ["--models", "8", "--sizes", "60,120", "--smax", "2", "--seed", "3", "--methods", "spaceIV,OLS-sparse,oracle-set"];

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

#[test]
fn bench_outputs_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut args = vec!["bench", "--out", path_str(&a)];
    args.extend(SMALL);
    let summary = json_stdout(&args);
    assert_eq!(summary["models"], 8);
    assert_eq!(summary["records"], 8 * 2 * 3);

    let mut args = vec!["bench", "--threads", "1", "--out", path_str(&b)];
    args.extend(SMALL);
    json_stdout(&args);
    for name in ["records.csv", "summary.csv", "rmse_by_n.csv", "sparsity_by_n.csv", "rmse_by_group.csv", "models.json"]
    {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }

    assert_eq!(header(&a.join("records.csv")), "model_id,group,n,method,rmse,correct_sparsity,correct_support");
    assert_eq!(
        header(&a.join("summary.csv")),
        "method,n,group,runs,failures,rmse_median,rmse_q1,rmse_q3,rmse_mean,frac_correct_sparsity,frac_correct_support"
    );
    assert_eq!(header(&a.join("rmse_by_n.csv")), "method,n,count,rmse_median,rmse_q1,rmse_q3");
    assert_eq!(header(&a.join("sparsity_by_n.csv")), "n,count,frac_correct_sparsity");
    assert_eq!(header(&a.join("rmse_by_group.csv")), "group,method,n,count,rmse_median,rmse_q1,rmse_q3");
    assert_eq!(header(&a.join("failures.csv")), "model_id,n,method,error");

    // One row per (method, n) and per (group, method) respectively.
    let rows = |name: &str| fs::read_to_string(a.join(name)).unwrap().lines().count() - 1;
    assert_eq!(rows("records.csv"), 48);
    assert_eq!(rows("summary.csv"), 3 * 2 * 4);
    assert_eq!(rows("rmse_by_n.csv"), 3 * 2);
    assert_eq!(rows("sparsity_by_n.csv"), 2);
    assert_eq!(rows("rmse_by_group.csv"), 3 * 3);

    let models: Value = serde_json::from_str(&fs::read_to_string(a.join("models.json")).unwrap()).unwrap();
    assert_eq!(models.as_array().unwrap().len(), 8);
    assert_eq!(models[0]["model"]["beta"].as_array().unwrap().len(), 20);

    let config: Value = serde_json::from_str(&fs::read_to_string(a.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["master_seed"], 3);
    // The written config reproduces the run.
    let c = dir.path().join("c");
    json_stdout(&["bench", "--config", path_str(&a.join("config.json")), "--out", path_str(&c)]);
    assert_eq!(fs::read(a.join("records.csv")).unwrap(), fs::read(c.join("records.csv")).unwrap());
}

#[test]
fn bench_rejects_bad_configuration() {
    let dir = tempfile::tempdir().unwrap();
    let out = path_str(dir.path());
    let v = error_json(&spaceiv(&["bench", "--models", "0", "--out", out]));
    assert_eq!(v["error"], "invalid_config");
    let v = error_json(&spaceiv(&["bench", "--methods", "lasso", "--out", out]));
    assert_eq!(v["error"], "format");
    let v = error_json(&spaceiv(&["bench", "--sizes", "10,200", "--out", out]));
    assert_eq!(v["error"], "invalid_config");
}
