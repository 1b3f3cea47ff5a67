use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn repo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn data(name: &str) -> String {
    repo().join("data").join(name).to_string_lossy().into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sparsedag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn assert_valid(schema_file: &str, instance: &Value) {
    let text = std::fs::read_to_string(repo().join("schemas").join(schema_file)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:#?}");
}

fn edge_set(v: &Value) -> Vec<(u64, u64, f64)> {
    v["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            (
                e["from"].as_u64().unwrap(),
                e["to"].as_u64().unwrap(),
                e["weight"].as_f64().unwrap(),
            )
        })
        .collect()
}

fn close(a: &[(u64, u64, f64)], b: &[(u64, u64, f64)]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| x.0 == y.0 && x.1 == y.1 && (x.2 - y.2).abs() < 1e-9)
}

#[test]
fn enumerate_class_lists_both_reference_dags() {
    let text = ok_stdout(&["enumerate-class", "--sigma", &data("example_2_2.csv")]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_valid("enumerate-class.schema.json", &v);
    assert_eq!(v["permutations_examined"], 24);
    let members = v["members"].as_array().unwrap();
    let pi1 = [(0, 2, -1.0), (0, 3, 4.0), (1, 0, 1.0), (2, 3, 9.0)];
    let pi2 = [
        (0, 3, 4.0),
        (1, 0, 1.0 / 3.0),
        (2, 0, -2.0 / 3.0),
        (2, 1, -4.0 / 7.0),
        (2, 3, 9.0),
    ];
    for want in [&pi1[..], &pi2[..]] {
        assert!(members.iter().any(|m| close(&edge_set(m), want)), "missing {want:?}");
    }
}

#[test]
fn mintrace_on_reference_covariance() {
    let v: Value = serde_json::from_str(&ok_stdout(&["mintrace", "--sigma", &data("example_2_2.csv")])).unwrap();
    assert_valid("mintrace.schema.json", &v);
    assert_eq!(v["permutation"], serde_json::json!([3, 2, 0, 1]));
    assert!((v["trace"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert_eq!(v["unique"], true);
}

#[test]
fn fit_is_valid_and_independent_of_thread_count() {
    let base = [
        "fit",
        "--data",
        &data("chain5.csv"),
        "--penalty",
        "mcp",
        "--lambda",
        "0.1",
        "--gamma",
        "3",
    ];
    let one = ok_stdout(&[&base[..], &["--threads", "1"]].concat());
    let four = ok_stdout(&[&base[..], &["--threads", "4"]].concat());
    assert_eq!(one, four);
    let v: Value = serde_json::from_str(&one).unwrap();
    assert_valid("fit.schema.json", &v);
    let support: Vec<(u64, u64)> = edge_set(&v).iter().map(|e| (e.0, e.1)).collect();
    assert_eq!(support, vec![(0, 1), (0, 3), (1, 2), (2, 3)]);
}

#[test]
fn restricted_fit_with_coordinate_descent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.json");
    let args = [
        "fit",
        "--data",
        &data("chain5.csv"),
        "--penalty",
        "scad",
        "--lambda",
        "0.05",
        "--gamma",
        "3.7",
        "--mode",
        "restricted",
        "--permutation",
        "3,2,1,0,4",
        "--solver",
        "cd",
        "--seed",
        "11",
        "--out",
        out.to_str().unwrap(),
    ];
    ok_stdout(&args);
    let first = std::fs::read(&out).unwrap();
    ok_stdout(&args);
    assert_eq!(first, std::fs::read(&out).unwrap());
    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_valid("fit.schema.json", &v);
    assert_eq!(v["mode"]["kind"], "restricted");
    assert_eq!(v["mode"]["solver"]["seed"], 11);
}

#[test]
fn missing_lambda_is_a_usage_error() {
    let out = run(&["fit", "--data", &data("chain5.csv"), "--penalty", "l1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lambda"));
}

#[test]
fn missing_gamma_and_permutation_name_their_flags() {
    let out = run(&[
        "fit",
        "--data",
        &data("chain5.csv"),
        "--penalty",
        "mcp",
        "--lambda",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--gamma"));
    let out = run(&[
        "fit",
        "--data",
        &data("chain5.csv"),
        "--penalty",
        "l1",
        "--lambda",
        "0.1",
        "--mode",
        "restricted",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--permutation"));
    let out = run(&["mintrace", "--sigma", "/nonexistent/sigma.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--sigma"));
}

#[test]
fn indefinite_covariance_is_a_computational_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "1,2\n2,1\n").unwrap();
    let out = run(&["mintrace", "--sigma", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not positive definite"));
}

#[test]
fn ci_scan_population_and_selected_orderings() {
    let text = ok_stdout(&["ci-scan", "--sigma", &data("diamond.csv")]);
    let lines: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    for l in &lines {
        assert_valid("ci-relation.schema.json", l);
    }
    assert_eq!(
        lines,
        vec![
            serde_json::json!({"i": 0, "j": 2, "cond": [1, 3]}),
            serde_json::json!({"i": 1, "j": 3, "cond": [0, 2]}),
        ]
    );
    // a single ordering sees at most one of the two relations
    let one = ok_stdout(&["ci-scan", "--sigma", &data("diamond.csv"), "--permutations", "0,1,2,3"]);
    assert!(one.lines().count() <= 1);
}

#[test]
fn ci_scan_sample_mode_needs_a_penalty() {
    let out = run(&["ci-scan", "--data", &data("chain5.csv")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--penalty"));
    let a = ok_stdout(&[
        "ci-scan",
        "--data",
        &data("chain5.csv"),
        "--penalty",
        "mcp",
        "--lambda",
        "0.1",
        "--gamma",
        "3",
        "--samples",
        "20",
        "--seed",
        "5",
    ]);
    for l in a.lines() {
        assert_valid("ci-relation.schema.json", &serde_json::from_str(l).unwrap());
    }
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("sim.toml");
    std::fs::write(
        &path,
        "p = 4\nn = 200\nd_target = 2\nreplicates = 6\nseed = 3\n\
         [penalty]\nfamily = \"mcp\"\nlambda = 0.1\ngamma = 3.0\n\
         [lambda_rule]\nkind = \"fixed\"\n",
    )
    .unwrap();
    path
}

#[test]
fn simulate_writes_json_and_csv_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let out1 = dir.path().join("a.json");
    let out2 = dir.path().join("b.json");
    for (out, threads) in [(&out1, "1"), (&out2, "3")] {
        ok_stdout(&[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
    }
    let a = std::fs::read(&out1).unwrap();
    assert_eq!(a, std::fs::read(&out2).unwrap());
    assert_eq!(
        std::fs::read(out1.with_extension("csv")).unwrap(),
        std::fs::read(out2.with_extension("csv")).unwrap()
    );
    let v: Value = serde_json::from_slice(&a).unwrap();
    assert_valid("simulate.schema.json", &v);
    assert_eq!(v["records"].as_array().unwrap().len(), 6);
    let csv = std::fs::read_to_string(out1.with_extension("csv")).unwrap();
    assert_eq!(csv.lines().count(), 7);

    // an explicit --seed overrides the file
    let reseeded = ok_stdout(&["simulate", "--config", config.to_str().unwrap(), "--seed", "4"]);
    let r: Value = serde_json::from_str(&reseeded).unwrap();
    assert_eq!(r["config"]["seed"], 4);
    assert_ne!(r["records"], v["records"]);
}

#[test]
fn simulate_sweep_and_json_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    std::fs::write(
        &config,
        r#"{"p": 3, "n": 100, "d_target": 1, "replicates": 4,
            "penalty": {"family": "l1", "lambda": 0.0},
            "lambda_rule": {"kind": "scaled", "c": 1.0}}"#,
    )
    .unwrap();
    let csv = dir.path().join("rows.csv");
    let text = ok_stdout(&[
        "simulate",
        "--config",
        config.to_str().unwrap(),
        "--ns",
        "100,400",
        "--csv",
        csv.to_str().unwrap(),
    ]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_valid("simulate.schema.json", &v);
    assert_eq!(v["reports"].as_array().unwrap().len(), 2);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 9);
}

#[test]
fn simulate_rejects_bad_configs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.toml");
    std::fs::write(
        &config,
        "p = 3\nn = 10\nd_target = 5\n[penalty]\nfamily = \"l1\"\nlambda = 0.1\n",
    )
    .unwrap();
    let out = run(&["simulate", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--config"));
    std::fs::write(
        &config,
        "p = 3\nn = 10\nd_target = 1\nbogus = 1\n[penalty]\nfamily = \"l1\"\nlambda = 0.1\n",
    )
    .unwrap();
    assert_eq!(
        run(&["simulate", "--config", config.to_str().unwrap()]).status.code(),
        Some(2)
    );
}

#[test]
fn diagnose_report_is_valid_and_seeded() {
    let args = [
        "diagnose",
        "--sigma",
        &data("example_2_2.csv"),
        "--penalty",
        "mcp",
        "--lambda",
        "0.1",
        "--gamma",
        "3",
        "--n",
        "400",
        "--re-directions",
        "400",
        "--seed",
        "9",
    ];
    let a = ok_stdout(&args);
    assert_eq!(a, ok_stdout(&args));
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_valid("diagnose.schema.json", &v);
    assert_eq!(v["min_trace_permutation"], serde_json::json!([3, 2, 0, 1]));
    assert_eq!(v["d_sigma"], 3);
}

#[test]
fn bundled_config_matches_its_schema() {
    let text = std::fs::read_to_string(repo().join("data/sim_equal_variance.toml")).unwrap();
    let v: Value = toml::from_str(&text).unwrap();
    assert_valid("sim-config.schema.json", &v);
}

#[test]
fn zero_threads_is_rejected() {
    let out = run(&["mintrace", "--sigma", &data("example_2_2.csv"), "--threads", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--threads"));
}
