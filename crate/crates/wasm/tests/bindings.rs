use serde_json::Value;
use sparsedag_wasm::{dag_for_ordering_json, penalty_curve_json, simulate_fit_json};

const SIGMA: &str = "6,4,-6,-30\n4,4,-4,-20\n-6,-4,7,39\n-30,-20,39,234\n";

#[test]
fn penalty_curve_is_flat_past_gamma_lambda() {
    let v: Value = serde_json::from_str(&penalty_curve_json("mcp", 1.0, Some(3.0), 6.0, 61).unwrap()).unwrap();
    let y: Vec<f64> = v["y"].as_array().unwrap().iter().map(|t| t.as_f64().unwrap()).collect();
    assert_eq!(y.len(), 61);
    assert_eq!(y[0], 0.0);
    assert!((y[30] - 1.5).abs() < 1e-12 && (y[60] - 1.5).abs() < 1e-12);
    assert_eq!(v["mu3"], 1.5);
    assert!(penalty_curve_json("mcp", 1.0, None, 6.0, 61).is_err());
    assert!(penalty_curve_json("ridge", 1.0, None, 6.0, 61).is_err());
}

#[test]
fn ordering_dag_matches_reference() {
    let v: Value = serde_json::from_str(&dag_for_ordering_json(SIGMA, "3, 2, 0, 1").unwrap()).unwrap();
    let edges: Vec<(u64, u64)> = v["edges"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| (e["from"].as_u64().unwrap(), e["to"].as_u64().unwrap()))
        .collect();
    assert_eq!(edges, vec![(0, 2), (0, 3), (1, 0), (2, 3)]);
    assert!((v["trace"].as_f64().unwrap() - 10.0).abs() < 1e-9);
    assert_eq!(v["min_trace"]["permutation"], serde_json::json!([3, 2, 0, 1]));
    assert!(dag_for_ordering_json(SIGMA, "0,1,2").is_err());
    assert!(dag_for_ordering_json("1,2\n2,1\n", "0,1").is_err());
}

#[test]
fn simulated_fit_is_reproducible() {
    let a = simulate_fit_json(5, 2000, 2, 1, "mcp", 0.1, Some(3.0)).unwrap();
    assert_eq!(a, simulate_fit_json(5, 2000, 2, 1, "mcp", 0.1, Some(3.0)).unwrap());
    let v: Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["support_recovered"], true);
    assert!(simulate_fit_json(40, 100, 2, 1, "l1", 0.1, None).is_err());
}
