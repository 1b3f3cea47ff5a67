//! Bindings behind `www/index.html`. Each exported function takes plain
//! values and returns a JSON string; the `*_json` functions are the same
//! operations without the wasm-bindgen wrapper, so they can be tested natively.

use serde::Serialize;
use sparsedag::equivalence::{dag_for_permutation, min_trace_permutation, EnumerationMode, PERMUTATION_CAP};
use sparsedag::io::{read_matrix_csv, DagJson, EdgeJson};
use sparsedag::sampling::{sample_gaussian_with, stream_rng};
use sparsedag::search::global_minimizer_dp;
use sparsedag::sim::{random_dag_instance, LambdaRule, SimConfig, VarianceMode};
use sparsedag::{CovarianceMatrix, PenaltyFamily, PenaltySpec, Permutation};
use wasm_bindgen::prelude::*;

/// Largest graph the demo will fit; the exact search is exponential in p.
pub const DEMO_MAX_P: usize = 10;
pub const DEMO_MAX_N: usize = 20_000;

type Out = Result<String, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn penalty(family: &str, lambda: f64, gamma: Option<f64>) -> Result<PenaltySpec, String> {
    let family: PenaltyFamily = family.parse().map_err(err)?;
    let gamma = if family.needs_gamma() { gamma } else { None };
    PenaltySpec::new(family, lambda, gamma).map_err(err)
}

#[derive(Serialize)]
struct Curve {
    x: Vec<f64>,
    y: Vec<f64>,
    mu1: Option<f64>,
    mu2: Option<f64>,
    mu3: Option<f64>,
}

pub fn penalty_curve_json(family: &str, lambda: f64, gamma: Option<f64>, x_max: f64, points: usize) -> Out {
    let spec = penalty(family, lambda, gamma)?;
    if !(x_max > 0.0 && x_max.is_finite()) || !(2..=10_000).contains(&points) {
        return Err("x_max must be positive and points between 2 and 10000".into());
    }
    let x: Vec<f64> = (0..points).map(|k| x_max * k as f64 / (points - 1) as f64).collect();
    let y = x.iter().map(|&v| spec.value_abs(v)).collect();
    let k = spec.constants();
    serde_json::to_string(&Curve {
        x,
        y,
        mu1: k.mu1.value(),
        mu2: k.mu2.value(),
        mu3: k.mu3,
    })
    .map_err(err)
}

#[derive(Serialize)]
struct MinTraceSummary {
    permutation: Vec<usize>,
    trace: f64,
    unique: bool,
}

#[derive(Serialize)]
struct OrderingDag {
    p: usize,
    edges: Vec<EdgeJson>,
    variances: Vec<f64>,
    trace: f64,
    min_trace: Option<MinTraceSummary>,
}

pub fn dag_for_ordering_json(sigma_csv: &str, ordering: &str) -> Out {
    let sigma = CovarianceMatrix::new(read_matrix_csv(sigma_csv.as_bytes()).map_err(err)?).map_err(err)?;
    let mapping = ordering
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<usize>().map_err(|e| format!("ordering entry '{t}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let perm = Permutation::new(mapping).map_err(err)?;
    let (dag, variances) = dag_for_permutation(&sigma, &perm).map_err(err)?;
    let min_trace = if sigma.p() <= PERMUTATION_CAP {
        let mt = min_trace_permutation(&sigma, &EnumerationMode::Exact).map_err(err)?;
        Some(MinTraceSummary {
            permutation: mt.permutation.as_slice().to_vec(),
            trace: mt.trace,
            unique: mt.unique,
        })
    } else {
        None
    };
    serde_json::to_string(&OrderingDag {
        p: sigma.p(),
        edges: DagJson::new(&dag, None, None).edges,
        trace: variances.trace(),
        variances: variances.values().to_vec(),
        min_trace,
    })
    .map_err(err)
}

#[derive(Serialize)]
struct SimulatedFit {
    p: usize,
    n: usize,
    lambda: f64,
    truth: Vec<EdgeJson>,
    estimate: Vec<EdgeJson>,
    support_recovered: bool,
    objective: f64,
}

/// Draws an equal-variance SEM, samples `n` rows and fits the global
/// minimiser.
pub fn simulate_fit_json(
    p: usize,
    n: usize,
    d: usize,
    seed: u32,
    family: &str,
    lambda: f64,
    gamma: Option<f64>,
) -> Out {
    if !(2..=DEMO_MAX_P).contains(&p) || !(2..=DEMO_MAX_N).contains(&n) {
        return Err(format!("need 2 <= p <= {DEMO_MAX_P} and 2 <= n <= {DEMO_MAX_N}"));
    }
    let pen = penalty(family, lambda, gamma)?;
    let config = SimConfig {
        p,
        n,
        d_target: d.min(p - 1),
        weight_range: [0.7, 1.3],
        variance_mode: VarianceMode::Equal { value: 1.0 },
        penalty: pen,
        lambda_rule: LambdaRule::Fixed,
        replicates: 1,
        seed: seed.into(),
        fit: Default::default(),
    };
    config.validate().map_err(err)?;
    let mut rng = stream_rng(seed.into(), 0);
    let inst = random_dag_instance(&config, &mut rng).map_err(err)?;
    let x = sample_gaussian_with(&inst.sigma, n, &mut rng).map_err(err)?;
    let fit = global_minimizer_dp(&x, &pen).map_err(err)?;
    serde_json::to_string(&SimulatedFit {
        p,
        n,
        lambda,
        support_recovered: fit.b_hat.support() == inst.dag.support(),
        truth: DagJson::new(&inst.dag, None, None).edges,
        estimate: DagJson::new(&fit.b_hat, None, None).edges,
        objective: fit.objective,
    })
    .map_err(err)
}

fn js(r: Out) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn penalty_curve(
    family: &str,
    lambda: f64,
    gamma: Option<f64>,
    x_max: f64,
    points: usize,
) -> Result<String, JsValue> {
    js(penalty_curve_json(family, lambda, gamma, x_max, points))
}

#[wasm_bindgen]
pub fn dag_for_ordering(sigma_csv: &str, ordering: &str) -> Result<String, JsValue> {
    js(dag_for_ordering_json(sigma_csv, ordering))
}

#[wasm_bindgen]
pub fn simulate_fit(
    p: usize,
    n: usize,
    d: usize,
    seed: u32,
    family: &str,
    lambda: f64,
    gamma: Option<f64>,
) -> Result<String, JsValue> {
    js(simulate_fit_json(p, n, d, seed, family, lambda, gamma))
}
