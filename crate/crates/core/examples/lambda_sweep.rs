//! Coarse sweep of the constant `c` in `λ = c √((d + 1) log p / n)` for the
//! equal-variance recovery, null-model and error-scaling experiments.
//!
//! cargo run --release --example lambda_sweep -- 0.5 1 1.5 2 3

use sparsedag::penalty::PenaltySpec;
use sparsedag::sim::{run_experiment, scaled_lambda, LambdaRule, SimConfig, VarianceMode};

/// The null model keeps the `d = 2` in the λ rule so both use the same λ.
fn config(c: f64, n: usize, d_target: usize) -> SimConfig {
    SimConfig {
        p: 6,
        n,
        d_target,
        weight_range: [0.7, 1.3],
        variance_mode: VarianceMode::Equal { value: 1.0 },
        penalty: PenaltySpec::mcp(scaled_lambda(c, 6, 2, n), 3.0).unwrap(),
        lambda_rule: LambdaRule::Fixed,
        replicates: 100,
        seed: 20240607,
        fit: Default::default(),
    }
}

fn main() {
    let cs: Vec<f64> = std::env::args()
        .skip(1)
        .map(|a| a.parse().expect("c must be a number"))
        .collect();
    let cs = if cs.is_empty() {
        vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
    } else {
        cs
    };
    println!("c\tlambda@2000\trecovery\tnull_empty\tl2_400\tl2_1600\tratio");
    for c in cs {
        let rec = run_experiment(&config(c, 2000, 2)).unwrap();
        let null = run_experiment(&config(c, 2000, 0)).unwrap();
        let empty = null.records.iter().filter(|r| r.estimated_edges == 0).count();
        let a = run_experiment(&config(c, 400, 2)).unwrap();
        let b = run_experiment(&config(c, 1600, 2)).unwrap();
        println!(
            "{c}\t{:.4}\t{:.2}\t{empty}\t{:.4}\t{:.4}\t{:.3}",
            rec.lambda,
            rec.recovery_rate,
            a.mean_l2_err,
            b.mean_l2_err,
            a.mean_l2_err / b.mean_l2_err
        );
    }
}
