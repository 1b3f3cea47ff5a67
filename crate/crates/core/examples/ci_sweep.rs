//! Success rate of the sample-mode CI union on the diamond covariance over a
//! grid of (n, λ), with MCP (γ = 3) and all 24 orderings.
//!
//! cargo run --release --example ci_sweep -- 5000:0.003 50000:0.002

use rayon::prelude::*;
use sparsedag::ci::{union_ci_population, union_ci_sample};
use sparsedag::equivalence::dag_for_permutation;
use sparsedag::examples::diamond_sigma;
use sparsedag::penalty::PenaltySpec;
use sparsedag::permutation::Permutation;
use sparsedag::pls::SolveMode;
use sparsedag::sampling::sample_gaussian;

fn main() {
    let grid: Vec<(usize, f64)> = std::env::args()
        .skip(1)
        .map(|a| {
            let (n, l) = a.split_once(':').expect("arguments look like n:lambda");
            (n.parse().expect("n"), l.parse().expect("lambda"))
        })
        .collect();
    let grid = if grid.is_empty() {
        vec![
            (5000, 0.001),
            (5000, 0.002),
            (5000, 0.003),
            (5000, 0.004),
            (50000, 0.002),
        ]
    } else {
        grid
    };
    let sigma = diamond_sigma();
    let perms: Vec<Permutation> = Permutation::all(4).collect();
    let betamin = perms
        .iter()
        .flat_map(|p| dag_for_permutation(&sigma, p).unwrap().0.edges())
        .map(|(_, _, w)| w.abs())
        .fold(f64::INFINITY, f64::min);
    println!("smallest edge weight over the class: {betamin:.6}");
    let truth = union_ci_population(&sigma, &perms).unwrap();
    println!("n\tlambda\texact\tfound_all\tno_false_positive");
    for (n, lambda) in grid {
        let pen = PenaltySpec::mcp(lambda, 3.0).unwrap();
        let res: Vec<(bool, bool)> = (0..100u64)
            .into_par_iter()
            .map(|r| {
                let x = sample_gaussian(&sigma, n, 1000 + r).unwrap();
                let u = union_ci_sample(&x, &perms, &pen, SolveMode::Exact).unwrap();
                (truth.is_subset(&u), u.is_subset(&truth))
            })
            .collect();
        let count = |f: fn(&(bool, bool)) -> bool| res.iter().filter(|r| f(r)).count();
        println!(
            "{n}\t{lambda}\t{}\t{}\t{}",
            count(|r| r.0 && r.1),
            count(|r| r.0),
            count(|r| r.1)
        );
    }
}
