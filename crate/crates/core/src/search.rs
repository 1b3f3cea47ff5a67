//! DAG estimators built from neighbourhood regressions: the restricted
//! minimiser for one ordering, the global minimiser by dynamic programming
//! over orderings, and a brute-force oracle for very small graphs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::{is_dag, DataMatrix, WeightedDag};
use crate::penalty::PenaltySpec;
use crate::permutation::Permutation;
use crate::pls::{fixed_support_solve, restricted_pls, subset_table, Gram, PlsSolution, SolveMode, SubsetTable};

pub const DP_CAP: usize = 18;
pub const EXHAUSTIVE_CAP: usize = 4;
pub const DEFAULT_PERMUTATION_CAP: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum FitMode {
    Restricted {
        permutation: Permutation,
        solver: SolveMode,
    },
    DpExact,
    Exhaustive,
}

/// The orderings consistent with an estimated DAG.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatedPermutations {
    /// Lexicographically smallest consistent ordering.
    pub canonical: Permutation,
    /// Consistent orderings in lexicographic order, at most `cap` of them.
    pub listed: Vec<Permutation>,
    /// Total number of consistent orderings; `None` when `p` is too large
    /// to count.
    pub count: Option<u128>,
    /// `listed` is incomplete.
    pub capped: bool,
}

pub fn estimated_permutations(b_hat: &WeightedDag, cap: usize) -> EstimatedPermutations {
    let listed = b_hat.consistent_permutations(cap);
    let count = b_hat.count_consistent_permutations();
    let capped = match count {
        Some(c) => c > listed.len() as u128,
        None => true,
    };
    EstimatedPermutations {
        canonical: b_hat.canonical_permutation(),
        listed,
        count,
        capped,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub b_hat: WeightedDag,
    pub objective: f64,
    pub column_objectives: Vec<f64>,
    /// `‖x_j − Xβ̂_j‖² / n`.
    pub variances_hat: Vec<f64>,
    pub est_permutations: EstimatedPermutations,
    pub penalty: PenaltySpec,
    pub mode: FitMode,
    /// Some column reported a rank-deficient design.
    pub rank_deficient: bool,
    /// Some column found more than one optimal support.
    pub multiple_optima: bool,
    /// Every column solve met its convergence criterion.
    pub converged: bool,
}

/// `(1/2n)‖X − XB‖²_F + Σ_ij ρ_λ(|B_ij|)`, evaluated directly on the data.
pub fn pls_score(x: &DataMatrix, b: &Matrix, penalty: &PenaltySpec) -> Result<f64> {
    let xb = x.matrix().matmul(b)?;
    let r = x.matrix().sub(&xb);
    let rss: f64 = r.as_slice().iter().map(|v| v * v).sum();
    Ok(rss / (2.0 * x.n() as f64) + penalty.matrix(b))
}

fn assemble(x: &DataMatrix, columns: Vec<PlsSolution>, penalty: &PenaltySpec, mode: FitMode) -> Result<FitResult> {
    let p = x.p();
    let mut b = Matrix::zeros(p, p);
    for (j, sol) in columns.iter().enumerate() {
        for i in 0..p {
            if i != j {
                b[(i, j)] = sol.theta[i];
            }
        }
    }
    let b_hat = WeightedDag::new(b)?;
    let column_objectives: Vec<f64> = columns.iter().map(|c| c.objective).collect();
    let variances_hat = columns
        .iter()
        .map(|c| 2.0 * (c.objective - penalty.vector(&c.theta)))
        .collect();
    Ok(FitResult {
        objective: column_objectives.iter().sum(),
        est_permutations: estimated_permutations(&b_hat, DEFAULT_PERMUTATION_CAP),
        b_hat,
        column_objectives,
        variances_hat,
        penalty: *penalty,
        mode,
        rank_deficient: columns.iter().any(|c| c.rank_deficient),
        multiple_optima: columns.iter().any(|c| c.multiple_optima),
        converged: columns.iter().all(|c| c.converged),
    })
}

/// `B̂(π)`: node `j` regressed on its candidate parents `S_j(π)`.
pub fn restricted_minimizer(
    x: &DataMatrix,
    perm: &Permutation,
    penalty: &PenaltySpec,
    mode: SolveMode,
) -> Result<FitResult> {
    let p = x.p();
    if perm.len() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("permutation of length {p}"),
            found: format!("length {}", perm.len()),
        });
    }
    let g = x.scaled_gram();
    let columns = (0..p)
        .into_par_iter()
        .map(|j| {
            let gram = Gram::for_node(&g, j, x.n());
            let column_mode = match mode {
                SolveMode::CoordinateDescent { restarts, seed } => SolveMode::CoordinateDescent {
                    restarts,
                    seed: seed.wrapping_add(j as u64),
                },
                m => m,
            };
            restricted_pls(&gram, &perm.candidate_parents(j), penalty, column_mode)
        })
        .collect::<Result<Vec<_>>>()?;
    assemble(
        x,
        columns,
        penalty,
        FitMode::Restricted {
            permutation: perm.clone(),
            solver: mode,
        },
    )
}

/// Position of a global subset mask (which never contains `j`) in node
/// `j`'s table over `{0..p} \ {j}`.
#[inline]
fn local_mask(mask: usize, j: usize) -> usize {
    (mask & ((1 << j) - 1)) | ((mask >> (j + 1)) << j)
}

/// Global minimiser over all DAGs.
///
/// For every node the best restricted value over every candidate set is
/// tabulated, then `M(W) = min_{j∈W} [best_j(W \ {j}) + M(W \ {j})]` is
/// solved over subsets `W`, choosing `j` as the sink of `W`.
pub fn global_minimizer_dp(x: &DataMatrix, penalty: &PenaltySpec) -> Result<FitResult> {
    let p = x.p();
    if p > DP_CAP {
        return Err(Error::DpCapExceeded { p, cap: DP_CAP });
    }
    let g = x.scaled_gram();
    let grams: Vec<Gram> = (0..p).map(|j| Gram::for_node(&g, j, x.n())).collect();
    let tables: Vec<SubsetTable> = (0..p)
        .into_par_iter()
        .map(|j| {
            let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
            subset_table(&grams[j], &others, penalty)
        })
        .collect::<Result<Vec<_>>>()?;

    let full = (1usize << p) - 1;
    let mut best = vec![f64::INFINITY; full + 1];
    let mut sink = vec![u8::MAX; full + 1];
    best[0] = 0.0;
    for w in 1..=full {
        for j in 0..p {
            if w >> j & 1 == 0 {
                continue;
            }
            let rest = w & !(1 << j);
            let v = tables[j].value(local_mask(rest, j)) + best[rest];
            if v < best[w] {
                best[w] = v;
                sink[w] = j as u8;
            }
        }
    }

    let mut columns: Vec<Option<PlsSolution>> = vec![None; p];
    let mut w = full;
    while w != 0 {
        let j = sink[w] as usize;
        let rest = w & !(1 << j);
        let lm = local_mask(rest, j);
        let mut sol = fixed_support_solve(&grams[j], &tables[j].argmin(lm), penalty);
        sol.multiple_optima = tables[j].has_tie(lm);
        columns[j] = Some(sol);
        w = rest;
    }
    let columns = columns
        .into_iter()
        .map(|c| c.expect("every node is a sink once"))
        .collect();
    assemble(x, columns, penalty, FitMode::DpExact)
}

/// Brute force over every labelled DAG; a test oracle for `p <= 4`.
pub fn exhaustive_global(x: &DataMatrix, penalty: &PenaltySpec) -> Result<FitResult> {
    let p = x.p();
    if p > EXHAUSTIVE_CAP {
        return Err(Error::TooLarge {
            what: "exhaustive DAG search",
            size: p,
            cap: EXHAUSTIVE_CAP,
        });
    }
    let g = x.scaled_gram();
    let grams: Vec<Gram> = (0..p).map(|j| Gram::for_node(&g, j, x.n())).collect();
    // fixed-support solutions per (node, parent bitmask)
    let mut cache: Vec<Vec<Option<PlsSolution>>> = vec![vec![None; 1 << p]; p];
    let pairs: Vec<(usize, usize)> = (0..p)
        .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
        .collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    for code in 0u64..(1 << pairs.len()) {
        let mut adj = Matrix::zeros(p, p);
        let mut parents = vec![0usize; p];
        for (b, &(i, j)) in pairs.iter().enumerate() {
            if code >> b & 1 == 1 {
                adj[(i, j)] = 1.0;
                parents[j] |= 1 << i;
            }
        }
        if is_dag(&adj).is_none() {
            continue;
        }
        let mut total = 0.0;
        for j in 0..p {
            let entry = &mut cache[j][parents[j]];
            if entry.is_none() {
                let pa: Vec<usize> = (0..p).filter(|&i| parents[j] >> i & 1 == 1).collect();
                *entry = Some(fixed_support_solve(&grams[j], &pa, penalty));
            }
            total += entry.as_ref().expect("filled").objective;
        }
        if best.as_ref().is_none_or(|(v, _)| total < *v) {
            best = Some((total, parents));
        }
    }
    let (_, parents) = best.expect("the empty graph is always a DAG");
    let columns = (0..p).map(|j| cache[j][parents[j]].clone().expect("cached")).collect();
    assemble(x, columns, penalty, FitMode::Exhaustive)
}

/// Number of labelled DAGs on `p` nodes, by the standard inclusion-exclusion
/// recurrence.
pub fn count_labelled_dags(p: usize) -> u128 {
    let mut a = vec![1u128];
    let binom = |n: usize, k: usize| -> u128 {
        let mut r = 1u128;
        for i in 0..k {
            r = r * (n - i) as u128 / (i + 1) as u128;
        }
        r
    };
    for n in 1..=p {
        let mut total: i128 = 0;
        for k in 1..=n {
            let term = binom(n, k) as i128 * (1i128 << (k * (n - k))) * a[n - k] as i128;
            total += if k % 2 == 1 { term } else { -term };
        }
        a.push(total as u128);
    }
    a[p]
}
