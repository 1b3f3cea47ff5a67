//! Pairwise conditional independences, read off a DAG by d-separation or
//! off a covariance matrix through partial correlations.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivalence::dag_for_permutation;
use crate::error::{Error, Result};
use crate::linalg::Cholesky;
use crate::model::{CovarianceMatrix, DataMatrix, WeightedDag};
use crate::penalty::PenaltySpec;
use crate::permutation::Permutation;
use crate::pls::SolveMode;
use crate::search::restricted_minimizer;

/// Largest `p` for which all triplets `(i, j, S)` are enumerated.
pub const CI_CAP: usize = 12;
/// Largest `p` for the minimal I-map check.
pub const IMAP_CAP: usize = 10;
/// Partial-correlation zero tolerance on population covariances.
pub const PARTIAL_TOL: f64 = 1e-9;

/// `X_i ⊥ X_j | X_cond` with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CiRelation {
    pub i: usize,
    pub j: usize,
    pub cond: BTreeSet<usize>,
}

impl CiRelation {
    pub fn new(a: usize, b: usize, cond: BTreeSet<usize>) -> Result<Self> {
        if a == b || cond.contains(&a) || cond.contains(&b) {
            return Err(Error::IndexError {
                index: a,
                reason: "relation needs two distinct nodes outside the conditioning set".into(),
            });
        }
        Ok(Self {
            i: a.min(b),
            j: a.max(b),
            cond,
        })
    }
}

pub type CiSet = BTreeSet<CiRelation>;

/// d-separation of `i` and `j` given `s`, via the moral graph of the
/// ancestral set of `{i, j} ∪ s`.
pub fn d_separated(g: &WeightedDag, i: usize, j: usize, s: &BTreeSet<usize>) -> bool {
    let p = g.p();
    let parents: Vec<Vec<usize>> = (0..p).map(|v| g.parents(v).into_iter().collect()).collect();

    let mut anc = vec![false; p];
    let mut stack: Vec<usize> = s.iter().copied().chain([i, j]).collect();
    while let Some(v) = stack.pop() {
        if !anc[v] {
            anc[v] = true;
            stack.extend(parents[v].iter().copied());
        }
    }

    let mut adj = vec![vec![false; p]; p];
    for v in (0..p).filter(|&v| anc[v]) {
        let pa = &parents[v];
        for (a, &u) in pa.iter().enumerate() {
            adj[u][v] = true;
            adj[v][u] = true;
            for &w in &pa[a + 1..] {
                adj[u][w] = true;
                adj[w][u] = true;
            }
        }
    }

    let mut seen = vec![false; p];
    seen[i] = true;
    let mut stack = vec![i];
    while let Some(v) = stack.pop() {
        if v == j {
            return false;
        }
        for u in 0..p {
            if adj[v][u] && !seen[u] && !s.contains(&u) {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    true
}

fn check_cap(p: usize, cap: usize, what: &'static str) -> Result<()> {
    if p > cap {
        return Err(Error::TooLarge { what, size: p, cap });
    }
    Ok(())
}

/// Every canonical triplet `(i, j, S)` on `p` nodes, passed to `keep`.
fn collect_triplets<F>(p: usize, keep: F) -> CiSet
where
    F: Fn(usize, usize, &BTreeSet<usize>) -> bool + Sync,
{
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    pairs
        .par_iter()
        .flat_map_iter(|&(i, j)| {
            let rest: Vec<usize> = (0..p).filter(|&k| k != i && k != j).collect();
            let keep = &keep;
            (0u64..(1 << rest.len())).filter_map(move |mask| {
                let cond: BTreeSet<usize> = rest
                    .iter()
                    .enumerate()
                    .filter(|(b, _)| mask >> b & 1 == 1)
                    .map(|(_, &k)| k)
                    .collect();
                keep(i, j, &cond).then_some(CiRelation { i, j, cond })
            })
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

/// `I(G)`: all triplets d-separated in `g`.
pub fn pairwise_ci_set(g: &WeightedDag) -> Result<CiSet> {
    check_cap(g.p(), CI_CAP, "pairwise CI enumeration")?;
    Ok(collect_triplets(g.p(), |i, j, s| d_separated(g, i, j, s)))
}

/// `I(Σ)`: all triplets with zero partial correlation.
pub fn true_ci_set(sigma: &CovarianceMatrix) -> Result<CiSet> {
    check_cap(sigma.p(), CI_CAP, "pairwise CI enumeration")?;
    Ok(collect_triplets(sigma.p(), |i, j, s| {
        partial_precision(sigma, i, j, s).abs() <= PARTIAL_TOL
    }))
}

/// `(i, j)` entry of `(Σ_{A,A})⁻¹` for `A = {i, j} ∪ s`.
pub fn partial_precision(sigma: &CovarianceMatrix, i: usize, j: usize, s: &BTreeSet<usize>) -> f64 {
    let idx: Vec<usize> = [i, j].into_iter().chain(s.iter().copied()).collect();
    let sub = sigma.matrix().select(&idx, &idx);
    Cholesky::new(&sub)
        .expect("principal submatrix of a positive definite matrix")
        .inverse()[(0, 1)]
}

/// Union of `I(B(π))` over the given orderings.
pub fn union_ci_population(sigma: &CovarianceMatrix, perms: &[Permutation]) -> Result<CiSet> {
    let mut out = CiSet::new();
    for perm in perms {
        let (b, _) = dag_for_permutation(sigma, perm)?;
        out.extend(pairwise_ci_set(&b)?);
    }
    Ok(out)
}

/// Union of `I(B̂(π))` over the given orderings, fitting each `B̂(π)`.
pub fn union_ci_sample(x: &DataMatrix, perms: &[Permutation], penalty: &PenaltySpec, mode: SolveMode) -> Result<CiSet> {
    let mut out = CiSet::new();
    for perm in perms {
        let fit = restricted_minimizer(x, perm, penalty, mode)?;
        out.extend(pairwise_ci_set(&fit.b_hat)?);
    }
    Ok(out)
}

/// `I(G) ⊆ I(Σ)`, and deleting any single edge breaks the inclusion.
pub fn minimal_imap_check(g: &WeightedDag, sigma: &CovarianceMatrix) -> Result<bool> {
    check_cap(g.p(), IMAP_CAP, "minimal I-map check")?;
    if g.p() != sigma.p() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} nodes", sigma.p()),
            found: format!("{} nodes", g.p()),
        });
    }
    let truth = true_ci_set(sigma)?;
    if !pairwise_ci_set(g)?.is_subset(&truth) {
        return Ok(false);
    }
    for (i, j, _) in g.edges() {
        if pairwise_ci_set(&g.without_edge(i, j))?.is_subset(&truth) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples::*;
    use crate::sampling::stream_rng;
    use crate::sigma_of;
    use crate::DiagonalVariances;
    use proptest::prelude::*;
    use rand::Rng;

    fn set(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    fn rel(i: usize, j: usize, s: &[usize]) -> CiRelation {
        CiRelation::new(i, j, set(s)).unwrap()
    }

    fn diamond_truth() -> CiSet {
        [rel(0, 2, &[1, 3]), rel(1, 3, &[0, 2])].into()
    }

    #[test]
    fn chain_and_collider() {
        let chain = WeightedDag::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(d_separated(&chain, 0, 2, &set(&[1])));
        assert!(!d_separated(&chain, 0, 2, &set(&[])));
        let collider = WeightedDag::from_edges(3, &[(0, 1, 1.0), (2, 1, 1.0)]).unwrap();
        assert!(d_separated(&collider, 0, 2, &set(&[])));
        assert!(!d_separated(&collider, 0, 2, &set(&[1])));
    }

    #[test]
    fn descendant_of_collider_opens_path() {
        let g = WeightedDag::from_edges(4, &[(0, 1, 1.0), (2, 1, 1.0), (1, 3, 1.0)]).unwrap();
        assert!(d_separated(&g, 0, 2, &set(&[])));
        assert!(!d_separated(&g, 0, 2, &set(&[3])));
    }

    #[test]
    fn empty_graph_has_all_triplets() {
        let all = pairwise_ci_set(&WeightedDag::empty(3)).unwrap();
        assert_eq!(all.len(), 6);
        assert_eq!(true_ci_set(&CovarianceMatrix::identity(3)).unwrap(), all);
    }

    #[test]
    fn diamond_truth_and_union() {
        let sigma = diamond_sigma();
        assert_eq!(true_ci_set(&sigma).unwrap(), diamond_truth());
        let perms: Vec<Permutation> = Permutation::all(4).collect();
        assert_eq!(union_ci_population(&sigma, &perms).unwrap(), diamond_truth());
        // no single ordering is faithful
        let mut singles = BTreeSet::new();
        for perm in &perms {
            let (b, _) = dag_for_permutation(&sigma, perm).unwrap();
            let ci = pairwise_ci_set(&b).unwrap();
            assert!(ci.is_subset(&diamond_truth()));
            assert_ne!(ci, diamond_truth());
            assert!(minimal_imap_check(&b, &sigma).unwrap());
            singles.insert(ci);
        }
        // both single-relation graphs occur; one ordering from each suffices
        let one = [rel(0, 2, &[1, 3])].into();
        let two = [rel(1, 3, &[0, 2])].into();
        assert!(singles.contains(&one) && singles.contains(&two));
        let pick = |target: &CiSet| {
            perms
                .iter()
                .find(|p| pairwise_ci_set(&dag_for_permutation(&sigma, p).unwrap().0).unwrap() == *target)
                .unwrap()
                .clone()
        };
        let pair = [pick(&one), pick(&two)];
        assert_eq!(union_ci_population(&sigma, &pair).unwrap(), diamond_truth());
    }

    // Oracle: partial correlation by regressing both endpoints on the
    // conditioning set and correlating the residuals.
    fn residual_covariance(sigma: &CovarianceMatrix, i: usize, j: usize, s: &BTreeSet<usize>) -> f64 {
        use crate::equivalence::sem_coefficients;
        let ci = sem_coefficients(sigma, i, s).unwrap();
        let cj = sem_coefficients(sigma, j, s).unwrap();
        let mut v = sigma.get(i, j);
        for a in 0..sigma.p() {
            v -= ci.beta[a] * sigma.get(a, j) + cj.beta[a] * sigma.get(i, a);
            for b in 0..sigma.p() {
                v += ci.beta[a] * cj.beta[b] * sigma.get(a, b);
            }
        }
        v
    }

    #[test]
    fn example_ci_set_by_residual_oracle() {
        let sigma = example_sigma();
        let got = true_ci_set(&sigma).unwrap();
        let want: CiSet = collect_triplets(4, |i, j, s| residual_covariance(&sigma, i, j, s).abs() < 1e-9);
        assert_eq!(got, want);
        assert!(got.contains(&rel(1, 2, &[0])));
        assert!(minimal_imap_check(&example_dag_pi1().0, &sigma).unwrap());
    }

    #[test]
    fn imap_edge_cases() {
        let sigma = example_sigma();
        assert!(!minimal_imap_check(&WeightedDag::empty(4), &sigma).unwrap());
        let complete = WeightedDag::from_edges(3, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]).unwrap();
        assert!(!minimal_imap_check(&complete, &CovarianceMatrix::identity(3)).unwrap());
        assert!(matches!(
            pairwise_ci_set(&WeightedDag::empty(13)),
            Err(Error::TooLarge { .. })
        ));
    }

    fn random_sigma(p: usize, seed: u64) -> CovarianceMatrix {
        let mut rng = stream_rng(seed, 5);
        let mut edges = Vec::new();
        for i in 0..p {
            for j in (i + 1)..p {
                if rng.random_bool(0.4) {
                    edges.push((i, j, rng.random_range(0.5..1.5)));
                }
            }
        }
        let dag = WeightedDag::from_edges(p, &edges).unwrap();
        let omega = DiagonalVariances::new((0..p).map(|_| rng.random_range(0.5..2.0)).collect()).unwrap();
        sigma_of(&dag, &omega).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn union_over_orderings_is_exact(seed in 0u64..1000, p in 3usize..6) {
            let sigma = random_sigma(p, seed);
            let truth = true_ci_set(&sigma).unwrap();
            let mut union = CiSet::new();
            for perm in Permutation::all(p) {
                let (b, _) = dag_for_permutation(&sigma, &perm).unwrap();
                let ci = pairwise_ci_set(&b).unwrap();
                prop_assert!(ci.is_subset(&truth));
                union.extend(ci);
            }
            prop_assert_eq!(union, truth);
        }
    }
}
