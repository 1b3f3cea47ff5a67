//! Population-level structure of a covariance matrix: the DAG `B(π)` that
//! every ordering `π` induces, projection coefficients, invariant sets and
//! the minimum-trace ordering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{ldlt_decompose, Cholesky, Matrix};
use crate::model::{CovarianceMatrix, DiagonalVariances, WeightedDag, SUPPORT_TOL};
use crate::permutation::{factorial, permute_matrix, Permutation};
use crate::sampling::random_permutations;

pub type NodeSet = BTreeSet<usize>;

/// Absolute tolerance for `Cov(ε_j(S), X_i) = 0`.
pub const RESIDUAL_COV_TOL: f64 = 1e-9;

/// Largest `p` for which all `p!` orderings are enumerated.
pub const PERMUTATION_CAP: usize = 9;

/// Largest `p` for which subset collections (`2^(p-1)` per node) are built.
pub const SUBSET_CAP: usize = 14;

/// Weight resolution of the DAG deduplication key.
pub const DEDUP_RESOLUTION: f64 = 1e-9;

/// Returns `(B(π), Ω(π))` from the modified Cholesky factor of `P_π Σ⁻¹`.
pub fn dag_for_permutation(sigma: &CovarianceMatrix, perm: &Permutation) -> Result<(WeightedDag, DiagonalVariances)> {
    check_len(sigma.p(), perm)?;
    dag_from_precision(&sigma.precision(), perm)
}

fn check_len(p: usize, perm: &Permutation) -> Result<()> {
    if perm.len() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("permutation of length {p}"),
            found: format!("length {}", perm.len()),
        });
    }
    Ok(())
}

fn dag_from_precision(theta: &Matrix, perm: &Permutation) -> Result<(WeightedDag, DiagonalVariances)> {
    let p = perm.len();
    let f = ldlt_decompose(&permute_matrix(perm, theta)?)?;
    let mut b = Matrix::zeros(p, p);
    let mut omega = vec![0.0; p];
    for i in 0..p {
        let a = perm.position(i);
        omega[i] = f.d[a];
        for j in 0..p {
            let c = perm.position(j);
            if a > c {
                b[(i, j)] = f.strict_lower[(a, c)];
            }
        }
    }
    Ok((WeightedDag::new(b)?, DiagonalVariances::new(omega)?))
}

pub fn candidate_parents(perm: &Permutation, j: usize) -> NodeSet {
    perm.candidate_parents(j)
}

/// Population regression of `X_j` on `X_S`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemCoefficients {
    pub node: usize,
    pub set: NodeSet,
    pub beta: Vec<f64>,
    pub residual_variance: f64,
    pub support: NodeSet,
}

impl SemCoefficients {
    /// `Cov(ε_j(S), X_i) = Σ_ij − Σ_k β_k Σ_ki`.
    pub fn residual_covariance(&self, sigma: &CovarianceMatrix, i: usize) -> f64 {
        let mut c = sigma.get(self.node, i);
        for &k in &self.set {
            c -= self.beta[k] * sigma.get(k, i);
        }
        c
    }
}

fn check_set(p: usize, j: usize, s: &NodeSet) -> Result<()> {
    if j >= p {
        return Err(Error::IndexError {
            index: j,
            reason: format!("node outside 0..{p}"),
        });
    }
    if s.contains(&j) {
        return Err(Error::IndexError {
            index: j,
            reason: "node cannot be in its own neighbourhood".into(),
        });
    }
    if let Some(&k) = s.iter().find(|&&k| k >= p) {
        return Err(Error::IndexError {
            index: k,
            reason: format!("neighbourhood member outside 0..{p}"),
        });
    }
    Ok(())
}

pub fn sem_coefficients(sigma: &CovarianceMatrix, j: usize, s: &NodeSet) -> Result<SemCoefficients> {
    let p = sigma.p();
    check_set(p, j, s)?;
    let idx: Vec<usize> = s.iter().copied().collect();
    let mut beta = vec![0.0; p];
    let mut residual_variance = sigma.get(j, j);
    if !idx.is_empty() {
        let sub = sigma.matrix().select(&idx, &idx);
        let rhs: Vec<f64> = idx.iter().map(|&k| sigma.get(k, j)).collect();
        let coef = Cholesky::new(&sub)?.solve(&rhs);
        for (c, &k) in coef.iter().zip(&idx) {
            beta[k] = *c;
            residual_variance -= c * sigma.get(k, j);
        }
    }
    let support = idx.iter().copied().filter(|&k| beta[k].abs() > SUPPORT_TOL).collect();
    Ok(SemCoefficients {
        node: j,
        set: s.clone(),
        beta,
        residual_variance,
        support,
    })
}

/// `m_j(S)`, `M_j(S)` and, when requested, the whole collection `N_j(S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantSets {
    pub support: NodeSet,
    pub maximal: NodeSet,
    pub collection: Option<Vec<NodeSet>>,
}

pub fn invariant_set_collection(
    sigma: &CovarianceMatrix,
    j: usize,
    s: &NodeSet,
    enumerate: bool,
) -> Result<InvariantSets> {
    let p = sigma.p();
    let coef = sem_coefficients(sigma, j, s)?;
    let maximal = maximal_invariant_set(sigma, &coef);
    let collection = if enumerate {
        if p > SUBSET_CAP {
            return Err(Error::EnumerationTooLarge {
                what: "invariant set collection",
                required: 1u128 << (p - 1),
                cap: 1u128 << (SUBSET_CAP - 1),
            });
        }
        // every invariant set lies between m_j(S) and M_j(S); check each
        // candidate directly rather than trusting the interval
        let mut out = Vec::new();
        for t in subsets_excluding(p, j) {
            if sem_coefficients(sigma, j, &t)?.support == coef.support {
                out.push(t);
            }
        }
        Some(out)
    } else {
        None
    };
    Ok(InvariantSets {
        support: coef.support,
        maximal,
        collection,
    })
}

fn maximal_invariant_set(sigma: &CovarianceMatrix, coef: &SemCoefficients) -> NodeSet {
    let mut out = coef.support.clone();
    for i in 0..sigma.p() {
        if i != coef.node && !out.contains(&i) && coef.residual_covariance(sigma, i).abs() <= RESIDUAL_COV_TOL {
            out.insert(i);
        }
    }
    out
}

/// All subsets of `{0..p} \ {j}`, ordered by bitmask.
pub fn subsets_excluding(p: usize, j: usize) -> impl Iterator<Item = NodeSet> {
    let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
    let count = 1u64 << others.len();
    (0..count).map(move |mask| {
        others
            .iter()
            .enumerate()
            .filter(|(b, _)| mask >> b & 1 == 1)
            .map(|(_, &k)| k)
            .collect()
    })
}

/// `A_j(Σ)` (distinct supports) and `M_j(Σ)` (their maximal invariant sets).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupportCollections {
    pub supports: BTreeSet<NodeSet>,
    pub maximal: BTreeSet<NodeSet>,
}

pub fn support_collections(sigma: &CovarianceMatrix, j: usize) -> Result<SupportCollections> {
    let p = sigma.p();
    if p > SUBSET_CAP {
        return Err(Error::EnumerationTooLarge {
            what: "support collection",
            required: 1u128 << (p - 1),
            cap: 1u128 << (SUBSET_CAP - 1),
        });
    }
    check_set(p, j, &NodeSet::new())?;
    let mut supports = BTreeSet::new();
    let mut maximal = BTreeSet::new();
    for s in subsets_excluding(p, j) {
        let coef = sem_coefficients(sigma, j, &s)?;
        maximal.insert(maximal_invariant_set(sigma, &coef));
        supports.insert(coef.support);
    }
    Ok(SupportCollections { supports, maximal })
}

/// How orderings are visited when the class is too large to enumerate.
#[derive(Debug, Clone, PartialEq)]
pub enum EnumerationMode {
    Exact,
    Sampled {
        samples: usize,
        seed: u64,
        reference: Option<WeightedDag>,
    },
}

impl EnumerationMode {
    /// Exact when `p <= PERMUTATION_CAP`, otherwise sampled.
    pub fn auto(p: usize, samples: usize, seed: u64) -> Self {
        if p <= PERMUTATION_CAP {
            Self::Exact
        } else {
            Self::Sampled {
                samples,
                seed,
                reference: None,
            }
        }
    }
}

/// Caps the topological orders taken from a reference DAG in sampled mode.
pub const REFERENCE_ORDER_CAP: usize = 1000;

fn visit_permutations<F>(p: usize, mode: &EnumerationMode, mut f: F) -> Result<u128>
where
    F: FnMut(&Permutation) -> Result<()>,
{
    match mode {
        EnumerationMode::Exact => {
            if p > PERMUTATION_CAP {
                return Err(Error::EnumerationTooLarge {
                    what: "permutations",
                    required: factorial(p),
                    cap: factorial(PERMUTATION_CAP),
                });
            }
            let mut count = 0;
            for perm in Permutation::all(p) {
                f(&perm)?;
                count += 1;
            }
            Ok(count)
        }
        EnumerationMode::Sampled {
            samples,
            seed,
            reference,
        } => {
            let mut seen = BTreeSet::new();
            let mut candidates = Vec::new();
            if let Some(dag) = reference {
                if dag.p() != p {
                    return Err(Error::DimensionMismatch {
                        expected: format!("reference DAG on {p} nodes"),
                        found: format!("{} nodes", dag.p()),
                    });
                }
                candidates.extend(dag.consistent_permutations(REFERENCE_ORDER_CAP));
            }
            candidates.extend(random_permutations(p, *samples, *seed));
            for perm in candidates {
                if seen.insert(perm.clone()) {
                    f(&perm)?;
                }
            }
            Ok(seen.len() as u128)
        }
    }
}

pub type DedupKey = Vec<(usize, usize, i64)>;

/// Canonical key: sorted support with weights rounded to `DEDUP_RESOLUTION`.
pub fn dedup_key(dag: &WeightedDag) -> DedupKey {
    dag.edges()
        .into_iter()
        .map(|(i, j, w)| (i, j, (w / DEDUP_RESOLUTION).round() as i64))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMember {
    pub dag: WeightedDag,
    pub variances: DiagonalVariances,
    /// First ordering (lexicographically, in visiting order) producing it.
    pub permutation: Permutation,
    /// Number of visited orderings producing this DAG.
    pub multiplicity: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceClassSummary {
    pub dags: Vec<ClassMember>,
    pub d_sigma: usize,
    /// `None` stands for `+∞` (no nonzero coefficient anywhere).
    pub betamin_sigma: Option<f64>,
    pub sigma_max_sq: f64,
    pub exact: bool,
    pub permutations_examined: u128,
}

pub fn class_summary(sigma: &CovarianceMatrix, mode: &EnumerationMode) -> Result<EquivalenceClassSummary> {
    let p = sigma.p();
    let theta = sigma.precision();
    let mut index: BTreeMap<Vec<(usize, usize, i64)>, usize> = BTreeMap::new();
    let mut dags: Vec<ClassMember> = Vec::new();
    let examined = visit_permutations(p, mode, |perm| {
        let (dag, variances) = dag_from_precision(&theta, perm)?;
        let key = dedup_key(&dag);
        if let Some(&k) = index.get(&key) {
            dags[k].multiplicity += 1;
        } else {
            index.insert(key, dags.len());
            dags.push(ClassMember {
                dag,
                variances,
                permutation: perm.clone(),
                multiplicity: 1,
            });
        }
        Ok(())
    })?;

    let mut d_sigma = 0;
    let mut betamin = f64::INFINITY;
    for m in &dags {
        d_sigma = d_sigma.max(m.dag.max_in_degree());
        for (_, _, w) in m.dag.edges() {
            betamin = betamin.min(w.abs());
        }
    }
    let exact = matches!(mode, EnumerationMode::Exact);
    if exact {
        // the class-wide quantities range over every projection β_j(S)
        for j in 0..p {
            for s in subsets_excluding(p, j) {
                let coef = sem_coefficients(sigma, j, &s)?;
                d_sigma = d_sigma.max(coef.support.len());
                for &k in &coef.support {
                    betamin = betamin.min(coef.beta[k].abs());
                }
            }
        }
    }
    Ok(EquivalenceClassSummary {
        dags,
        d_sigma,
        betamin_sigma: betamin.is_finite().then_some(betamin),
        sigma_max_sq: sigma.max_variance(),
        exact,
        permutations_examined: examined,
    })
}

/// Relative tolerance when comparing traces for ties.
pub const TRACE_TIE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinTrace {
    pub permutation: Permutation,
    pub trace: f64,
    pub dag: WeightedDag,
    pub variances: DiagonalVariances,
    /// All minimising orderings give the same DAG.
    pub unique: bool,
    /// Smallest trace among orderings whose DAG differs from the minimiser,
    /// if any ordering gives a different DAG.
    pub runner_up_trace: Option<f64>,
    pub exact: bool,
    pub permutations_examined: u128,
}

pub fn min_trace_permutation(sigma: &CovarianceMatrix, mode: &EnumerationMode) -> Result<MinTrace> {
    let p = sigma.p();
    let theta = sigma.precision();
    let mut traces: Vec<(Permutation, f64, DedupKey)> = Vec::new();
    let examined = visit_permutations(p, mode, |perm| {
        let (dag, variances) = dag_from_precision(&theta, perm)?;
        traces.push((perm.clone(), variances.trace(), dedup_key(&dag)));
        Ok(())
    })?;
    // visiting order is lexicographic in exact mode; sort to make the
    // tie-break independent of the mode
    traces.sort_by(|a, b| a.0.cmp(&b.0));
    let min = traces.iter().map(|t| t.1).fold(f64::INFINITY, f64::min);
    let tol = TRACE_TIE_TOL * min.abs().max(1.0);
    let best = traces.iter().find(|t| t.1 <= min + tol).expect("at least one ordering");
    let unique = traces.iter().filter(|t| t.1 <= min + tol).all(|t| t.2 == best.2);
    let runner_up_trace = traces
        .iter()
        .filter(|t| t.2 != best.2)
        .map(|t| t.1)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))));
    let permutation = best.0.clone();
    let (dag, variances) = dag_from_precision(&theta, &permutation)?;
    Ok(MinTrace {
        permutation,
        trace: variances.trace(),
        dag,
        variances,
        unique,
        runner_up_trace,
        exact: matches!(mode, EnumerationMode::Exact),
        permutations_examined: examined,
    })
}

/// `tr Ω(π)` for every visited ordering, in visiting order.
pub fn traces(sigma: &CovarianceMatrix, mode: &EnumerationMode) -> Result<Vec<(Permutation, f64)>> {
    let theta = sigma.precision();
    let mut out = Vec::new();
    visit_permutations(sigma.p(), mode, |perm| {
        let (_, v) = dag_from_precision(&theta, perm)?;
        out.push((perm.clone(), v.trace()));
        Ok(())
    })?;
    Ok(out)
}
