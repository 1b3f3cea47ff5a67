//! Domain types for the linear structural equation model `X = BᵀX + ε`.
//!
//! Edge convention: `weights[(i, j)] != 0` means an edge `i → j`, so column
//! `j` of `B` holds the regression weights of node `j` on its parents.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{invert, Cholesky, Matrix};

/// Entries with `|w| <= SUPPORT_TOL` are not edges.
pub const SUPPORT_TOL: f64 = 1e-8;

/// Relative symmetry tolerance for covariance input.
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct CovarianceMatrix {
    entries: Matrix,
}

impl CovarianceMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        if !entries.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square covariance".into(),
                found: format!("{}x{}", entries.rows(), entries.cols()),
            });
        }
        if let Err((row, col)) = entries.all_finite() {
            return Err(Error::NonFinite { row, col });
        }
        if let Err((i, j, gap)) = entries.is_symmetric(SYMMETRY_TOL) {
            return Err(Error::NotSymmetric { i, j, gap });
        }
        // symmetrise round-off so downstream factorizations see an exact mirror
        let mut entries = entries;
        let p = entries.rows();
        for i in 0..p {
            for j in 0..i {
                let avg = 0.5 * (entries[(i, j)] + entries[(j, i)]);
                entries[(i, j)] = avg;
                entries[(j, i)] = avg;
            }
        }
        Cholesky::new(&entries)?;
        Ok(Self { entries })
    }

    pub fn identity(p: usize) -> Self {
        Self {
            entries: Matrix::identity(p),
        }
    }

    pub fn p(&self) -> usize {
        self.entries.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    pub fn precision(&self) -> Matrix {
        Cholesky::new(&self.entries)
            .expect("validated positive definite")
            .inverse()
    }

    /// `σ²_max = max_j Var(X_j)`.
    pub fn max_variance(&self) -> f64 {
        self.entries.diagonal().into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl TryFrom<Matrix> for CovarianceMatrix {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<CovarianceMatrix> for Matrix {
    fn from(c: CovarianceMatrix) -> Self {
        c.entries
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiagonalVariances {
    values: Vec<f64>,
}

impl DiagonalVariances {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::InvalidConfig(format!(
                "variance {i} must be positive and finite, got {v}"
            )));
        }
        Ok(Self { values })
    }

    pub fn constant(p: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; p])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn trace(&self) -> f64 {
        self.values.iter().sum()
    }
}

impl TryFrom<Vec<f64>> for DiagonalVariances {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiagonalVariances> for Vec<f64> {
    fn from(d: DiagonalVariances) -> Self {
        d.values
    }
}

/// Weighted adjacency matrix with acyclic support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct WeightedDag {
    weights: Matrix,
}

impl WeightedDag {
    pub fn new(weights: Matrix) -> Result<Self> {
        if !weights.is_square() {
            return Err(Error::DimensionMismatch {
                expected: "square adjacency".into(),
                found: format!("{}x{}", weights.rows(), weights.cols()),
            });
        }
        if let Err((row, col)) = weights.all_finite() {
            return Err(Error::NonFinite { row, col });
        }
        for i in 0..weights.rows() {
            if weights[(i, i)].abs() > SUPPORT_TOL {
                return Err(Error::Cyclic);
            }
        }
        if is_dag(&weights).is_none() {
            return Err(Error::Cyclic);
        }
        Ok(Self { weights })
    }

    pub fn empty(p: usize) -> Self {
        Self {
            weights: Matrix::zeros(p, p),
        }
    }

    /// Builds from `(from, to, weight)` triples.
    pub fn from_edges(p: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut w = Matrix::zeros(p, p);
        for &(i, j, x) in edges {
            if i >= p || j >= p {
                return Err(Error::IndexError {
                    index: i.max(j),
                    reason: format!("edge endpoint outside 0..{p}"),
                });
            }
            w[(i, j)] = x;
        }
        Self::new(w)
    }

    pub fn p(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    #[inline]
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[(from, to)]
    }

    #[inline]
    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.weights[(from, to)].abs() > SUPPORT_TOL
    }

    /// Edges `(from, to, weight)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let p = self.p();
        let mut out = Vec::new();
        for i in 0..p {
            for j in 0..p {
                if self.has_edge(i, j) {
                    out.push((i, j, self.weights[(i, j)]));
                }
            }
        }
        out
    }

    pub fn support(&self) -> BTreeSet<(usize, usize)> {
        self.edges().into_iter().map(|(i, j, _)| (i, j)).collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges().len()
    }

    pub fn parents(&self, j: usize) -> BTreeSet<usize> {
        (0..self.p()).filter(|&i| self.has_edge(i, j)).collect()
    }

    pub fn children(&self, i: usize) -> BTreeSet<usize> {
        (0..self.p()).filter(|&j| self.has_edge(i, j)).collect()
    }

    /// Parent bitmasks, one per node; requires `p <= 64`.
    pub fn parent_masks(&self) -> Vec<u64> {
        (0..self.p())
            .map(|j| {
                (0..self.p())
                    .filter(|&i| self.has_edge(i, j))
                    .fold(0u64, |m, i| m | (1 << i))
            })
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.weights.column(j)
    }

    /// Largest in-degree.
    pub fn max_in_degree(&self) -> usize {
        (0..self.p()).map(|j| self.parents(j).len()).max().unwrap_or(0)
    }

    pub fn without_edge(&self, from: usize, to: usize) -> Self {
        let mut w = self.weights.clone();
        w[(from, to)] = 0.0;
        Self { weights: w }
    }

    /// Whether `P_π B` is lower triangular, i.e. every edge points from a
    /// later to an earlier position under `π`.
    pub fn is_consistent_with(&self, perm: &crate::Permutation) -> bool {
        self.edges()
            .iter()
            .all(|&(i, j, _)| perm.position(i) > perm.position(j))
    }
}

impl WeightedDag {
    /// Permutations `π` with `P_π B` lower triangular (children placed before
    /// their parents), in lexicographic order, stopping after `cap`.
    pub fn consistent_permutations(&self, cap: usize) -> Vec<crate::Permutation> {
        let p = self.p();
        let children: Vec<Vec<usize>> = (0..p).map(|i| self.children(i).into_iter().collect()).collect();
        let mut placed = vec![false; p];
        let mut prefix = Vec::with_capacity(p);
        let mut out = Vec::new();
        fn recurse(
            children: &[Vec<usize>],
            placed: &mut [bool],
            prefix: &mut Vec<usize>,
            out: &mut Vec<crate::Permutation>,
            cap: usize,
        ) {
            if out.len() >= cap {
                return;
            }
            let p = placed.len();
            if prefix.len() == p {
                out.push(crate::Permutation::new(prefix.clone()).expect("bijection"));
                return;
            }
            for v in 0..p {
                if !placed[v] && children[v].iter().all(|&c| placed[c]) {
                    placed[v] = true;
                    prefix.push(v);
                    recurse(children, placed, prefix, out, cap);
                    prefix.pop();
                    placed[v] = false;
                    if out.len() >= cap {
                        return;
                    }
                }
            }
        }
        recurse(&children, &mut placed, &mut prefix, &mut out, cap);
        out
    }

    /// Lexicographically smallest consistent permutation.
    pub fn canonical_permutation(&self) -> crate::Permutation {
        let p = self.p();
        let children: Vec<BTreeSet<usize>> = (0..p).map(|i| self.children(i)).collect();
        let mut placed = vec![false; p];
        let mut order = Vec::with_capacity(p);
        for _ in 0..p {
            let v = (0..p)
                .find(|&v| !placed[v] && children[v].iter().all(|&c| placed[c]))
                .expect("acyclic support always has an unplaced sink");
            placed[v] = true;
            order.push(v);
        }
        crate::Permutation::new(order).expect("bijection")
    }

    /// Number of consistent permutations (equivalently, of topological
    /// sorts), by dynamic programming over placed-node subsets. `None` when
    /// `p > 25`.
    pub fn count_consistent_permutations(&self) -> Option<u128> {
        let p = self.p();
        if p > 25 {
            return None;
        }
        let child_mask: Vec<u32> = (0..p)
            .map(|i| self.children(i).iter().fold(0u32, |m, &c| m | (1 << c)))
            .collect();
        let full = (1usize << p) - 1;
        let mut ways = vec![0u128; full + 1];
        ways[0] = 1;
        for mask in 0..full {
            let w = ways[mask];
            if w == 0 {
                continue;
            }
            for v in 0..p {
                let bit = 1usize << v;
                if mask & bit == 0 && (child_mask[v] as usize) & !mask == 0 {
                    ways[mask | bit] = ways[mask | bit].saturating_add(w);
                }
            }
        }
        Some(ways[full])
    }
}

impl TryFrom<Matrix> for WeightedDag {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<WeightedDag> for Matrix {
    fn from(d: WeightedDag) -> Self {
        d.weights
    }
}

/// Returns a topological order (parents before children) of the support of
/// `weights`, or `None` if the support has a directed cycle.
pub fn is_dag(weights: &Matrix) -> Option<Vec<usize>> {
    if !weights.is_square() {
        return None;
    }
    let p = weights.rows();
    let mut indeg = vec![0usize; p];
    for i in 0..p {
        for j in 0..p {
            if weights[(i, j)].abs() > SUPPORT_TOL {
                indeg[j] += 1;
            }
        }
    }
    let mut queue: VecDeque<usize> = (0..p).filter(|&j| indeg[j] == 0).collect();
    let mut order = Vec::with_capacity(p);
    while let Some(i) = queue.pop_front() {
        order.push(i);
        for j in 0..p {
            if weights[(i, j)].abs() > SUPPORT_TOL {
                indeg[j] -= 1;
                if indeg[j] == 0 {
                    queue.push_back(j);
                }
            }
        }
    }
    (order.len() == p).then_some(order)
}

/// `Σ(B, Ω) = (I − B)⁻ᵀ Ω (I − B)⁻¹`.
pub fn sigma_of(dag: &WeightedDag, variances: &DiagonalVariances) -> Result<CovarianceMatrix> {
    let p = dag.p();
    if variances.len() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("{p} variances"),
            found: format!("{}", variances.len()),
        });
    }
    let factor = Matrix::identity(p).sub(dag.weights());
    let inv = invert(&factor).ok_or(Error::SingularFactor)?;
    // Mᵀ Ω M with M = (I - B)^{-1}
    let mut scaled = inv.clone();
    for i in 0..p {
        let w = variances.values()[i];
        for j in 0..p {
            scaled[(i, j)] *= w;
        }
    }
    let sigma = inv.transpose().matmul(&scaled)?;
    CovarianceMatrix::new(sigma)
}

/// Observations stored row-wise, `n × p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Matrix", into = "Matrix")]
pub struct DataMatrix {
    entries: Matrix,
}

impl DataMatrix {
    pub fn new(entries: Matrix) -> Result<Self> {
        if entries.rows() == 0 {
            return Err(Error::InvalidConfig("data matrix needs n >= 1 rows".into()));
        }
        if let Err((row, col)) = entries.all_finite() {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { entries })
    }

    pub fn n(&self) -> usize {
        self.entries.rows()
    }

    pub fn p(&self) -> usize {
        self.entries.cols()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.entries.column(j)
    }

    /// `XᵀX / n`.
    pub fn scaled_gram(&self) -> Matrix {
        self.entries.gram().scale(1.0 / self.n() as f64)
    }

    /// Uncentred empirical covariance `XᵀX / n`; data are mean-zero by model.
    pub fn empirical_covariance(&self) -> Matrix {
        self.scaled_gram()
    }
}

impl TryFrom<Matrix> for DataMatrix {
    type Error = Error;
    fn try_from(m: Matrix) -> Result<Self> {
        Self::new(m)
    }
}

impl From<DataMatrix> for Matrix {
    fn from(d: DataMatrix) -> Self {
        d.entries
    }
}
