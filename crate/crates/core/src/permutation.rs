use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// A permutation `π` of `{0, …, p-1}` stored as `mapping[i] = π(i)`.
///
/// Under the ordering induced by `π`, node `π(0)` comes first and each node
/// may only receive edges from nodes placed after it, so sinks come first and
/// sources last.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    mapping: Vec<usize>,
    inverse: Vec<usize>,
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self> {
        let p = mapping.len();
        let mut inverse = vec![usize::MAX; p];
        for (i, &m) in mapping.iter().enumerate() {
            if m >= p {
                return Err(Error::InvalidPermutation(format!(
                    "entry {m} out of range for length {p}"
                )));
            }
            if inverse[m] != usize::MAX {
                return Err(Error::InvalidPermutation(format!("entry {m} repeated")));
            }
            inverse[m] = i;
        }
        Ok(Self { mapping, inverse })
    }

    pub fn identity(p: usize) -> Self {
        let mapping: Vec<usize> = (0..p).collect();
        Self {
            inverse: mapping.clone(),
            mapping,
        }
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// `π(i)`.
    #[inline]
    pub fn apply(&self, i: usize) -> usize {
        self.mapping[i]
    }

    /// Position of node `k` in the ordering, `π⁻¹(k)`.
    #[inline]
    pub fn position(&self, k: usize) -> usize {
        self.inverse[k]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.mapping
    }

    pub fn inverse(&self) -> Self {
        Self {
            mapping: self.inverse.clone(),
            inverse: self.mapping.clone(),
        }
    }

    /// `(self ∘ other)(i) = self(other(i))`.
    pub fn compose(&self, other: &Permutation) -> Result<Self> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("length {}", self.len()),
                found: format!("length {}", other.len()),
            });
        }
        Self::new(other.mapping.iter().map(|&i| self.mapping[i]).collect())
    }

    /// Candidate parents `S_j(π) = {k : π⁻¹(k) > π⁻¹(j)}`.
    pub fn candidate_parents(&self, j: usize) -> BTreeSet<usize> {
        let pos = self.inverse[j];
        self.mapping[pos + 1..].iter().copied().collect()
    }

    /// Candidate-parent bitmask; requires `p <= 64`.
    pub fn candidate_mask(&self, j: usize) -> u64 {
        let pos = self.inverse[j];
        self.mapping[pos + 1..].iter().fold(0u64, |m, &k| m | (1 << k))
    }

    /// Advances to the lexicographically next permutation in place. Returns
    /// `false` (leaving `self` untouched) when already at the last one.
    pub fn next_lexicographic(&mut self) -> bool {
        let v = &mut self.mapping;
        let n = v.len();
        if n < 2 {
            return false;
        }
        let mut i = n - 1;
        while i > 0 && v[i - 1] >= v[i] {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        let mut j = n - 1;
        while v[j] <= v[i - 1] {
            j -= 1;
        }
        v.swap(i - 1, j);
        v[i..].reverse();
        for (pos, &m) in self.mapping.iter().enumerate() {
            self.inverse[m] = pos;
        }
        true
    }

    /// All `p!` permutations in lexicographic order.
    pub fn all(p: usize) -> AllPermutations {
        AllPermutations {
            next: Some(Self::identity(p)),
        }
    }
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = Error;
    fn try_from(v: Vec<usize>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.mapping
    }
}

pub struct AllPermutations {
    next: Option<Permutation>,
}

impl Iterator for AllPermutations {
    type Item = Permutation;
    fn next(&mut self) -> Option<Permutation> {
        let current = self.next.take()?;
        let mut succ = current.clone();
        if succ.next_lexicographic() {
            self.next = Some(succ);
        }
        Some(current)
    }
}

pub fn factorial(p: usize) -> u128 {
    (1..=p as u128).product()
}

/// `(P_π A)_{ij} = A_{π(i) π(j)}`.
pub fn permute_matrix(perm: &Permutation, a: &Matrix) -> Result<Matrix> {
    let p = perm.len();
    if a.rows() != p || a.cols() != p {
        return Err(Error::DimensionMismatch {
            expected: format!("{p}x{p}"),
            found: format!("{}x{}", a.rows(), a.cols()),
        });
    }
    let mut out = Matrix::zeros(p, p);
    for i in 0..p {
        let pi = perm.apply(i);
        for j in 0..p {
            out[(i, j)] = a[(pi, perm.apply(j))];
        }
    }
    Ok(out)
}

/// Permutes a vector (the diagonal of a diagonal matrix) the same way.
pub fn permute_vector(perm: &Permutation, v: &[f64]) -> Vec<f64> {
    (0..perm.len()).map(|i| v[perm.apply(i)]).collect()
}
