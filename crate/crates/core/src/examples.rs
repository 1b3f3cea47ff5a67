//! Small reference instances with hand-checked equivalence-class members.
//! Nodes are zero-based here: the one-based node `X_k` is index `k - 1`.

use crate::linalg::Matrix;
use crate::model::{CovarianceMatrix, DiagonalVariances, WeightedDag};
use crate::permutation::Permutation;

/// Four-node covariance with two sparse, differently weighted DAGs in its
/// equivalence class.
pub fn example_sigma() -> CovarianceMatrix {
    CovarianceMatrix::new(Matrix::from_rows(&[
        [6.0, 4.0, -6.0, -30.0],
        [4.0, 4.0, -4.0, -20.0],
        [-6.0, -4.0, 7.0, 39.0],
        [-30.0, -20.0, 39.0, 234.0],
    ]))
    .expect("reference covariance is positive definite")
}

/// Ordering `X4 ≺ X3 ≺ X1 ≺ X2`.
pub fn example_pi1() -> Permutation {
    Permutation::new(vec![3, 2, 0, 1]).expect("valid")
}

/// Ordering `X4 ≺ X1 ≺ X2 ≺ X3`.
pub fn example_pi2() -> Permutation {
    Permutation::new(vec![3, 0, 1, 2]).expect("valid")
}

pub fn example_dag_pi1() -> (WeightedDag, DiagonalVariances) {
    let b = Matrix::from_rows(&[
        [0.0, 0.0, -1.0, 4.0],
        [1.0, 0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0, 9.0],
        [0.0, 0.0, 0.0, 0.0],
    ]);
    (
        WeightedDag::new(b).expect("acyclic"),
        DiagonalVariances::new(vec![2.0, 4.0, 1.0, 3.0]).expect("positive"),
    )
}

pub fn example_dag_pi2() -> (WeightedDag, DiagonalVariances) {
    let b = Matrix::from_rows(&[
        [0.0, 0.0, 0.0, 4.0],
        [1.0 / 3.0, 0.0, 0.0, 0.0],
        [-2.0 / 3.0, -4.0 / 7.0, 0.0, 9.0],
        [0.0, 0.0, 0.0, 0.0],
    ]);
    (
        WeightedDag::new(b).expect("acyclic"),
        DiagonalVariances::new(vec![2.0 / 3.0, 12.0 / 7.0, 7.0, 3.0]).expect("positive"),
    )
}

/// Precision matrix of the four-cycle ("diamond") Gaussian, which has two
/// pairwise conditional independences but no faithful DAG.
pub fn diamond_precision() -> Matrix {
    Matrix::from_rows(&[
        [10.0, 1.0, 0.0, 2.0],
        [1.0, 10.0, 3.0, 0.0],
        [0.0, 3.0, 10.0, 4.0],
        [2.0, 0.0, 4.0, 10.0],
    ])
}

pub fn diamond_sigma() -> CovarianceMatrix {
    let inv = crate::linalg::Cholesky::new(&diamond_precision())
        .expect("positive definite")
        .inverse();
    CovarianceMatrix::new(inv).expect("positive definite")
}
