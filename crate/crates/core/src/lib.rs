//! Score-based learning of sparse Gaussian DAGs.
//!
//! The estimator minimises the penalized least-squares score
//!
//! ```text
//! Q(B) = (1/2n) ‖X − X B‖²_F + Σ_ij ρ_λ(|B_ij|)
//! ```
//!
//! over weighted adjacency matrices `B` with acyclic support, for a
//! coordinate-separable concave regularizer `ρ_λ` (MCP, SCAD, ℓ1, ℓ0, capped
//! ℓ1). Alongside the estimators the crate exposes the population-level
//! machinery that describes what they estimate: the DAGs `B(π)` obtained
//! from a covariance matrix for every variable ordering `π`, invariant
//! neighbourhoods, minimum-trace orderings and the conditional independences
//! read off each `B(π)`.
//!
//! Node indices are zero-based throughout.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod ci;
pub mod diagnostics;
pub mod equivalence;
pub mod error;
pub mod examples;
pub mod io;
pub mod linalg;
pub mod model;
pub mod penalty;
pub mod permutation;
pub mod pls;
pub mod sampling;
pub mod search;
pub mod sim;

pub use error::{Error, Result};
pub use linalg::{ldlt_decompose, Ldlt, Matrix};
pub use model::{is_dag, sigma_of, CovarianceMatrix, DataMatrix, DiagonalVariances, WeightedDag};
pub use penalty::{PenaltyFamily, PenaltySpec};
pub use permutation::{permute_matrix, Permutation};
pub use sampling::sample_gaussian;
