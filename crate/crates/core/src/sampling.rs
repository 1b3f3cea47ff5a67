//! Gaussian sampling with reproducible, stream-addressable randomness.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::linalg::{Cholesky, Matrix};
use crate::model::{CovarianceMatrix, DataMatrix};
use crate::permutation::Permutation;

/// Deterministic generator for `(seed, stream)`. Different streams are
/// independent, so replicate `r` of an experiment can use stream `r`
/// regardless of which thread runs it.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `count` uniformly random orderings of `p` nodes (with repetition) drawn
/// from stream 0 of `seed`.
pub fn random_permutations(p: usize, count: usize, seed: u64) -> Vec<Permutation> {
    let mut rng = stream_rng(seed, 0);
    let mut order: Vec<usize> = (0..p).collect();
    (0..count)
        .map(|_| {
            order.shuffle(&mut rng);
            Permutation::new(order.clone()).expect("shuffle of 0..p")
        })
        .collect()
}

pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Draws `n` rows from `N_p(0, Σ)` as `L z` with `Σ = L Lᵀ`.
pub fn sample_gaussian_with<R: rand::Rng + ?Sized>(
    sigma: &CovarianceMatrix,
    n: usize,
    rng: &mut R,
) -> Result<DataMatrix> {
    let p = sigma.p();
    let chol = Cholesky::new(sigma.matrix())?;
    let l = chol.lower();
    let mut data = Vec::with_capacity(n * p);
    let mut z = vec![0.0; p];
    for _ in 0..n {
        for zi in z.iter_mut() {
            *zi = standard_normal(rng);
        }
        for i in 0..p {
            let mut s = 0.0;
            for k in 0..=i {
                s += l[(i, k)] * z[k];
            }
            data.push(s);
        }
    }
    DataMatrix::new(Matrix::from_row_major(n, p, data)?)
}

pub fn sample_gaussian(sigma: &CovarianceMatrix, n: usize, seed: u64) -> Result<DataMatrix> {
    sample_gaussian_with(sigma, n, &mut stream_rng(seed, 0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let s = CovarianceMatrix::identity(3);
        let a = sample_gaussian(&s, 50, 9).unwrap();
        let b = sample_gaussian(&s, 50, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_gaussian(&s, 50, 10).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn identity_covariance_law_of_large_numbers() {
        let x = sample_gaussian(&CovarianceMatrix::identity(2), 100_000, 1).unwrap();
        let emp = x.empirical_covariance();
        assert!(emp.max_abs_diff(&Matrix::identity(2)) < 0.05, "{emp:?}");
    }

    #[test]
    fn correlated_pair() {
        let s = CovarianceMatrix::new(Matrix::from_rows(&[[1.0, 0.9], [0.9, 1.0]])).unwrap();
        let x = sample_gaussian(&s, 100_000, 2).unwrap();
        let e = x.empirical_covariance();
        let r = e[(0, 1)] / (e[(0, 0)] * e[(1, 1)]).sqrt();
        assert!((r - 0.9).abs() < 0.02, "r = {r}");
    }

    #[test]
    fn streams_differ() {
        use rand::Rng;
        let a: u64 = stream_rng(5, 0).random();
        let b: u64 = stream_rng(5, 1).random();
        assert_ne!(a, b);
        let c: u64 = stream_rng(5, 1).random();
        assert_eq!(b, c);
    }
}
