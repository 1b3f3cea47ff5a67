//! Support-restricted penalized least squares
//!
//! ```text
//! min_θ  (1/2n) ‖y − Zθ‖² + Σ_k ρ_λ(|θ_k|)   subject to supp(θ) ⊆ S
//! ```
//!
//! Everything works on the sufficient statistics `yᵀy/n`, `Zᵀy/n`, `ZᵀZ/n`,
//! so a node's regression on the other columns of a data matrix reuses one
//! shared Gram matrix.

use std::collections::BTreeSet;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, Matrix};
use crate::model::{DataMatrix, SUPPORT_TOL};
use crate::penalty::{PenaltyFamily, PenaltySpec};
use crate::sampling::stream_rng;

pub const EXACT_CAP: usize = 20;
pub const MAX_SWEEPS: usize = 10_000;
pub const RELATIVE_TOL: f64 = 1e-10;
/// Objectives closer than this are treated as tied.
pub const TIE_TOL: f64 = 1e-10;
pub const RIDGE_FACTOR: f64 = 1e-10;
pub const DEFAULT_RESTARTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    n: usize,
    yy: f64,
    zy: Vec<f64>,
    zz: Matrix,
}

impl Gram {
    pub fn new(y: &[f64], z: &Matrix) -> Result<Self> {
        let n = y.len();
        if z.rows() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("design with {n} rows"),
                found: format!("{} rows", z.rows()),
            });
        }
        if n == 0 {
            return Err(Error::DimensionMismatch {
                expected: "at least one observation".into(),
                found: "0".into(),
            });
        }
        let nf = n as f64;
        Ok(Self {
            n,
            yy: y.iter().map(|v| v * v).sum::<f64>() / nf,
            zy: z.tr_mat_vec(y).into_iter().map(|v| v / nf).collect(),
            zz: z.gram().scale(1.0 / nf),
        })
    }

    /// Regression of column `j` on all columns, from `g = XᵀX/n`.
    pub fn for_node(g: &Matrix, j: usize, n: usize) -> Self {
        Self {
            n,
            yy: g[(j, j)],
            zy: g.column(j),
            zz: g.clone(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.zy.len()
    }

    /// `(1/2n)‖y − Zθ‖²`.
    pub fn half_mse(&self, theta: &[f64]) -> f64 {
        let m = self.m();
        let mut quad = 0.0;
        let mut lin = 0.0;
        for k in 0..m {
            if theta[k] == 0.0 {
                continue;
            }
            lin += theta[k] * self.zy[k];
            let row = self.zz.row(k);
            let mut s = 0.0;
            for l in 0..m {
                s += row[l] * theta[l];
            }
            quad += theta[k] * s;
        }
        0.5 * (self.yy - 2.0 * lin + quad)
    }

    pub fn objective(&self, theta: &[f64], penalty: &PenaltySpec) -> f64 {
        self.half_mse(theta) + penalty.vector(theta)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    ExactEnumeration,
    CoordinateDescent,
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlsSolution {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub support: BTreeSet<usize>,
    pub solver: SolverKind,
    pub converged: bool,
    pub restarts_used: usize,
    /// A ridge term was needed because `Z_T` was rank deficient.
    pub rank_deficient: bool,
    /// Another support reached the same objective within `TIE_TOL`.
    pub multiple_optima: bool,
}

impl PlsSolution {
    fn zero(gram: &Gram) -> Self {
        Self {
            theta: vec![0.0; gram.m()],
            objective: 0.5 * gram.yy,
            support: BTreeSet::new(),
            solver: SolverKind::LeastSquares,
            converged: true,
            restarts_used: 0,
            rank_deficient: false,
            multiple_optima: false,
        }
    }
}

fn support_of(theta: &[f64]) -> BTreeSet<usize> {
    theta
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > SUPPORT_TOL)
        .map(|(k, _)| k)
        .collect()
}

/// Smaller objective, or a tie with a lexicographically smaller support.
fn better(obj: f64, support: &BTreeSet<usize>, best_obj: f64, best_support: &BTreeSet<usize>) -> bool {
    if obj < best_obj - TIE_TOL {
        return true;
    }
    (obj - best_obj).abs() <= TIE_TOL && support.iter().lt(best_support.iter())
}

/// Least squares on the columns `idx`, with a ridge fallback.
fn least_squares(gram: &Gram, idx: &[usize]) -> (Vec<f64>, f64) {
    let sub = gram.zz.select(idx, idx);
    let rhs: Vec<f64> = idx.iter().map(|&k| gram.zy[k]).collect();
    if let Ok(ch) = Cholesky::new(&sub) {
        return (ch.solve(&rhs), 0.0);
    }
    let mut ridge = RIDGE_FACTOR * (sub.trace() / idx.len() as f64).max(f64::MIN_POSITIVE);
    loop {
        let mut reg = sub.clone();
        for i in 0..idx.len() {
            reg[(i, i)] += ridge;
        }
        if let Ok(ch) = Cholesky::new(&reg) {
            return (ch.solve(&rhs), ridge);
        }
        ridge *= 10.0;
    }
}

/// Cyclic coordinate descent over `idx` starting from `theta`. Returns
/// whether the relative objective change fell below `RELATIVE_TOL`.
fn coordinate_descent(gram: &Gram, idx: &[usize], theta: &mut [f64], penalty: &PenaltySpec, ridge: f64) -> bool {
    let ridged =
        |t: &[f64]| -> f64 { gram.objective(t, penalty) + 0.5 * ridge * idx.iter().map(|&k| t[k] * t[k]).sum::<f64>() };
    // zθ[k] = (ZᵀZ/n θ)_k, kept current across updates
    let mut zt: Vec<f64> = idx
        .iter()
        .map(|&k| idx.iter().map(|&l| gram.zz[(k, l)] * theta[l]).sum())
        .collect();
    let mut prev = ridged(theta);
    for _ in 0..MAX_SWEEPS {
        let mut moved = false;
        for (a_pos, &k) in idx.iter().enumerate() {
            let a = gram.zz[(k, k)] + ridge;
            let c = gram.zy[k] - (zt[a_pos] - gram.zz[(k, k)] * theta[k]);
            let new = penalty.scalar_minimizer(a, c);
            let delta = new - theta[k];
            if delta != 0.0 {
                moved = true;
                theta[k] = new;
                for (b_pos, &l) in idx.iter().enumerate() {
                    zt[b_pos] += gram.zz[(l, k)] * delta;
                }
            }
        }
        let obj = ridged(theta);
        debug_assert!(
            obj <= prev + 1e-12 * prev.abs().max(1.0),
            "coordinate descent increased the objective: {prev} -> {obj}"
        );
        if !moved || (prev - obj).abs() <= RELATIVE_TOL * prev.abs().max(f64::MIN_POSITIVE) {
            return true;
        }
        prev = obj;
    }
    false
}

/// Minimises over `θ` supported inside the exact set `support`.
///
/// ℓ0 fits are ordinary least squares. For the other families coordinate
/// descent runs over the coordinates of `support` from the least-squares
/// fit; nonconvex families additionally start from zero and from half the
/// least-squares fit, keeping the best stationary point.
pub fn fixed_support_solve(gram: &Gram, support: &[usize], penalty: &PenaltySpec) -> PlsSolution {
    if support.is_empty() {
        return PlsSolution::zero(gram);
    }
    let m = gram.m();
    let (ols, ridge) = least_squares(gram, support);
    let mut start = vec![0.0; m];
    for (c, &k) in ols.iter().zip(support) {
        start[k] = *c;
    }
    if penalty.family() == PenaltyFamily::L0 {
        let objective = gram.objective(&start, penalty);
        return PlsSolution {
            support: support_of(&start),
            theta: start,
            objective,
            solver: SolverKind::LeastSquares,
            converged: true,
            restarts_used: 1,
            rank_deficient: ridge > 0.0,
            multiple_optima: false,
        };
    }
    let starts: Vec<Vec<f64>> = if penalty.is_convex() {
        vec![start]
    } else {
        let half = start.iter().map(|v| 0.5 * v).collect();
        vec![start, vec![0.0; m], half]
    };
    let restarts_used = starts.len();
    let mut best: Option<PlsSolution> = None;
    for mut theta in starts {
        let converged = coordinate_descent(gram, support, &mut theta, penalty, ridge);
        let objective = gram.objective(&theta, penalty);
        let sup = support_of(&theta);
        let replace = match &best {
            None => true,
            Some(b) => better(objective, &sup, b.objective, &b.support),
        };
        if replace {
            best = Some(PlsSolution {
                theta,
                objective,
                support: sup,
                solver: SolverKind::CoordinateDescent,
                converged,
                restarts_used,
                rank_deficient: ridge > 0.0,
                multiple_optima: false,
            });
        }
    }
    best.expect("at least one start")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum SolveMode {
    #[default]
    /// Global minimum by enumerating every support inside `S`.
    Exact,
    /// Best stationary point over `restarts` starts (least squares, zero and
    /// random perturbations of the least-squares fit).
    CoordinateDescent { restarts: usize, seed: u64 },
}

/// Optimal values of the restricted problem for every subset of a candidate
/// list, indexed by bitmask over that list.
#[derive(Debug, Clone)]
pub struct SubsetTable {
    candidates: Vec<usize>,
    value: Vec<f64>,
    /// The fixed support whose solve attains `value`.
    arg: Vec<u32>,
    tie: Vec<bool>,
}

impl SubsetTable {
    pub fn candidates(&self) -> &[usize] {
        &self.candidates
    }

    pub fn value(&self, mask: usize) -> f64 {
        self.value[mask]
    }

    pub fn values(&self) -> &[f64] {
        &self.value
    }

    pub fn has_tie(&self, mask: usize) -> bool {
        self.tie[mask]
    }

    /// Candidate indices of the fixed support attaining `value(mask)`.
    pub fn argmin(&self, mask: usize) -> Vec<usize> {
        mask_members(&self.candidates, self.arg[mask] as usize)
    }

    pub fn full_mask(&self) -> usize {
        (1usize << self.candidates.len()) - 1
    }
}

fn mask_members(candidates: &[usize], mask: usize) -> Vec<usize> {
    candidates
        .iter()
        .enumerate()
        .filter(|(b, _)| mask >> b & 1 == 1)
        .map(|(_, &k)| k)
        .collect()
}

/// Builds `best(C) = min(fixed(C), min_{i∈C} best(C \ {i}))` for every
/// `C ⊆ candidates`.
pub fn subset_table(gram: &Gram, candidates: &[usize], penalty: &PenaltySpec) -> Result<SubsetTable> {
    let k = candidates.len();
    if k > EXACT_CAP {
        return Err(Error::ExactCapExceeded {
            size: k,
            cap: EXACT_CAP,
        });
    }
    let size = 1usize << k;
    let mut value = vec![0.0; size];
    let mut arg = vec![0u32; size];
    let mut tie = vec![false; size];
    let mut sup: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); size];
    for mask in 0..size {
        let sol = fixed_support_solve(gram, &mask_members(candidates, mask), penalty);
        let mut bv = sol.objective;
        let mut ba = mask as u32;
        let mut bs = sol.support;
        let mut bt = false;
        for b in 0..k {
            if mask >> b & 1 == 0 {
                continue;
            }
            let sub = mask & !(1 << b);
            if better(value[sub], &sup[sub], bv, &bs) {
                bt = tie[sub] || (value[sub] - bv).abs() <= TIE_TOL && sup[sub] != bs;
                bv = value[sub];
                ba = arg[sub];
                bs = sup[sub].clone();
            } else if (value[sub] - bv).abs() <= TIE_TOL && sup[sub] != bs {
                bt = true;
            }
        }
        value[mask] = bv;
        arg[mask] = ba;
        tie[mask] = bt;
        sup[mask] = bs;
    }
    Ok(SubsetTable {
        candidates: candidates.to_vec(),
        value,
        arg,
        tie,
    })
}

fn check_support(m: usize, s: &BTreeSet<usize>) -> Result<()> {
    if let Some(&k) = s.iter().find(|&&k| k >= m) {
        return Err(Error::IndexError {
            index: k,
            reason: format!("support member outside 0..{m}"),
        });
    }
    Ok(())
}

pub fn restricted_pls(gram: &Gram, s: &BTreeSet<usize>, penalty: &PenaltySpec, mode: SolveMode) -> Result<PlsSolution> {
    check_support(gram.m(), s)?;
    let cand: Vec<usize> = s.iter().copied().collect();
    match mode {
        SolveMode::Exact => {
            let table = subset_table(gram, &cand, penalty)?;
            let full = table.full_mask();
            let mut sol = fixed_support_solve(gram, &table.argmin(full), penalty);
            sol.solver = SolverKind::ExactEnumeration;
            sol.multiple_optima = table.has_tie(full);
            Ok(sol)
        }
        SolveMode::CoordinateDescent { restarts, seed } => Ok(multi_start(gram, &cand, penalty, restarts.max(1), seed)),
    }
}

fn multi_start(gram: &Gram, cand: &[usize], penalty: &PenaltySpec, restarts: usize, seed: u64) -> PlsSolution {
    let m = gram.m();
    if cand.is_empty() {
        return PlsSolution::zero(gram);
    }
    let (ols, ridge) = least_squares(gram, cand);
    let mut ols_full = vec![0.0; m];
    for (c, &k) in ols.iter().zip(cand) {
        ols_full[k] = *c;
    }
    let mut rng = stream_rng(seed, 0);
    let mut best: Option<PlsSolution> = None;
    let mut ties = false;
    for r in 0..restarts {
        let mut theta = match r {
            0 => ols_full.clone(),
            1 => vec![0.0; m],
            _ => ols_full.iter().map(|&v| v * rng.random_range(-0.5..1.5)).collect(),
        };
        let converged = coordinate_descent(gram, cand, &mut theta, penalty, ridge);
        let objective = gram.objective(&theta, penalty);
        let sup = support_of(&theta);
        match &best {
            Some(b) if !better(objective, &sup, b.objective, &b.support) => {
                if (objective - b.objective).abs() <= TIE_TOL && sup != b.support {
                    ties = true;
                }
            }
            prev => {
                ties = matches!(prev, Some(b) if (objective - b.objective).abs() <= TIE_TOL && sup != b.support);
                best = Some(PlsSolution {
                    theta,
                    objective,
                    support: sup,
                    solver: SolverKind::CoordinateDescent,
                    converged,
                    restarts_used: restarts,
                    rank_deficient: ridge > 0.0,
                    multiple_optima: false,
                });
            }
        }
    }
    let mut sol = best.expect("at least one start");
    sol.multiple_optima = ties;
    sol
}

/// A validated support-restricted problem built from raw `(y, Z)`.
#[derive(Debug, Clone)]
pub struct PlsProblem {
    gram: Gram,
    support: BTreeSet<usize>,
    penalty: PenaltySpec,
}

impl PlsProblem {
    pub fn new(y: &[f64], z: &Matrix, support: BTreeSet<usize>, penalty: PenaltySpec) -> Result<Self> {
        let gram = Gram::new(y, z)?;
        check_support(gram.m(), &support)?;
        Ok(Self { gram, support, penalty })
    }

    pub fn gram(&self) -> &Gram {
        &self.gram
    }

    pub fn solve(&self, mode: SolveMode) -> Result<PlsSolution> {
        restricted_pls(&self.gram, &self.support, &self.penalty, mode)
    }
}

/// Penalized regression of column `j` on the columns in `s`.
pub fn neighbourhood_fit(
    x: &DataMatrix,
    j: usize,
    s: &BTreeSet<usize>,
    penalty: &PenaltySpec,
    mode: SolveMode,
) -> Result<PlsSolution> {
    let p = x.p();
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
    let gram = Gram::for_node(&x.scaled_gram(), j, x.n());
    restricted_pls(&gram, s, penalty, mode)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::standard_normal;
    use proptest::prelude::*;

    fn random_design(n: usize, m: usize, seed: u64) -> Matrix {
        let mut rng = stream_rng(seed, 1);
        let data = (0..n * m).map(|_| standard_normal(&mut rng)).collect();
        Matrix::from_row_major(n, m, data).unwrap()
    }

    fn response(z: &Matrix, coef: &[f64], noise: f64, seed: u64) -> Vec<f64> {
        let mut rng = stream_rng(seed, 2);
        z.mat_vec(coef)
            .into_iter()
            .map(|v| v + noise * standard_normal(&mut rng))
            .collect()
    }

    fn all(m: usize) -> BTreeSet<usize> {
        (0..m).collect()
    }

    #[test]
    fn empty_support_is_zero() {
        let z = random_design(20, 3, 0);
        let y = response(&z, &[1.0, 0.0, 0.0], 0.1, 0);
        let g = Gram::new(&y, &z).unwrap();
        let sol = fixed_support_solve(&g, &[], &PenaltySpec::l1(0.1).unwrap());
        assert_eq!(sol.theta, vec![0.0; 3]);
        let yy: f64 = y.iter().map(|v| v * v).sum::<f64>() / 40.0;
        assert!((sol.objective - yy).abs() < 1e-12);
        let r = restricted_pls(
            &g,
            &BTreeSet::new(),
            &PenaltySpec::mcp(0.1, 3.0).unwrap(),
            SolveMode::Exact,
        )
        .unwrap();
        assert!(r.support.is_empty());
    }

    #[test]
    fn noiseless_l0_single_column() {
        let z = random_design(30, 3, 1);
        let y = z.column(0);
        let g = Gram::new(&y, &z).unwrap();
        let lam = 0.3;
        let sol = fixed_support_solve(&g, &[0], &PenaltySpec::l0(lam).unwrap());
        assert!((sol.theta[0] - 1.0).abs() < 1e-12);
        assert!((sol.objective - lam * lam / 2.0).abs() < 1e-12);
    }

    // Accelerated proximal gradient on the full ℓ1 problem, computed from
    // the raw data rather than the Gram statistics.
    fn prox_gradient_l1(y: &[f64], z: &Matrix, lambda: f64, iters: usize) -> f64 {
        let n = y.len() as f64;
        let m = z.cols();
        let g = z.gram().scale(1.0 / n);
        let step = 1.0 / crate::linalg::symmetric_eigen(&g).unwrap().values[m - 1];
        let obj = |t: &[f64]| {
            let r: Vec<f64> = z.mat_vec(t).iter().zip(y).map(|(a, b)| b - a).collect();
            r.iter().map(|v| v * v).sum::<f64>() / (2.0 * n) + lambda * t.iter().map(|v| v.abs()).sum::<f64>()
        };
        let mut x = vec![0.0; m];
        let mut v = x.clone();
        let mut t: f64 = 1.0;
        for _ in 0..iters {
            let r: Vec<f64> = z.mat_vec(&v).iter().zip(y).map(|(a, b)| a - b).collect();
            let grad: Vec<f64> = z.tr_mat_vec(&r).into_iter().map(|g| g / n).collect();
            let next: Vec<f64> = v
                .iter()
                .zip(&grad)
                .map(|(vi, gi)| {
                    let u = vi - step * gi;
                    u.signum() * (u.abs() - step * lambda).max(0.0)
                })
                .collect();
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            v = next
                .iter()
                .zip(&x)
                .map(|(a, b)| a + (t - 1.0) / t_next * (a - b))
                .collect();
            x = next;
            t = t_next;
        }
        obj(&x)
    }

    #[test]
    fn l1_matches_proximal_gradient() {
        for seed in 0..10 {
            let z = random_design(50, 5, seed);
            let y = response(&z, &[1.5, 0.0, -0.7, 0.0, 0.2], 0.5, seed);
            let g = Gram::new(&y, &z).unwrap();
            let pen = PenaltySpec::l1(0.15).unwrap();
            let sol = fixed_support_solve(&g, &[0, 1, 2, 3, 4], &pen);
            let oracle = prox_gradient_l1(&y, &z, 0.15, 2000);
            assert!(
                (sol.objective - oracle).abs() < 1e-8,
                "{seed}: {} vs {}",
                sol.objective,
                oracle
            );
            assert!(sol.converged);
        }
    }

    #[test]
    fn exact_and_cd_agree_on_planted_support() {
        let z = random_design(200, 6, 11);
        let y = response(&z, &[2.0, 0.0, -1.5, 0.0, 0.0, 0.0], 1.0, 11);
        let g = Gram::new(&y, &z).unwrap();
        let pen = PenaltySpec::mcp(0.2, 3.0).unwrap();
        let exact = restricted_pls(&g, &all(6), &pen, SolveMode::Exact).unwrap();
        let cd = restricted_pls(&g, &all(6), &pen, SolveMode::CoordinateDescent { restarts: 5, seed: 0 }).unwrap();
        assert_eq!(exact.support, BTreeSet::from([0, 2]));
        assert_eq!(cd.support, BTreeSet::from([0, 2]));
        assert!(cd.objective >= exact.objective - 1e-12);
    }

    #[test]
    fn huge_l0_penalty_selects_nothing() {
        let z = random_design(40, 4, 5);
        let y = response(&z, &[1.0, -1.0, 0.5, 0.0], 0.3, 5);
        let g = Gram::new(&y, &z).unwrap();
        let yy = y.iter().map(|v| v * v).sum::<f64>() / 40.0;
        let pen = PenaltySpec::l0((2.0 * yy).sqrt()).unwrap();
        let sol = restricted_pls(&g, &all(4), &pen, SolveMode::Exact).unwrap();
        assert!(sol.support.is_empty());
        // direct check: every singleton is worse than the empty model
        for k in 0..4 {
            assert!(fixed_support_solve(&g, &[k], &pen).objective > sol.objective);
        }
    }

    #[test]
    fn exact_cap() {
        let z = random_design(30, 21, 0);
        let y = z.column(0);
        let g = Gram::new(&y, &z).unwrap();
        assert!(matches!(
            restricted_pls(&g, &all(21), &PenaltySpec::l0(0.1).unwrap(), SolveMode::Exact),
            Err(Error::ExactCapExceeded { size: 21, cap: 20 })
        ));
    }

    #[test]
    fn rank_deficient_design_is_flagged() {
        let mut z = random_design(20, 3, 3);
        for i in 0..20 {
            z[(i, 2)] = z[(i, 0)];
        }
        let y = response(&z, &[1.0, 1.0, 0.0], 0.1, 3);
        let g = Gram::new(&y, &z).unwrap();
        let sol = fixed_support_solve(&g, &[0, 1, 2], &PenaltySpec::l0(0.01).unwrap());
        assert!(sol.rank_deficient);
        assert!(sol.objective.is_finite());
    }

    #[test]
    fn restriction_monotonicity() {
        // planted support {0, 2}; the exact fit over any superset that still
        // recovers it must also recover it over intermediate sets
        let z = random_design(300, 6, 21);
        let y = response(&z, &[1.0, 0.0, -1.0, 0.0, 0.0, 0.0], 0.5, 21);
        let g = Gram::new(&y, &z).unwrap();
        let pen = PenaltySpec::mcp(0.15, 3.0).unwrap();
        let truth = BTreeSet::from([0, 2]);
        let full = restricted_pls(&g, &all(6), &pen, SolveMode::Exact).unwrap();
        assert_eq!(full.support, truth);
        for extra in [vec![], vec![1], vec![3, 5], vec![1, 4, 5]] {
            let mut s = truth.clone();
            s.extend(extra);
            assert_eq!(restricted_pls(&g, &s, &pen, SolveMode::Exact).unwrap().support, truth);
        }
    }

    #[test]
    fn neighbourhood_never_uses_own_column() {
        let z = random_design(50, 4, 8);
        let x = DataMatrix::new(z).unwrap();
        let pen = PenaltySpec::mcp(0.05, 3.0).unwrap();
        let s = BTreeSet::from([0, 1, 3]);
        let sol = neighbourhood_fit(&x, 2, &s, &pen, SolveMode::Exact).unwrap();
        assert_eq!(sol.theta[2], 0.0);
        assert!(neighbourhood_fit(&x, 2, &BTreeSet::from([2]), &pen, SolveMode::Exact).is_err());
        let empty = neighbourhood_fit(&x, 2, &BTreeSet::new(), &pen, SolveMode::Exact).unwrap();
        assert!(empty.support.is_empty());
    }

    #[test]
    fn cd_matches_exact_on_most_random_problems() {
        let mut agree = 0;
        let mut total = 0;
        for family in [PenaltyFamily::L1, PenaltyFamily::Mcp, PenaltyFamily::Scad] {
            for seed in 0..100u64 {
                let m = 3 + (seed % 6) as usize;
                let z = random_design(50, m, seed + 1000);
                let coef: Vec<f64> = (0..m).map(|k| if k % 3 == 0 { 1.0 } else { 0.0 }).collect();
                let y = response(&z, &coef, 1.0, seed);
                let g = Gram::new(&y, &z).unwrap();
                let pen = match family {
                    PenaltyFamily::L1 => PenaltySpec::l1(0.2),
                    PenaltyFamily::Mcp => PenaltySpec::mcp(0.2, 3.0),
                    _ => PenaltySpec::scad(0.2, 3.7),
                }
                .unwrap();
                let exact = restricted_pls(&g, &all(m), &pen, SolveMode::Exact).unwrap();
                let cd = restricted_pls(&g, &all(m), &pen, SolveMode::CoordinateDescent { restarts: 5, seed }).unwrap();
                assert!(cd.objective >= exact.objective - 1e-9);
                if family == PenaltyFamily::L1 {
                    assert!((cd.objective - exact.objective).abs() < 1e-8);
                } else {
                    total += 1;
                    if (cd.objective - exact.objective).abs() < 1e-8 {
                        agree += 1;
                    }
                }
            }
        }
        assert!(agree * 100 >= total * 95, "{agree}/{total}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn solutions_beat_zero_and_respect_support(seed in 0u64..10_000, mask in 0u32..64, lam in 0.01f64..1.0) {
            let z = random_design(25, 6, seed);
            let y = response(&z, &[1.0, -0.5, 0.0, 0.3, 0.0, 0.8], 0.7, seed);
            let g = Gram::new(&y, &z).unwrap();
            let s: BTreeSet<usize> = (0..6).filter(|k| mask >> k & 1 == 1).collect();
            for pen in [PenaltySpec::mcp(lam, 2.5).unwrap(), PenaltySpec::l0(lam).unwrap(), PenaltySpec::l1(lam).unwrap()] {
                for mode in [SolveMode::Exact, SolveMode::CoordinateDescent { restarts: 3, seed }] {
                    let sol = restricted_pls(&g, &s, &pen, mode).unwrap();
                    prop_assert!(sol.support.is_subset(&s));
                    prop_assert!(sol.objective.is_finite());
                    prop_assert!(sol.objective <= 0.5 * g.yy + 1e-12);
                    prop_assert!((sol.objective - g.objective(&sol.theta, &pen)).abs() < 1e-12);
                }
            }
        }
    }
}
