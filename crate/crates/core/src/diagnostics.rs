//! Computable surrogates for the conditions under which the estimators are
//! consistent. Cone and width conditions are only probed over finite sets
//! of directions, so their outputs are estimates, not certificates.

use std::collections::BTreeSet;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equivalence::{class_summary, dag_for_permutation, min_trace_permutation, traces, EnumerationMode};
use crate::error::{Error, Result};
use crate::linalg::{dot, symmetric_eigen, Matrix};
use crate::model::{CovarianceMatrix, DataMatrix, SUPPORT_TOL};
use crate::penalty::PenaltySpec;
use crate::pls::{restricted_pls, Gram, SolveMode, EXACT_CAP};
use crate::sampling::{sample_gaussian_with, standard_normal, stream_rng};

/// Log-spaced scales applied to every probe direction.
fn scale_grid() -> Vec<f64> {
    (0..=40).map(|k| 10f64.powf(-4.0 + 7.0 * k as f64 / 40.0)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GwCheck {
    pub holds_on_sample: bool,
    pub min_margin: f64,
    pub directions_tested: usize,
}

/// Probes `δ[(1/2n)‖Zu‖² + ρ_λ(u)] − (1/n)|⟨w, Zu⟩| ≥ 0` over scaled
/// coordinate directions, random sparse directions and multiples of `Zᵀw`.
/// A negative minimum certifies a violation; a nonnegative one is evidence.
pub fn gw_check(
    w: &[f64],
    z: &Matrix,
    penalty: &PenaltySpec,
    delta: f64,
    directions: usize,
    seed: u64,
) -> Result<GwCheck> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidConfig(format!("delta = {delta} must lie in (0, 1)")));
    }
    let n = z.rows();
    if w.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("noise of length {n}"),
            found: format!("length {}", w.len()),
        });
    }
    let m = z.cols();
    let nf = n as f64;
    let g = z.gram().scale(1.0 / nf);
    let ztw: Vec<f64> = z.tr_mat_vec(w).into_iter().map(|v| v / nf).collect();
    let margin = |u: &[f64]| {
        let quad = dot(u, &g.mat_vec(u));
        delta * (0.5 * quad + penalty.vector(u)) - dot(u, &ztw).abs()
    };

    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for i in 0..m {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        dirs.push(e);
    }
    let mut rng = stream_rng(seed, 0);
    for _ in 0..directions {
        let k = rng.random_range(1..=m.min(3));
        let mut u = vec![0.0; m];
        for _ in 0..k {
            u[rng.random_range(0..m)] = standard_normal(&mut rng);
        }
        dirs.push(u);
    }
    if ztw.iter().any(|v| *v != 0.0) {
        dirs.push(ztw.clone());
    }

    let grid = scale_grid();
    let mut min_margin = f64::INFINITY;
    let mut tested = 0;
    for d in &dirs {
        let norm = dot(d, d).sqrt();
        if norm == 0.0 {
            continue;
        }
        for &t in &grid {
            let u: Vec<f64> = d.iter().map(|v| v * t / norm).collect();
            min_margin = min_margin.min(margin(&u));
            tested += 1;
        }
    }
    Ok(GwCheck {
        holds_on_sample: min_margin >= 0.0,
        min_margin,
        directions_tested: tested,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReEstimate {
    /// Smallest `‖Zu‖²/(n‖u‖²)` found: an upper bound on the true constant.
    pub kappa_sq: f64,
    pub method: String,
    pub directions_tested: usize,
}

/// Samples the cone `‖u_{Aᶜ}‖₁ ≤ ξ‖u_A‖₁` for the smallest Rayleigh
/// quotient of `ZᵀZ/n`: random cone points, the bottom eigenvector of the
/// `A` block, the bottom eigenvector of the whole matrix when it lies in the
/// cone, and boundary rays `e_a ± ξ e_b`.
pub fn re_estimate(z: &Matrix, a: &BTreeSet<usize>, xi: f64, directions: usize, seed: u64) -> Result<ReEstimate> {
    let g = z.gram().scale(1.0 / z.rows() as f64);
    re_estimate_gram(&g, a, xi, directions, seed)
}

pub fn re_estimate_gram(g: &Matrix, a: &BTreeSet<usize>, xi: f64, directions: usize, seed: u64) -> Result<ReEstimate> {
    let m = g.rows();
    if a.is_empty() {
        return Err(Error::InvalidConfig("RE estimate needs a nonempty set A".into()));
    }
    if let Some(&k) = a.iter().find(|&&k| k >= m) {
        return Err(Error::IndexError {
            index: k,
            reason: format!("set member outside 0..{m}"),
        });
    }
    if !(xi >= 0.0) {
        return Err(Error::InvalidConfig(format!("cone parameter {xi} must be nonnegative")));
    }
    let inside: Vec<usize> = a.iter().copied().collect();
    let outside: Vec<usize> = (0..m).filter(|k| !a.contains(k)).collect();
    let rayleigh = |u: &[f64]| dot(u, &g.mat_vec(u)) / dot(u, u);
    let mut best = f64::INFINITY;
    let mut tested = 0;
    let mut consider = |u: &[f64]| {
        if dot(u, u) > 0.0 {
            best = best.min(rayleigh(u));
            tested += 1;
        }
    };

    let block = symmetric_eigen(&g.select(&inside, &inside))?;
    let mut u = vec![0.0; m];
    for (r, &k) in inside.iter().enumerate() {
        u[k] = block.vectors[(r, 0)];
    }
    consider(&u);

    let full = symmetric_eigen(g)?;
    let v = full.vectors.column(0);
    let l1 = |idx: &[usize]| idx.iter().map(|&k| v[k].abs()).sum::<f64>();
    if l1(&outside) <= xi * l1(&inside) {
        consider(&v);
    }

    for &i in &inside {
        for &o in &outside {
            for s in [1.0, -1.0] {
                let mut u = vec![0.0; m];
                u[i] = 1.0;
                u[o] = s * xi;
                consider(&u);
            }
        }
    }

    let mut rng = stream_rng(seed, 0);
    for _ in 0..directions {
        let mut u = vec![0.0; m];
        for &k in &inside {
            u[k] = standard_normal(&mut rng);
        }
        if !outside.is_empty() {
            let budget = xi * inside.iter().map(|&k| u[k].abs()).sum::<f64>() * rng.random::<f64>();
            let raw: Vec<f64> = outside.iter().map(|_| standard_normal(&mut rng)).collect();
            let norm: f64 = raw.iter().map(|v| v.abs()).sum();
            if norm > 0.0 {
                for (r, &k) in raw.iter().zip(&outside) {
                    u[k] = r * budget / norm;
                }
            }
        }
        consider(&u);
    }
    Ok(ReEstimate {
        kappa_sq: best,
        method: "sampled l1 cone".into(),
        directions_tested: tested,
    })
}

/// Source of design matrices for the exponent estimate.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Fixed(Matrix),
    /// A fresh `n`-row Gaussian design per replicate.
    Random {
        sigma: CovarianceMatrix,
        n: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsExponent {
    pub failures: usize,
    pub replicates: usize,
    pub failure_rate: f64,
    /// `−log(rate)`, with the rate floored at `1/replicates`.
    pub exponent: f64,
    pub floored: bool,
}

/// Monte Carlo estimate of the probability that the exact restricted
/// minimiser over `restriction` (all coefficients when `None`) misses
/// `supp(θ)` or is not unique.
#[allow(clippy::too_many_arguments)]
pub fn empirical_ms_exponent(
    design: &Design,
    theta: &[f64],
    noise_var: f64,
    penalty: &PenaltySpec,
    restriction: Option<&BTreeSet<usize>>,
    replicates: usize,
    seed: u64,
) -> Result<MsExponent> {
    let m = theta.len();
    let cols = match design {
        Design::Fixed(z) => z.cols(),
        Design::Random { sigma, .. } => sigma.p(),
    };
    if cols != m {
        return Err(Error::DimensionMismatch {
            expected: format!("{m} design columns"),
            found: format!("{cols}"),
        });
    }
    let all: BTreeSet<usize> = (0..m).collect();
    let s = restriction.unwrap_or(&all);
    if s.len() > EXACT_CAP {
        return Err(Error::ExactCapExceeded {
            size: s.len(),
            cap: EXACT_CAP,
        });
    }
    if replicates == 0 || !(noise_var >= 0.0) {
        return Err(Error::InvalidConfig(
            "need replicates > 0 and noise variance >= 0".into(),
        ));
    }
    let truth: BTreeSet<usize> = (0..m).filter(|&k| theta[k].abs() > SUPPORT_TOL).collect();
    let sd = noise_var.sqrt();
    let fails = (0..replicates)
        .into_par_iter()
        .map(|r| -> Result<bool> {
            let mut rng = stream_rng(seed, r as u64);
            let z = match design {
                Design::Fixed(z) => z.clone(),
                Design::Random { sigma, n } => sample_gaussian_with(sigma, *n, &mut rng)?.matrix().clone(),
            };
            let y: Vec<f64> = z
                .mat_vec(theta)
                .into_iter()
                .map(|v| v + sd * standard_normal(&mut rng))
                .collect();
            let sol = restricted_pls(&Gram::new(&y, &z)?, s, penalty, SolveMode::Exact)?;
            Ok(sol.support != truth || sol.multiple_optima)
        })
        .collect::<Result<Vec<bool>>>()?;
    let failures = fails.iter().filter(|&&f| f).count();
    let rate = failures as f64 / replicates as f64;
    let floored = failures == 0;
    let eff = if floored { 1.0 / replicates as f64 } else { rate };
    Ok(MsExponent {
        failures,
        replicates,
        failure_rate: rate,
        exponent: -eff.ln(),
        floored,
    })
}

/// `h_n(u) = −u²/n + 2u/√(n+1) + 1/(n+1)` and `H_n(u) = u²/n + 2u/√n`.
pub fn concentration_envelope(n: usize, u: f64) -> (f64, f64) {
    let nf = n as f64;
    let h = -u * u / nf + 2.0 * u / (nf + 1.0).sqrt() + 1.0 / (nf + 1.0);
    let big_h = u * u / nf + 2.0 * u / nf.sqrt();
    (h, big_h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeCheck {
    pub points: usize,
    /// Points with `h + H > 5u/√n`.
    pub sum_violations: usize,
    /// Points with `1 − h ≤ 0`.
    pub positivity_violations: usize,
}

/// Checks both envelope inequalities on `points` log-spaced `u` in
/// `[n^{-1/2}, n/√(n+1))` for every `n`. The right endpoint is excluded
/// because `1 − h_n` vanishes there.
pub fn envelope_grid_check(ns: &[usize], points: usize) -> EnvelopeCheck {
    let mut out = EnvelopeCheck {
        points: 0,
        sum_violations: 0,
        positivity_violations: 0,
    };
    for &n in ns {
        let nf = n as f64;
        let lo = nf.powf(-0.5).ln();
        let hi = (nf / (nf + 1.0).sqrt()).ln();
        for k in 0..points {
            let u = (lo + (hi - lo) * k as f64 / points as f64).exp();
            let (h, big_h) = concentration_envelope(n, u);
            out.points += 1;
            if h + big_h > 5.0 * u / nf.sqrt() {
                out.sum_violations += 1;
            }
            if 1.0 - h <= 0.0 {
                out.positivity_violations += 1;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionOptions {
    pub delta: f64,
    pub xi: f64,
    pub re_directions: usize,
    pub gw_directions: usize,
    /// Orderings sampled when `p` is too large to enumerate.
    pub samples: usize,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        Self {
            delta: 0.5,
            xi: 3.0,
            re_directions: 10_000,
            gw_directions: 200,
            samples: 2000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub p: usize,
    pub n: usize,
    pub penalty: PenaltySpec,
    pub exact: bool,
    pub d_sigma: usize,
    pub betamin_sigma: Option<f64>,
    pub lambda_min_sigma: f64,
    /// `ρ_λ(β_min) λ_min(Σ) / ρ'_λ(0+)²`; needs to exceed 2.
    pub betamin_ratio: Option<f64>,
    /// `√((d+1) log p / n)`.
    pub rate: f64,
    pub min_trace_permutation: Vec<usize>,
    pub min_trace: f64,
    pub min_trace_unique: bool,
    /// `ρ_λ(B(π₀)) / tr Ω(π₀)`; compared against a multiple of `rate`.
    pub mintrace_ratio: f64,
    pub mintrace_ratio_over_rate: f64,
    /// `1 − max tr Ω(π₀)/tr Ω(π)` over orderings with a different trace.
    pub mintrace_gap: Option<f64>,
    /// `mintrace_gap / rate`, the largest admissible gap constant.
    pub implied_a3: Option<f64>,
    /// The minimum-trace DAG has no edges.
    pub empty_min_trace_dag: bool,
    pub gw_holds: bool,
    pub gw_min_margin: f64,
    pub re_kappa_sq: Option<f64>,
    pub re_method: String,
    /// Direction in which each ratio has to point for the theory to apply.
    pub requirements: Vec<String>,
}

/// Population condition ratios for `Σ`, plus sampled GW and RE evidence on
/// one `n`-row draw from `Σ`.
pub fn condition_report(
    sigma: &CovarianceMatrix,
    penalty: &PenaltySpec,
    n: usize,
    seed: u64,
    options: &ConditionOptions,
) -> Result<ConditionReport> {
    let p = sigma.p();
    if n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let mode = EnumerationMode::auto(p, options.samples, seed);
    let summary = class_summary(sigma, &mode)?;
    let mt = min_trace_permutation(sigma, &mode)?;
    let lambda_min = symmetric_eigen(sigma.matrix())?.values[0];
    let rate = (((summary.d_sigma + 1) as f64) * (p as f64).ln() / n as f64).sqrt();

    let betamin_ratio = match (summary.betamin_sigma, penalty.constants().derivative_at_zero) {
        (Some(b), Some(d0)) if d0 > 0.0 => Some(penalty.value_abs(b) * lambda_min / (d0 * d0)),
        _ => None,
    };
    let mintrace_ratio = penalty.matrix(mt.dag.weights()) / mt.trace;
    let tol = 1e-9 * mt.trace.abs().max(1.0);
    let worst = traces(sigma, &mode)?
        .into_iter()
        .map(|(_, t)| t)
        .filter(|t| (t - mt.trace).abs() > tol)
        .map(|t| mt.trace / t)
        .fold(None, |acc: Option<f64>, r| Some(acc.map_or(r, |a| a.max(r))));
    let mintrace_gap = worst.map(|r| 1.0 - r);
    let implied_a3 = mintrace_gap.and_then(|g| (rate > 0.0).then(|| g / rate));

    // sampled evidence: one draw, each node regressed on its parents in the
    // minimum-trace DAG
    let mut rng: ChaCha8Rng = stream_rng(seed, 1);
    let x: DataMatrix = sample_gaussian_with(sigma, n, &mut rng)?;
    let (b0, _) = dag_for_permutation(sigma, &mt.permutation)?;
    let mut gw_min = f64::INFINITY;
    for j in 0..p {
        let col = b0.column(j);
        let resid: Vec<f64> = (0..n)
            .map(|r| x.matrix()[(r, j)] - dot(x.matrix().row(r), &col))
            .collect();
        let others: Vec<usize> = (0..p).filter(|&k| k != j).collect();
        let z = x.matrix().select_columns(&others);
        let check = gw_check(
            &resid,
            &z,
            penalty,
            options.delta,
            options.gw_directions,
            seed.wrapping_add(j as u64),
        )?;
        gw_min = gw_min.min(check.min_margin);
    }
    let (re_kappa_sq, re_method) = match (0..p).max_by_key(|&j| (b0.parents(j).len(), std::cmp::Reverse(j))) {
        Some(j) if !b0.parents(j).is_empty() => {
            let est = re_estimate_gram(
                &x.scaled_gram(),
                &b0.parents(j),
                options.xi,
                options.re_directions,
                seed,
            )?;
            (Some(est.kappa_sq), est.method)
        }
        _ => (None, "not applicable: empty DAG".to_string()),
    };

    Ok(ConditionReport {
        p,
        n,
        penalty: *penalty,
        exact: summary.exact,
        d_sigma: summary.d_sigma,
        betamin_sigma: summary.betamin_sigma,
        lambda_min_sigma: lambda_min,
        betamin_ratio,
        rate,
        min_trace_permutation: mt.permutation.as_slice().to_vec(),
        min_trace: mt.trace,
        min_trace_unique: mt.unique,
        mintrace_ratio,
        mintrace_ratio_over_rate: if rate > 0.0 {
            mintrace_ratio / rate
        } else {
            f64::INFINITY
        },
        mintrace_gap,
        implied_a3,
        empty_min_trace_dag: mt.dag.edge_count() == 0,
        gw_holds: gw_min >= 0.0,
        gw_min_margin: gw_min,
        re_kappa_sq,
        re_method,
        requirements: vec![
            "betamin_ratio > 2".into(),
            "mintrace_ratio_over_rate bounded below by a positive constant".into(),
            "implied_a3 > 0".into(),
            "gw_min_margin >= 0".into(),
            "re_kappa_sq bounded away from 0".into(),
        ],
    })
}
