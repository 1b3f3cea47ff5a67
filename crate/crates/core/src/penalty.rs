//! Coordinate-separable regularizers `ρ_λ` and their theory constants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::model::SUPPORT_TOL;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyFamily {
    Mcp,
    Scad,
    L1,
    L0,
    CappedL1,
}

impl PenaltyFamily {
    pub fn needs_gamma(self) -> bool {
        matches!(self, Self::Mcp | Self::Scad | Self::CappedL1)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mcp => "mcp",
            Self::Scad => "scad",
            Self::L1 => "l1",
            Self::L0 => "l0",
            Self::CappedL1 => "capped_l1",
        }
    }
}

impl fmt::Display for PenaltyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PenaltyFamily {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mcp" => Ok(Self::Mcp),
            "scad" => Ok(Self::Scad),
            "l1" | "lasso" => Ok(Self::L1),
            "l0" => Ok(Self::L0),
            "capped_l1" | "capped-l1" | "cappedl1" => Ok(Self::CappedL1),
            other => Err(Error::InvalidPenalty(format!("unknown family '{other}'"))),
        }
    }
}

/// A regularizer: family, strength `λ` and (for MCP, SCAD and capped ℓ1)
/// the shape parameter `γ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPenalty", into = "RawPenalty")]
pub struct PenaltySpec {
    family: PenaltyFamily,
    lambda: f64,
    gamma: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawPenalty {
    family: PenaltyFamily,
    lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
}

impl TryFrom<RawPenalty> for PenaltySpec {
    type Error = Error;
    fn try_from(r: RawPenalty) -> Result<Self> {
        Self::new(r.family, r.lambda, r.gamma)
    }
}

impl From<PenaltySpec> for RawPenalty {
    fn from(p: PenaltySpec) -> Self {
        RawPenalty {
            family: p.family,
            lambda: p.lambda,
            gamma: p.gamma,
        }
    }
}

/// A constant the theory leaves unconstrained (any value in `[0, ∞)` works).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constant {
    Value(f64),
    Free,
}

impl Constant {
    pub fn value(self) -> Option<f64> {
        match self {
            Self::Value(v) => Some(v),
            Self::Free => None,
        }
    }
}

/// `ρ'_λ(0+)`, the capped-ℓ1 lower-bound constants `(μ₁, μ₂)` and, for
/// ℓ0-compatible penalties, the upper-bound constant `μ₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryConstants {
    /// `None` when the right derivative at zero does not exist (ℓ0).
    pub derivative_at_zero: Option<f64>,
    pub mu1: Constant,
    pub mu2: Constant,
    /// `None` when the penalty is not ℓ0-compatible.
    pub mu3: Option<f64>,
}

/// One piece `ρ(t) = a2·t² + a1·t + const` on `[lo, hi]`.
#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    a2: f64,
    a1: f64,
}

impl PenaltySpec {
    pub fn new(family: PenaltyFamily, lambda: f64, gamma: Option<f64>) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidPenalty(format!("lambda must be >= 0, got {lambda}")));
        }
        let gamma = if family.needs_gamma() {
            let g = gamma.ok_or_else(|| Error::InvalidPenalty(format!("family {family} requires gamma")))?;
            let min = match family {
                PenaltyFamily::Scad => 2.0,
                PenaltyFamily::Mcp => 1.0,
                _ => 0.0,
            };
            if !(g.is_finite() && g > min) {
                return Err(Error::InvalidPenalty(format!(
                    "family {family} requires gamma > {min}, got {g}"
                )));
            }
            Some(g)
        } else {
            None
        };
        Ok(Self { family, lambda, gamma })
    }

    pub fn mcp(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Mcp, lambda, Some(gamma))
    }

    pub fn scad(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::Scad, lambda, Some(gamma))
    }

    pub fn l1(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::L1, lambda, None)
    }

    pub fn l0(lambda: f64) -> Result<Self> {
        Self::new(PenaltyFamily::L0, lambda, None)
    }

    pub fn capped_l1(lambda: f64, gamma: f64) -> Result<Self> {
        Self::new(PenaltyFamily::CappedL1, lambda, Some(gamma))
    }

    pub fn family(&self) -> PenaltyFamily {
        self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    /// Same family and shape with a different `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.family, lambda, self.gamma)
    }

    pub fn is_convex(&self) -> bool {
        self.family == PenaltyFamily::L1
    }

    /// `ρ_λ(x)` for `x ≥ 0`.
    pub fn value(&self, x: f64) -> Result<f64> {
        if x < 0.0 || x.is_nan() {
            return Err(Error::NegativeInput(x));
        }
        Ok(self.value_abs(x))
    }

    /// `ρ_λ(|x|)`.
    pub fn value_abs(&self, x: f64) -> f64 {
        let t = x.abs();
        let lam = self.lambda;
        match self.family {
            PenaltyFamily::L1 => lam * t,
            PenaltyFamily::L0 => {
                if t > SUPPORT_TOL {
                    0.5 * lam * lam
                } else {
                    0.0
                }
            }
            PenaltyFamily::Mcp => {
                let g = self.gamma.unwrap_or_default();
                if t < lam * g {
                    lam * (t - t * t / (2.0 * lam * g))
                } else {
                    0.5 * lam * lam * g
                }
            }
            PenaltyFamily::Scad => {
                let g = self.gamma.unwrap_or_default();
                if t <= lam {
                    lam * t
                } else if t <= g * lam {
                    (2.0 * g * lam * t - t * t - lam * lam) / (2.0 * (g - 1.0))
                } else {
                    0.5 * lam * lam * (g + 1.0)
                }
            }
            PenaltyFamily::CappedL1 => {
                let g = self.gamma.unwrap_or_default();
                lam * t.min(g * lam)
            }
        }
    }

    /// `Σ_i ρ_λ(|v_i|)`.
    pub fn vector(&self, v: &[f64]) -> f64 {
        v.iter().map(|&x| self.value_abs(x)).sum()
    }

    /// Entrywise sum `Σ_ij ρ_λ(|B_ij|)`.
    pub fn matrix(&self, b: &Matrix) -> f64 {
        self.vector(b.as_slice())
    }

    pub fn constants(&self) -> TheoryConstants {
        let lam = self.lambda;
        let g = self.gamma.unwrap_or(f64::NAN);
        match self.family {
            PenaltyFamily::Mcp => TheoryConstants {
                derivative_at_zero: Some(lam),
                mu1: Constant::Value(0.5),
                mu2: Constant::Value(g / 2.0),
                mu3: Some(g / 2.0),
            },
            PenaltyFamily::L1 => TheoryConstants {
                derivative_at_zero: Some(lam),
                mu1: Constant::Value(1.0),
                mu2: Constant::Free,
                mu3: None,
            },
            PenaltyFamily::L0 => TheoryConstants {
                derivative_at_zero: None,
                mu1: Constant::Free,
                mu2: Constant::Value(0.5),
                mu3: Some(0.5),
            },
            // chord from the origin to the start of the plateau
            PenaltyFamily::Scad => TheoryConstants {
                derivative_at_zero: Some(lam),
                mu1: Constant::Value((g + 1.0) / (2.0 * g)),
                mu2: Constant::Value((g + 1.0) / 2.0),
                mu3: Some((g + 1.0) / 2.0),
            },
            PenaltyFamily::CappedL1 => TheoryConstants {
                derivative_at_zero: Some(lam),
                mu1: Constant::Value(1.0),
                mu2: Constant::Value(g),
                mu3: Some(g),
            },
        }
    }

    fn pieces(&self) -> Vec<Piece> {
        let lam = self.lambda;
        let inf = f64::INFINITY;
        let flat = |lo: f64| Piece {
            lo,
            hi: inf,
            a2: 0.0,
            a1: 0.0,
        };
        match self.family {
            PenaltyFamily::L1 => vec![Piece {
                lo: 0.0,
                hi: inf,
                a2: 0.0,
                a1: lam,
            }],
            // t = 0 is handled by the caller as its own candidate
            PenaltyFamily::L0 => vec![flat(0.0)],
            PenaltyFamily::Mcp => {
                let g = self.gamma.unwrap_or_default();
                vec![
                    Piece {
                        lo: 0.0,
                        hi: g * lam,
                        a2: -1.0 / (2.0 * g),
                        a1: lam,
                    },
                    flat(g * lam),
                ]
            }
            PenaltyFamily::Scad => {
                let g = self.gamma.unwrap_or_default();
                vec![
                    Piece {
                        lo: 0.0,
                        hi: lam,
                        a2: 0.0,
                        a1: lam,
                    },
                    Piece {
                        lo: lam,
                        hi: g * lam,
                        a2: -1.0 / (2.0 * (g - 1.0)),
                        a1: g * lam / (g - 1.0),
                    },
                    flat(g * lam),
                ]
            }
            PenaltyFamily::CappedL1 => {
                let g = self.gamma.unwrap_or_default();
                vec![
                    Piece {
                        lo: 0.0,
                        hi: g * lam,
                        a2: 0.0,
                        a1: lam,
                    },
                    flat(g * lam),
                ]
            }
        }
    }

    /// Global minimiser of the scalar problem `(a/2)θ² − cθ + ρ_λ(|θ|)`.
    ///
    /// Every supported family is piecewise quadratic in `|θ|`, so the minimum
    /// is found exactly by comparing the clipped stationary point of each
    /// piece with the piece endpoints. Ties go to the smaller `|θ|`.
    pub fn scalar_minimizer(&self, a: f64, c: f64) -> f64 {
        if !(a > 0.0) {
            return 0.0;
        }
        let mag = c.abs();
        let objective = |t: f64| 0.5 * a * t * t - mag * t + self.value_abs(t);
        let mut best_t = 0.0;
        let mut best = 0.0;
        let mut consider = |t: f64| {
            if !t.is_finite() || t < 0.0 {
                return;
            }
            let v = objective(t);
            if v < best || (v == best && t < best_t) {
                best = v;
                best_t = t;
            }
        };
        for piece in self.pieces() {
            let q = 0.5 * a + piece.a2;
            let b = piece.a1 - mag;
            if q > 0.0 {
                consider((-b / (2.0 * q)).clamp(piece.lo, piece.hi));
            }
            consider(piece.lo);
            consider(piece.hi);
        }
        c.signum() * best_t
    }
}

impl fmt::Display for PenaltySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.gamma {
            Some(g) => write!(f, "{}(lambda={}, gamma={})", self.family, self.lambda, g),
            None => write!(f, "{}(lambda={})", self.family, self.lambda),
        }
    }
}

/// `{0} ∪ {10⁻⁶, …, 10³}` with 200 log-spaced points.
pub fn property_grid() -> Vec<f64> {
    let mut g = vec![0.0];
    let (lo, hi) = (-6.0_f64, 3.0_f64);
    for k in 0..200 {
        let e = lo + (hi - lo) * k as f64 / 199.0;
        g.push(10f64.powf(e));
    }
    g
}

/// A failed grid property, with the offending inputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyViolation {
    pub property: &'static str,
    pub x: f64,
    pub y: Option<f64>,
    pub detail: String,
}

/// Checks the regularity conditions on `grid`: `ρ(0) = 0`, monotone,
/// midpoint concave, the capped-ℓ1 lower bound with the family's `(μ₁, μ₂)`,
/// the `μ₃λ²` upper bound when ℓ0-compatible, subadditivity, and
/// `x ↦ ρ(x)/x` nonincreasing.
pub fn check_properties(spec: &PenaltySpec, grid: &[f64]) -> Vec<PropertyViolation> {
    const SLACK: f64 = 1e-12;
    let mut out = Vec::new();
    let rho = |x: f64| spec.value_abs(x);
    let lam = spec.lambda();
    let k = spec.constants();
    let mut push = |property, x, y, detail: String| out.push(PropertyViolation { property, x, y, detail });

    if rho(0.0) != 0.0 {
        push("zero_at_origin", 0.0, None, format!("rho(0) = {}", rho(0.0)));
    }
    for w in grid.windows(2) {
        if rho(w[1]) + SLACK < rho(w[0]) {
            push(
                "nondecreasing",
                w[0],
                Some(w[1]),
                format!("{} > {}", rho(w[0]), rho(w[1])),
            );
        }
    }
    // Free constants are checked at their most demanding value.
    let mu1 = k.mu1.value().unwrap_or(f64::INFINITY);
    let mu2 = k.mu2.value().unwrap_or(f64::INFINITY);
    for &x in grid {
        let lin = if x == 0.0 { 0.0 } else { mu1 * lam * x };
        let bound = lin.min(mu2 * lam * lam);
        if rho(x) + SLACK * (1.0 + bound.abs()) < bound {
            push("lower_bound", x, None, format!("rho = {} < {}", rho(x), bound));
        }
        if let Some(mu3) = k.mu3 {
            let up = mu3 * lam * lam;
            if rho(x) > up + SLACK * (1.0 + up) {
                push("l0_upper_bound", x, None, format!("rho = {} > {}", rho(x), up));
            }
        }
    }
    for (i, &x) in grid.iter().enumerate() {
        for &y in &grid[i..] {
            let mid = rho(0.5 * (x + y));
            let avg = 0.5 * (rho(x) + rho(y));
            if mid < avg - SLACK * (1.0 + avg) {
                push("midpoint_concave", x, Some(y), format!("{mid} < {avg}"));
            }
            if spec.family() != PenaltyFamily::L0 {
                let sum = rho(x) + rho(y);
                if rho(x + y) > sum + SLACK * (1.0 + sum) {
                    push("subadditive", x, Some(y), format!("{} > {}", rho(x + y), sum));
                }
            }
        }
    }
    let ratios: Vec<(f64, f64)> = grid.iter().filter(|&&x| x > 0.0).map(|&x| (x, rho(x) / x)).collect();
    for w in ratios.windows(2) {
        if w[1].1 > w[0].1 * (1.0 + SLACK) + SLACK {
            push(
                "ratio_nonincreasing",
                w[0].0,
                Some(w[1].0),
                format!("{} < {}", w[0].1, w[1].1),
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mcp_values() {
        let p = PenaltySpec::mcp(1.0, 2.0).unwrap();
        assert_eq!(p.value(0.0).unwrap(), 0.0);
        assert_eq!(p.value(2.0).unwrap(), 1.0);
        assert_eq!(p.value(5.0).unwrap(), 1.0);
        assert!((p.value(1.0).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(p.value(-1.0), Err(Error::NegativeInput(_))));
    }

    #[test]
    fn l0_and_l1_values() {
        let l0 = PenaltySpec::l0(2.0).unwrap();
        assert_eq!(l0.value(0.5).unwrap(), 2.0);
        assert_eq!(l0.value(0.0).unwrap(), 0.0);
        let l1 = PenaltySpec::l1(2.0).unwrap();
        assert_eq!(l1.value(0.25).unwrap(), 0.5);
    }

    #[test]
    fn scad_is_continuous_at_knots() {
        let p = PenaltySpec::scad(0.5, 3.7).unwrap();
        for knot in [0.5, 3.7 * 0.5] {
            let l = p.value_abs(knot - 1e-12);
            let r = p.value_abs(knot + 1e-12);
            assert!((l - r).abs() < 1e-9);
        }
    }

    #[test]
    fn matrix_penalty_on_reference_dags() {
        let (b1, _) = crate::examples::example_dag_pi1();
        let (b2, _) = crate::examples::example_dag_pi2();
        assert_eq!(PenaltySpec::l1(1.0).unwrap().matrix(b1.weights()), 15.0);
        assert_eq!(PenaltySpec::l0(1.0).unwrap().matrix(b2.weights()), 2.5);
        assert_eq!(PenaltySpec::l1(1.0).unwrap().matrix(&Matrix::zeros(3, 3)), 0.0);
    }

    #[test]
    fn constants_per_family() {
        let k = PenaltySpec::mcp(0.3, 3.0).unwrap().constants();
        assert_eq!(k.derivative_at_zero, Some(0.3));
        assert_eq!(k.mu1, Constant::Value(0.5));
        assert_eq!(k.mu2, Constant::Value(1.5));
        assert_eq!(k.mu3, Some(1.5));
        let k = PenaltySpec::l1(2.0).unwrap().constants();
        assert_eq!(k.derivative_at_zero, Some(2.0));
        assert_eq!(k.mu1, Constant::Value(1.0));
        assert_eq!(k.mu2, Constant::Free);
        assert_eq!(k.mu3, None);
        let k = PenaltySpec::l0(1.0).unwrap().constants();
        assert_eq!(k.derivative_at_zero, None);
        assert_eq!(k.mu2, Constant::Value(0.5));
        assert_eq!(k.mu3, Some(0.5));
    }

    #[test]
    fn validation() {
        assert!(PenaltySpec::mcp(-1.0, 3.0).is_err());
        assert!(PenaltySpec::mcp(1.0, 1.0).is_err());
        assert!(PenaltySpec::scad(1.0, 2.0).is_err());
        assert!(PenaltySpec::new(PenaltyFamily::Mcp, 1.0, None).is_err());
        assert_eq!(PenaltySpec::l1(1.0).unwrap().gamma(), None);
    }

    fn brute_scalar(spec: &PenaltySpec, a: f64, c: f64) -> f64 {
        let f = |t: f64| 0.5 * a * t * t - c * t + spec.value_abs(t);
        let span = 2.0 * (c.abs() / a + 1.0);
        let mut best = f(0.0);
        for k in 0..=400_000 {
            let t = -span + 2.0 * span * k as f64 / 400_000.0;
            best = best.min(f(t));
        }
        best
    }

    #[test]
    fn scalar_minimizer_matches_grid_search() {
        let specs = [
            PenaltySpec::mcp(0.4, 3.0).unwrap(),
            PenaltySpec::mcp(0.4, 1.5).unwrap(),
            PenaltySpec::scad(0.4, 3.7).unwrap(),
            PenaltySpec::l1(0.4).unwrap(),
            PenaltySpec::l0(0.4).unwrap(),
            PenaltySpec::capped_l1(0.4, 2.0).unwrap(),
        ];
        for spec in &specs {
            for &a in &[0.2, 0.5, 1.0, 3.0] {
                for &c in &[-2.0, -0.5, -0.3, 0.0, 0.1, 0.35, 0.6, 1.5] {
                    let t = spec.scalar_minimizer(a, c);
                    let got = 0.5 * a * t * t - c * t + spec.value_abs(t);
                    let want = brute_scalar(spec, a, c);
                    assert!(got <= want + 1e-9, "{spec} a={a} c={c}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn all_families_pass_property_suite() {
        let grid = property_grid();
        for spec in [
            PenaltySpec::mcp(0.7, 3.0).unwrap(),
            PenaltySpec::scad(0.7, 3.7).unwrap(),
            PenaltySpec::l1(0.7).unwrap(),
            PenaltySpec::l0(0.7).unwrap(),
            PenaltySpec::capped_l1(0.7, 2.0).unwrap(),
        ] {
            let v = check_properties(&spec, &grid);
            assert!(v.is_empty(), "{spec}: {:?}", &v[..v.len().min(3)]);
        }
    }

    #[test]
    fn parse_family_and_serde_keys() {
        assert_eq!("MCP".parse::<PenaltyFamily>().unwrap(), PenaltyFamily::Mcp);
        assert!("ridge".parse::<PenaltyFamily>().is_err());
        let spec = PenaltySpec::mcp(0.1, 3.0).unwrap();
        let json = serde_json::to_string(&spec).unwrap();
        assert_eq!(json, r#"{"family":"mcp","lambda":0.1,"gamma":3.0}"#);
        let back: PenaltySpec = serde_json::from_str(&json).unwrap();
        assert_eq!(back, spec);
        assert!(serde_json::from_str::<PenaltySpec>(r#"{"family":"mcp","lambda":0.1}"#).is_err());
    }
}
