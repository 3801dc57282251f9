//! Exact cumulant generating functions and the confidence function `T_r`.
//!
//! For a centered random variable `Y = f(X)` with CGF `Λ(λ) = log E e^{λY}`,
//!
//! ```text
//! T_r(f) = inf_{λ ≥ 0} (r + Λ(λ)) / λ
//! ```
//!
//! is the level-`r` Chernoff radius: `E_n f ≤ T_r(f)` with probability at
//! least `1 - e^{-nr}`. All laws here have finite support, so `Λ` is an exact
//! finite sum; a Gaussian linear functional is handled analytically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{self, exp_m1_minus_x, log_sum_exp};

/// Absolute tolerance for `Σ p_i = 1`.
pub const PROBABILITY_TOLERANCE: f64 = 1e-12;
/// Absolute tolerance for `E f(X) = 0`.
pub const CENTERING_TOLERANCE: f64 = 1e-10;

const LAMBDA_START: f64 = 1.0;
const LAMBDA_LOWER: f64 = 1e-12;
const LAMBDA_CAP: f64 = 1e8;
const LAMBDA_REL_TOL: f64 = 1e-10;

/// A law on finitely many distinct points of `R^d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteDistribution {
    support: Vec<Vec<f64>>,
    probabilities: Vec<f64>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl DiscreteDistribution {
    pub fn new(support: Vec<Vec<f64>>, probabilities: Vec<f64>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::input("distribution needs at least one support point"));
        }
        if support.len() != probabilities.len() {
            return Err(Error::input(format!(
                "support has {} points but {} probabilities were given",
                support.len(),
                probabilities.len()
            )));
        }
        if let Some(p) = probabilities.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::input(format!("probability {p} is not a nonnegative real")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOLERANCE {
            return Err(Error::input(format!("probabilities sum to {total}, not 1")));
        }
        let dim = support[0].len();
        if support.iter().any(|x| x.len() != dim || x.iter().any(|c| !c.is_finite())) {
            return Err(Error::input("support points must be finite and share one dimension"));
        }
        for i in 0..support.len() {
            for j in 0..i {
                if support[i] == support[j] {
                    return Err(Error::input(format!("support points {j} and {i} coincide")));
                }
            }
        }
        let mut acc = 0.0;
        let cumulative = probabilities
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self { support, probabilities, cumulative })
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn support(&self) -> &[Vec<f64>] {
        &self.support
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// `E v(X)` for values tabulated on the support.
    pub fn expectation(&self, values: &[f64]) -> f64 {
        self.probabilities.iter().zip(values).map(|(p, v)| p * v).sum()
    }

    /// Support index of the inverse CDF at `u ∈ [0, 1)`.
    pub fn inverse_cdf(&self, u: f64) -> usize {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        let i = self.cumulative.partition_point(|&c| c <= target);
        // zero-probability atoms can never be selected
        let mut i = i.min(self.len() - 1);
        while self.probabilities[i] == 0.0 && i > 0 {
            i -= 1;
        }
        i
    }
}

impl<'de> Deserialize<'de> for DiscreteDistribution {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            support: Vec<Vec<f64>>,
            probabilities: Vec<f64>,
        }
        let raw = Raw::deserialize(d)?;
        DiscreteDistribution::new(raw.support, raw.probabilities).map_err(serde::de::Error::custom)
    }
}

/// Values of a real function on the support of a [`DiscreteDistribution`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TabulatedFunction {
    values: Vec<f64>,
}

impl TabulatedFunction {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("function values must be finite"));
        }
        Ok(Self { values })
    }

    /// Checks the function against `dist` and requires `E f(X) = 0`.
    pub fn centered(dist: &DiscreteDistribution, values: Vec<f64>) -> Result<Self> {
        let f = Self::new(values)?;
        f.check_support(dist)?;
        let mean = f.mean(dist);
        if mean.abs() > CENTERING_TOLERANCE {
            return Err(Error::input(format!("function is not centered: E f(X) = {mean:e}")));
        }
        Ok(f)
    }

    pub fn zero(len: usize) -> Self {
        Self { values: vec![0.0; len] }
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

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn mean(&self, dist: &DiscreteDistribution) -> f64 {
        dist.expectation(&self.values)
    }

    pub fn check_support(&self, dist: &DiscreteDistribution) -> Result<()> {
        if self.values.len() != dist.len() {
            return Err(Error::input(format!(
                "function has {} values but the support has {} points",
                self.values.len(),
                dist.len()
            )));
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect() }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
enum OracleKind {
    Discrete {
        values: Vec<f64>,
        probabilities: Vec<f64>,
        log_probabilities: Vec<f64>,
        mean: f64,
        max_abs: f64,
        max: f64,
    },
    Gaussian {
        variance: f64,
    },
}

/// The map `λ ↦ log E e^{λ f(X)}`. Both supported kinds are finite on all of
/// `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CgfOracle {
    kind: OracleKind,
}

/// Exact CGF of `f(X)` for `X` drawn from `dist`.
pub fn cgf_discrete(dist: &DiscreteDistribution, f: &TabulatedFunction) -> Result<CgfOracle> {
    f.check_support(dist)?;
    Ok(CgfOracle::from_values(dist.probabilities(), f.values()))
}

impl CgfOracle {
    pub(crate) fn from_values(probabilities: &[f64], values: &[f64]) -> Self {
        // atoms with zero mass do not affect the law
        let (probabilities, values): (Vec<f64>, Vec<f64>) = probabilities
            .iter()
            .zip(values)
            .filter(|(p, _)| **p > 0.0)
            .map(|(p, v)| (*p, *v))
            .unzip();
        let mean = probabilities.iter().zip(&values).map(|(p, v)| p * v).sum();
        let max_abs = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_probabilities = probabilities.iter().map(|p| p.ln()).collect();
        Self {
            kind: OracleKind::Discrete { values, probabilities, log_probabilities, mean, max_abs, max },
        }
    }

    /// CGF of a centered normal variable with standard deviation `std`:
    /// `Λ(λ) = std² λ² / 2`.
    pub fn gaussian(std: f64) -> Result<Self> {
        if !(std.is_finite() && std >= 0.0) {
            return Err(Error::input(format!("standard deviation {std} must be nonnegative")));
        }
        Ok(Self { kind: OracleKind::Gaussian { variance: std * std } })
    }

    /// `Λ(λ)`.
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        match &self.kind {
            OracleKind::Gaussian { variance } => 0.5 * variance * lambda * lambda,
            OracleKind::Discrete { values, probabilities, log_probabilities, mean, max_abs, .. } => {
                if lambda.abs() * max_abs <= 1.0 {
                    // log(1 + λ E Y + E[e^{λY} - 1 - λY]) keeps precision near λ = 0
                    let excess: f64 = probabilities
                        .iter()
                        .zip(values)
                        .map(|(p, v)| p * exp_m1_minus_x(lambda * v))
                        .sum();
                    (lambda * mean + excess).ln_1p()
                } else {
                    let terms: Vec<f64> =
                        log_probabilities.iter().zip(values).map(|(lp, v)| lp + lambda * v).collect();
                    log_sum_exp(&terms)
                }
            }
        }
    }

    pub fn mean(&self) -> f64 {
        match &self.kind {
            OracleKind::Gaussian { .. } => 0.0,
            OracleKind::Discrete { mean, .. } => *mean,
        }
    }

    pub fn variance(&self) -> f64 {
        match &self.kind {
            OracleKind::Gaussian { variance } => *variance,
            OracleKind::Discrete { values, probabilities, mean, .. } => {
                let second: f64 = probabilities.iter().zip(values).map(|(p, v)| p * v * v).sum();
                (second - mean * mean).max(0.0)
            }
        }
    }

    pub fn is_centered(&self) -> bool {
        self.mean().abs() <= CENTERING_TOLERANCE
    }

    /// True when the variable is almost surely zero.
    pub fn is_zero(&self) -> bool {
        match &self.kind {
            OracleKind::Gaussian { variance } => *variance == 0.0,
            OracleKind::Discrete { max_abs, .. } => *max_abs == 0.0,
        }
    }

    /// Essential supremum of the variable (`+∞` for a Gaussian).
    pub fn supremum(&self) -> f64 {
        match &self.kind {
            OracleKind::Gaussian { .. } => f64::INFINITY,
            OracleKind::Discrete { max, .. } => *max,
        }
    }

    /// A characteristic magnitude of the variable, used to put `λ` in
    /// dimensionless units.
    pub fn scale(&self) -> f64 {
        match &self.kind {
            OracleKind::Gaussian { variance } => variance.sqrt(),
            OracleKind::Discrete { max_abs, .. } => *max_abs,
        }
    }

    /// Oracle of `α f`.
    pub fn scaled(&self, alpha: f64) -> Self {
        let kind = match &self.kind {
            OracleKind::Gaussian { variance } => OracleKind::Gaussian { variance: variance * alpha * alpha },
            OracleKind::Discrete { values, probabilities, log_probabilities, mean, max_abs, .. } => {
                let values: Vec<f64> = values.iter().map(|v| alpha * v).collect();
                let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                OracleKind::Discrete {
                    values,
                    probabilities: probabilities.clone(),
                    log_probabilities: log_probabilities.clone(),
                    mean: alpha * mean,
                    max_abs: alpha.abs() * max_abs,
                    max,
                }
            }
        };
        Self { kind }
    }
}

/// `T_r(f) = inf_{λ>0} (r + Λ(λ)) / λ`.
///
/// The objective is quasiconvex in `λ`; the minimum is bracketed by doubling
/// from `λ = 1/scale` and refined by golden section. For bounded variables the
/// infimum may only be approached as `λ → ∞`, where the objective tends to the
/// essential supremum, so the result is also capped by it.
pub fn rate_bound_t(oracle: &CgfOracle, r: f64) -> Result<f64> {
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::input(format!("rate r = {r} must be a nonnegative real")));
    }
    if !oracle.is_centered() {
        return Err(Error::input(format!(
            "T_r requires a centered function, mean is {:e}",
            oracle.mean()
        )));
    }
    Ok(rate_bound_unchecked(oracle, r))
}

pub(crate) fn rate_bound_unchecked(oracle: &CgfOracle, r: f64) -> f64 {
    if r == 0.0 || oracle.is_zero() {
        return 0.0;
    }
    let scale = oracle.scale();
    let objective = |mu: f64| {
        let lambda = mu / scale;
        (r + oracle.eval(lambda)) / lambda
    };
    let (_, value) =
        numeric::minimize_positive(objective, LAMBDA_START, LAMBDA_LOWER, LAMBDA_CAP, LAMBDA_REL_TOL);
    value.min(oracle.supremum()).max(0.0)
}

/// The CGF functional `sup_{λ ≠ 0} sqrt(2 Λ(λ)) / |λ|`.
///
/// For a Gaussian this is the standard deviation. For a discrete law it is
/// the optimal sub-Gaussian variance proxy, located by a log-spaced scan of
/// both half-lines followed by golden-section refinement; the `λ → 0` limit
/// (the variance) is always included.
pub fn cgf_norm(oracle: &CgfOracle) -> f64 {
    match &oracle.kind {
        OracleKind::Gaussian { variance } => variance.sqrt(),
        OracleKind::Discrete { .. } => {
            if oracle.is_zero() {
                return 0.0;
            }
            let scale = oracle.scale();
            let mut best = oracle.variance();
            let grid = numeric::log_grid(1e-4, 1e4, 161);
            for sign in [1.0, -1.0] {
                let neg_ratio = |mu: f64| {
                    let lambda = sign * mu / scale;
                    -2.0 * oracle.eval(lambda) / (lambda * lambda)
                };
                let (_, v) = numeric::grid_refine_min(neg_ratio, &grid, 1e-9);
                best = best.max(-v);
            }
            best.sqrt()
        }
    }
}

/// Outcome of [`check_t_properties`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TPropertyReport {
    /// `T_r(αf) = α T_r(f)` within relative `1e-8`.
    pub homogeneity: bool,
    /// `T_0(f) = 0`.
    pub zero_at_origin: bool,
    /// `T_{r+s}(f) ≤ T_r(f) + T_s(f) + 1e-8`.
    pub subadditivity: bool,
    /// `T_{(r+s)/2}(f) ≥ (T_r(f) + T_s(f))/2 - 1e-8`.
    pub midpoint_concavity: bool,
}

impl TPropertyReport {
    pub fn all(&self) -> bool {
        self.homogeneity && self.zero_at_origin && self.subadditivity && self.midpoint_concavity
    }
}

pub fn check_t_properties(oracle: &CgfOracle, r: f64, s: f64, alpha: f64) -> Result<TPropertyReport> {
    if !(r >= 0.0 && s >= 0.0 && r.is_finite() && s.is_finite()) {
        return Err(Error::input("rates r and s must be nonnegative"));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::input("alpha must be positive"));
    }
    let t_r = rate_bound_t(oracle, r)?;
    let t_s = rate_bound_t(oracle, s)?;
    let t_rs = rate_bound_t(oracle, r + s)?;
    let t_mid = rate_bound_t(oracle, 0.5 * (r + s))?;
    let t_alpha = rate_bound_t(&oracle.scaled(alpha), r)?;
    let t_0 = rate_bound_t(oracle, 0.0)?;
    let expected = alpha * t_r;
    Ok(TPropertyReport {
        homogeneity: (t_alpha - expected).abs() <= 1e-8 * expected.abs().max(f64::MIN_POSITIVE),
        zero_at_origin: t_0.abs() <= 1e-9,
        subadditivity: t_rs <= t_r + t_s + 1e-8,
        midpoint_concavity: t_mid >= 0.5 * (t_r + t_s) - 1e-8,
    })
}
