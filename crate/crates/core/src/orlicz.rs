//! Orlicz norms of exponential type and the bounds they give on the class
//! coefficient `w_r`.
//!
//! A generator is `ψ(t) = e^{φ(t)} - 1` with `φ` convex, increasing and
//! `φ(0) = 0`. Two bounds on `w_r` are provided:
//!
//! ```text
//! quadrature:   w_r ≤ inf_{λ≥0} (r + log(1 + ∫_0^∞ 2λ(e^{λt} - 1)/(ψ(t) + 1) dt)) / λ
//! closed form:  w_r ≤ max{3, 3/√(2M)} φ⁻¹(2r/3)
//! ```
//!
//! where the conversion factor `M` satisfies
//! `inf_{λ≥0} (e^{φ*(λ)} - 1)/λ² ≥ M ∫_0^∞ t e^{-φ(t)/2} dt`.

use serde::{Deserialize, Serialize};

use crate::cgf::{DiscreteDistribution, TabulatedFunction};
use crate::error::{Error, Result};
use crate::numeric;

/// Integrand truncation: the tail beyond the cutoff is below `e^{-45}` of
/// the peak.
const TAIL_LOG_DROP: f64 = 45.0;
const QUAD_REL_TOL: f64 = 1e-9;
const T_CAP: f64 = 1e15;
const NORM_REL_WIDTH: f64 = 1e-10;

/// Generator families, as they appear in JSON: `{"kind": "bernstein", "L": 1.0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorKind {
    /// `φ(t) = t²`.
    SubGaussian,
    /// `φ(t) = t`.
    SubExponential,
    /// `φ(t) = (√(1 + 2Lt) - 1)² / L²`.
    Bernstein {
        #[serde(rename = "L")]
        l: f64,
    },
    /// `φ(t) = 2((1 + Lt) log(1 + Lt) - Lt) / L²`.
    Bennett {
        #[serde(rename = "L")]
        l: f64,
    },
    /// `ψ(t) = t^p`; not of exponential type.
    Power { p: f64 },
    /// `φ` tabulated at positive increasing abscissae `t`, linearly
    /// interpolated from `(0, 0)` and extrapolated with the last slope.
    Custom { t: Vec<f64>, phi: Vec<f64> },
}

/// A validated Orlicz generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeneratorKind", into = "GeneratorKind")]
pub struct OrliczGenerator {
    kind: GeneratorKind,
}

impl TryFrom<GeneratorKind> for OrliczGenerator {
    type Error = Error;

    fn try_from(kind: GeneratorKind) -> Result<Self> {
        OrliczGenerator::new(kind)
    }
}

impl From<OrliczGenerator> for GeneratorKind {
    fn from(g: OrliczGenerator) -> Self {
        g.kind
    }
}

impl OrliczGenerator {
    pub fn new(kind: GeneratorKind) -> Result<Self> {
        match &kind {
            GeneratorKind::Bernstein { l } | GeneratorKind::Bennett { l } => {
                if !(l.is_finite() && *l > 0.0) {
                    return Err(Error::input(format!("generator parameter L = {l} must be positive")));
                }
            }
            GeneratorKind::Power { p } => {
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::input(format!("power generator needs p >= 1, got {p}")));
                }
            }
            GeneratorKind::Custom { t, phi } => validate_table(t, phi)?,
            GeneratorKind::SubGaussian | GeneratorKind::SubExponential => {}
        }
        Ok(Self { kind })
    }

    pub fn sub_gaussian() -> Self {
        Self { kind: GeneratorKind::SubGaussian }
    }

    pub fn sub_exponential() -> Self {
        Self { kind: GeneratorKind::SubExponential }
    }

    pub fn bernstein(l: f64) -> Result<Self> {
        Self::new(GeneratorKind::Bernstein { l })
    }

    pub fn bennett(l: f64) -> Result<Self> {
        Self::new(GeneratorKind::Bennett { l })
    }

    pub fn kind(&self) -> &GeneratorKind {
        &self.kind
    }

    pub fn label(&self) -> String {
        match &self.kind {
            GeneratorKind::SubGaussian => "sub-gaussian".into(),
            GeneratorKind::SubExponential => "sub-exponential".into(),
            GeneratorKind::Bernstein { l } => format!("bernstein(L={l})"),
            GeneratorKind::Bennett { l } => format!("bennett(L={l})"),
            GeneratorKind::Power { p } => format!("power(p={p})"),
            GeneratorKind::Custom { .. } => "custom".into(),
        }
    }

    /// Whether `φ = log(1 + ψ)` is convex, so the `w_r` bounds apply.
    pub fn is_exponential_type(&self) -> bool {
        !matches!(self.kind, GeneratorKind::Power { .. })
    }

    /// `φ(t) = log(1 + ψ(t))` for `t ≥ 0`.
    pub fn phi(&self, t: f64) -> f64 {
        match &self.kind {
            GeneratorKind::SubGaussian => t * t,
            GeneratorKind::SubExponential => t,
            GeneratorKind::Bernstein { l } => {
                // (√(1+2Lt) - 1)/L = 2t/(√(1+2Lt) + 1)
                let s = 2.0 * t / ((1.0 + 2.0 * l * t).sqrt() + 1.0);
                s * s
            }
            GeneratorKind::Bennett { l } => 2.0 * one_plus_x_log_minus_x(l * t) / (l * l),
            GeneratorKind::Power { p } => t.powf(*p).ln_1p(),
            GeneratorKind::Custom { t: ts, phi } => table_phi(ts, phi, t),
        }
    }

    /// `ψ(t)`.
    pub fn psi(&self, t: f64) -> f64 {
        match &self.kind {
            GeneratorKind::Power { p } => t.powf(*p),
            _ => self.phi(t).exp_m1(),
        }
    }

    /// `φ⁻¹(y)` for `y ≥ 0`.
    pub fn phi_inverse(&self, y: f64) -> f64 {
        if y <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            GeneratorKind::SubGaussian => y.sqrt(),
            GeneratorKind::SubExponential => y,
            GeneratorKind::Bernstein { l } => y.sqrt() + 0.5 * l * y,
            GeneratorKind::Bennett { .. } => invert_increasing(|t| self.phi(t), y),
            GeneratorKind::Power { p } => y.exp_m1().powf(1.0 / p),
            GeneratorKind::Custom { t, phi } => table_phi_inverse(t, phi, y),
        }
    }

    /// `ψ⁻¹(y)` for `y ≥ 0`.
    pub fn psi_inverse(&self, y: f64) -> f64 {
        match &self.kind {
            GeneratorKind::Power { p } => y.max(0.0).powf(1.0 / p),
            _ => self.phi_inverse(y.ln_1p()),
        }
    }

    /// Convex conjugate `φ*(λ) = sup_{t≥0} λt - φ(t)`; `+∞` outside the
    /// domain.
    pub fn phi_conjugate(&self, lambda: f64) -> f64 {
        if lambda <= 0.0 {
            return 0.0;
        }
        match &self.kind {
            GeneratorKind::SubGaussian => 0.25 * lambda * lambda,
            GeneratorKind::SubExponential => {
                if lambda <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            GeneratorKind::Bernstein { l } => bernstein_phi_star(lambda, *l),
            GeneratorKind::Bennett { l } => {
                // maximizer solves 1 + Lt = e^{λL/2}
                let a = 0.5 * lambda * l;
                2.0 * numeric::exp_m1_minus_x(a) / (l * l)
            }
            GeneratorKind::Power { .. } => f64::INFINITY,
            GeneratorKind::Custom { .. } => numerical_conjugate(|t| self.phi(t), lambda),
        }
    }

    /// Supremum of `{λ : φ*(λ) < ∞}` (the endpoint itself may be excluded).
    pub fn conjugate_domain(&self) -> f64 {
        match &self.kind {
            GeneratorKind::SubGaussian | GeneratorKind::Bennett { .. } => f64::INFINITY,
            GeneratorKind::SubExponential => 1.0,
            GeneratorKind::Bernstein { l } => 2.0 / l,
            GeneratorKind::Power { .. } => 0.0,
            GeneratorKind::Custom { t, phi } => {
                let n = t.len();
                if n == 1 {
                    phi[0] / t[0]
                } else {
                    (phi[n - 1] - phi[n - 2]) / (t[n - 1] - t[n - 2])
                }
            }
        }
    }

    fn require_exponential_type(&self) -> Result<()> {
        if self.is_exponential_type() {
            Ok(())
        } else {
            Err(Error::UnsupportedGenerator(format!(
                "{} is not of exponential type; the moment integral diverges for every λ > 0",
                self.label()
            )))
        }
    }
}

fn validate_table(t: &[f64], phi: &[f64]) -> Result<()> {
    if t.is_empty() || t.len() != phi.len() {
        return Err(Error::input("custom generator needs equally long, nonempty `t` and `phi`"));
    }
    if t.iter().chain(phi).any(|v| !v.is_finite()) {
        return Err(Error::input("custom generator table must be finite"));
    }
    if t[0] <= 0.0 || phi[0] <= 0.0 {
        return Err(Error::input("custom generator abscissae and values must start above 0"));
    }
    let mut prev = (0.0, 0.0, 0.0);
    for (&ti, &pi) in t.iter().zip(phi) {
        if ti <= prev.0 || pi <= prev.1 {
            return Err(Error::input("custom generator table must be strictly increasing"));
        }
        let slope = (pi - prev.1) / (ti - prev.0);
        if slope < prev.2 * (1.0 - 1e-12) {
            return Err(Error::input("custom generator φ must be convex (nondecreasing slopes)"));
        }
        prev = (ti, pi, slope);
    }
    Ok(())
}

fn table_phi(ts: &[f64], phi: &[f64], t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let i = ts.partition_point(|&x| x < t);
    let (t0, p0, t1, p1) = if i == 0 {
        (0.0, 0.0, ts[0], phi[0])
    } else if i < ts.len() {
        (ts[i - 1], phi[i - 1], ts[i], phi[i])
    } else if ts.len() == 1 {
        (0.0, 0.0, ts[0], phi[0])
    } else {
        let n = ts.len();
        (ts[n - 2], phi[n - 2], ts[n - 1], phi[n - 1])
    };
    p0 + (p1 - p0) * (t - t0) / (t1 - t0)
}

fn table_phi_inverse(ts: &[f64], phi: &[f64], y: f64) -> f64 {
    let i = phi.partition_point(|&p| p < y);
    let (t0, p0, t1, p1) = if i == 0 {
        (0.0, 0.0, ts[0], phi[0])
    } else if i < ts.len() {
        (ts[i - 1], phi[i - 1], ts[i], phi[i])
    } else if ts.len() == 1 {
        (0.0, 0.0, ts[0], phi[0])
    } else {
        let n = ts.len();
        (ts[n - 2], phi[n - 2], ts[n - 1], phi[n - 1])
    };
    t0 + (t1 - t0) * (y - p0) / (p1 - p0)
}

/// `(1 + x) log(1 + x) - x`, accurate near `x = 0`.
fn one_plus_x_log_minus_x(x: f64) -> f64 {
    if x.abs() < 0.1 {
        // Σ_{k≥2} (-1)^k x^k / (k(k-1))
        let mut sum = 0.0;
        let mut power = x * x;
        for k in 2..40 {
            let k = k as f64;
            sum += power / (k * (k - 1.0));
            power *= -x;
        }
        sum
    } else {
        (1.0 + x) * x.ln_1p() - x
    }
}

/// Solve `f(t) = y` for an increasing `f` with `f(0) = 0`.
fn invert_increasing<F: Fn(f64) -> f64>(f: F, y: f64) -> f64 {
    let mut hi = 1.0;
    while f(hi) < y && hi < T_CAP {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form conjugate of the Bernstein generator:
/// `0` for `λ < 0`, `λ²/(4(1 - Lλ/2))` on `[0, 2/L)`, and `+∞` from `2/L` on.
pub fn bernstein_phi_star(lambda: f64, l: f64) -> f64 {
    assert!(l > 0.0, "Bernstein parameter L must be positive");
    if lambda < 0.0 {
        0.0
    } else if lambda < 2.0 / l {
        lambda * lambda / (4.0 * (1.0 - 0.5 * l * lambda))
    } else {
        f64::INFINITY
    }
}

/// `sup_{t≥0} λt - φ(t)` for a convex increasing `φ` with `φ(0) = 0`, by
/// doubling to bracket the maximizer and golden-section refinement. Returns
/// `+∞` when the objective keeps growing past `t = 1e15`.
pub fn numerical_conjugate<F: Fn(f64) -> f64>(phi: F, lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 0.0;
    }
    let g = |t: f64| lambda * t - phi(t);
    let mut lo = 0.0;
    let mut t = 1.0;
    let mut g_t = g(t);
    if g_t <= 0.0 {
        // maximizer is below 1
        let (_, v) = numeric::golden_section_min(|s| -g(s), 0.0, 1.0, 1e-15);
        return (-v).max(0.0);
    }
    loop {
        let next = 2.0 * t;
        if next > T_CAP {
            return f64::INFINITY;
        }
        let g_next = g(next);
        if g_next <= g_t {
            let hi = next;
            let (_, v) = numeric::golden_section_min(|s| -g(s), lo, hi, 1e-14 * hi);
            return (-v).max(g_t);
        }
        lo = t;
        t = next;
        g_t = g_next;
    }
}

/// `‖Y‖_ψ = inf{u > 0 : E ψ(|Y|/u) ≤ 1}` for `Y = f(X)`, by bisection on
/// `u` to relative width `1e-10`. The returned `u` is always feasible.
pub fn orlicz_norm(dist: &DiscreteDistribution, f: &TabulatedFunction, gen: &OrliczGenerator) -> Result<f64> {
    f.check_support(dist)?;
    let atoms: Vec<(f64, f64)> = dist
        .probabilities()
        .iter()
        .zip(f.values())
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, v)| (*p, v.abs()))
        .collect();
    let max = atoms.iter().fold(0.0f64, |m, a| m.max(a.1));
    if max == 0.0 {
        return Ok(0.0);
    }
    let mass_at_max: f64 = atoms.iter().filter(|a| a.1 == max).map(|a| a.0).sum();
    let moment = |u: f64| atoms.iter().map(|(p, v)| p * gen.psi(v / u)).sum::<f64>();

    // every term is at most ψ(ψ⁻¹(1)) = 1 here
    let mut hi = max / gen.psi_inverse(1.0);
    while moment(hi) > 1.0 {
        hi *= 1.0 + 1e-12;
    }
    // the atoms at the maximum alone push the moment to 2 here
    let mut lo = max / gen.psi_inverse(2.0 / mass_at_max);
    while moment(lo) <= 1.0 {
        lo *= 0.5;
    }
    while hi / lo - 1.0 > NORM_REL_WIDTH {
        let mid = (lo * hi).sqrt();
        if moment(mid) <= 1.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// Locate `t_max` beyond the peak of a concave log-integrand such that the
/// integrand has dropped by `e^{-45}` relative to the largest value seen.
fn tail_cutoff<F: Fn(f64) -> f64>(log_integrand: F, peak: f64) -> Result<f64> {
    let mut t = 1.0;
    let mut prev = log_integrand(t);
    loop {
        let next = 2.0 * t;
        if next > T_CAP {
            return Err(Error::UnsupportedGenerator(
                "integrand does not decay; the integral diverges".into(),
            ));
        }
        let cur = log_integrand(next);
        if cur < prev && cur <= peak - TAIL_LOG_DROP {
            return Ok(next);
        }
        prev = cur;
        t = next;
    }
}

/// `log(1 + ∫_0^∞ 2λ(e^{λt} - 1) e^{-φ(t)} dt)`, computed with the integrand
/// scaled by its peak `e^{φ*(λ)}` so large `λ` cannot overflow.
pub fn log_moment_bound(gen: &OrliczGenerator, lambda: f64) -> Result<f64> {
    gen.require_exponential_type()?;
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    let peak = gen.phi_conjugate(lambda).max(0.0);
    if !peak.is_finite() {
        return Err(Error::UnsupportedGenerator(format!(
            "φ*({lambda}) is infinite for {}; the moment integral diverges",
            gen.label()
        )));
    }
    let t_max = tail_cutoff(|t| lambda * t - gen.phi(t), peak)?;
    let integrand = |t: f64| {
        let phi = gen.phi(t);
        let lt = lambda * t;
        let v = if lt < 1.0 {
            (-phi - peak).exp() * lt.exp_m1()
        } else {
            (lt - phi - peak).exp() - (-phi - peak).exp()
        };
        2.0 * lambda * v
    };
    let (mode, _) = numeric::golden_section_min(|t| gen.phi(t) - lambda * t, 0.0, t_max, 1e-13 * t_max);
    let scaled = numeric::integrate_focused(&integrand, t_max, &[mode], QUAD_REL_TOL)?;
    if scaled <= 0.0 {
        return Ok(0.0);
    }
    let log_i = peak + scaled.ln();
    Ok(if log_i < 30.0 { log_i.exp().ln_1p() } else { log_i + (-log_i).exp().ln_1p() })
}

fn lambda_grid(gen: &OrliczGenerator, lower: f64, infinite_upper: f64) -> Vec<f64> {
    let sup = gen.conjugate_domain();
    if sup.is_finite() {
        let mut grid = numeric::log_grid(lower, sup * 0.9, 120);
        grid.extend((2..=6).map(|j| sup * (1.0 - 10f64.powi(-j))));
        grid
    } else {
        numeric::log_grid(lower, infinite_upper, 160)
    }
}

/// The quadrature bound on `w_r`: the infimum over `λ` of
/// `(r + log(1 + ∫ 2λ(e^{λt} - 1)/(ψ(t) + 1) dt)) / λ`.
pub fn wr_quadrature_bound(gen: &OrliczGenerator, r: f64) -> Result<f64> {
    gen.require_exponential_type()?;
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::input(format!("rate r = {r} must be a nonnegative real")));
    }
    if r == 0.0 {
        return Ok(0.0);
    }
    let objective = |lambda: f64| match log_moment_bound(gen, lambda) {
        Ok(v) => (r + v) / lambda,
        Err(_) => f64::INFINITY,
    };
    let grid = lambda_grid(gen, 1e-7, 1e4);
    let (_, value) = numeric::grid_refine_min(objective, &grid, 1e-8);
    if !value.is_finite() {
        return Err(Error::numerical(format!("no finite quadrature bound for {}", gen.label())));
    }
    Ok(value)
}

/// `∫_0^∞ t e^{-φ(t)/2} dt`.
pub fn conversion_integral(gen: &OrliczGenerator) -> Result<f64> {
    gen.require_exponential_type()?;
    let log_integrand = |t: f64| t.ln() - 0.5 * gen.phi(t);
    // the peak of t e^{-φ/2} is at most where φ'(t) t = 2; scan for it
    let peak = numeric::log_grid(1e-6, 1e12, 400)
        .into_iter()
        .map(log_integrand)
        .fold(f64::NEG_INFINITY, f64::max);
    let t_max = tail_cutoff(log_integrand, peak)?;
    let (mode, _) = numeric::golden_section_min(|t| -log_integrand(t.max(1e-300)), 0.0, t_max, 1e-13 * t_max);
    numeric::integrate_focused(&|t: f64| t * (-0.5 * gen.phi(t)).exp(), t_max, &[mode], 1e-11)
}

/// Largest `M` with `inf_{λ>0} (e^{φ*(λ)} - 1)/λ² ≥ M ∫_0^∞ t e^{-φ(t)/2} dt`.
///
/// Returns `0` when the infimum vanishes (e.g. sub-exponential), in which
/// case the closed-form bound is unavailable.
pub fn conversion_factor_m(gen: &OrliczGenerator) -> Result<f64> {
    let integral = conversion_integral(gen)?;
    let ratio = |lambda: f64| gen.phi_conjugate(lambda).exp_m1() / (lambda * lambda);
    // the infimum is often the λ → 0 limit, so the grid starts far below 1
    let grid = lambda_grid(gen, 1e-12, 1e3);
    let (_, inf) = numeric::grid_refine_min(ratio, &grid, 1e-10);
    Ok(inf.max(0.0) / integral)
}

/// `max{3, 3/√(2M)} φ⁻¹(2r/3)`.
pub fn wr_exponential_type(gen: &OrliczGenerator, m: f64, r: f64) -> Result<f64> {
    gen.require_exponential_type()?;
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::input(format!("conversion factor M = {m} must be positive")));
    }
    if !(r.is_finite() && r >= 0.0) {
        return Err(Error::input(format!("rate r = {r} must be a nonnegative real")));
    }
    let factor = 3.0f64.max(3.0 / (2.0 * m).sqrt());
    Ok(factor * gen.phi_inverse(2.0 * r / 3.0))
}

/// Closed-form Bernstein conversion factor `1/(√(2π)L + 4)` as printed in
/// the literature. It does not satisfy the conversion inequality; see
/// [`conversion_factor_m`] for the certified value.
pub fn bernstein_published_m(l: f64) -> f64 {
    1.0 / ((2.0 * std::f64::consts::PI).sqrt() * l + 4.0)
}

/// Outcome of [`check_generator`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeneratorCheck {
    pub phi_zero_at_origin: bool,
    pub phi_convex_increasing: bool,
    pub inverse_round_trip: bool,
    pub psi_convex_increasing: bool,
}

impl GeneratorCheck {
    pub fn all(&self) -> bool {
        self.phi_zero_at_origin && self.phi_convex_increasing && self.inverse_round_trip && self.psi_convex_increasing
    }
}

/// Midpoint convexity and monotonicity of `φ` and `ψ` on a log-spaced grid,
/// plus `φ⁻¹(φ(t)) = t`.
pub fn check_generator(gen: &OrliczGenerator) -> GeneratorCheck {
    let grid = numeric::log_grid(1e-3, 1e2, 200);
    let convex_increasing = |h: &dyn Fn(f64) -> f64| {
        grid.windows(2).all(|w| {
            let (a, b) = (w[0], w[1]);
            let (ha, hb, hm) = (h(a), h(b), h(0.5 * (a + b)));
            if !hb.is_finite() {
                return true;
            }
            let tol = 1e-9 * ha.abs().max(hb.abs()).max(1.0);
            hb >= ha - tol && hm <= 0.5 * (ha + hb) + tol
        })
    };
    GeneratorCheck {
        phi_zero_at_origin: gen.phi(0.0) == 0.0,
        phi_convex_increasing: convex_increasing(&|t| gen.phi(t)),
        inverse_round_trip: grid
            .iter()
            .all(|&t| (gen.phi_inverse(gen.phi(t)) - t).abs() <= 1e-8 * t),
        psi_convex_increasing: gen.psi(0.0) == 0.0 && convex_increasing(&|t| gen.psi(t)),
    }
}
