//! Linear functionals of a centered Gaussian vector `X ~ N(0, Σ)`.
//!
//! For `f(x) = ⟨u, x⟩` the CGF is exactly quadratic, so `‖f‖ = (uᵀΣu)^{1/2}`
//! and `w_r = √(2r)`. Truncating `Σ` to its best rank-`k` approximation
//! `Σ_k` gives, with probability at least `1 - 2e^{-nr}`, simultaneously for
//! all `‖u‖₂ ≤ 1`:
//!
//! ```text
//! E_n f ≤ √(tr(Σ - Σ_k)/n) + √(2r ‖Σ - Σ_k‖_op) + √(k/n) (uᵀΣ_k u)^{1/2} + √(2r) (uᵀΣu)^{1/2}
//! ```

use serde::{Deserialize, Serialize};

use crate::cgf::CgfOracle;
use crate::chaining::FunctionClass;
use crate::error::{Error, Result};
use crate::linalg::{jacobi_eigen, SymmetricEigen};

const SYMMETRY_TOL: f64 = 1e-12;
const NEGATIVE_EIGEN_TOL: f64 = 1e-10;
const RECONSTRUCTION_TOL: f64 = 1e-8;
const UNIT_BALL_TOL: f64 = 1e-12;

/// Covariance as it appears in JSON: a dense matrix, or a polynomially
/// decaying diagonal spectrum `λ_j = j^{-exponent}`, `j = 1..=d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CovarianceSpec {
    Dense { covariance: Vec<Vec<f64>> },
    Spectrum { spectrum: SpectrumShape, exponent: f64, d: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpectrumShape {
    Poly,
}

impl CovarianceSpec {
    pub fn to_matrix(&self) -> Result<Vec<Vec<f64>>> {
        match self {
            CovarianceSpec::Dense { covariance } => Ok(covariance.clone()),
            CovarianceSpec::Spectrum { spectrum: SpectrumShape::Poly, exponent, d } => {
                if *d == 0 || !exponent.is_finite() {
                    return Err(Error::input("spectrum needs d >= 1 and a finite exponent"));
                }
                Ok((0..*d)
                    .map(|i| {
                        let mut row = vec![0.0; *d];
                        row[i] = ((i + 1) as f64).powf(-exponent);
                        row
                    })
                    .collect())
            }
        }
    }
}

/// `N(0, Σ)` with its eigendecomposition computed once.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    covariance: Vec<Vec<f64>>,
    eigen: SymmetricEigen,
    values: Vec<f64>,
}

impl GaussianModel {
    pub fn new(covariance: Vec<Vec<f64>>) -> Result<Self> {
        let d = covariance.len();
        if d == 0 || covariance.iter().any(|row| row.len() != d) {
            return Err(Error::input("covariance must be a nonempty square matrix"));
        }
        for i in 0..d {
            for j in 0..d {
                if !covariance[i][j].is_finite() {
                    return Err(Error::input("covariance entries must be finite"));
                }
                let gap = (covariance[i][j] - covariance[j][i]).abs();
                if gap > SYMMETRY_TOL {
                    return Err(Error::input(format!("covariance is not symmetric at ({i}, {j}): gap {gap:e}")));
                }
            }
        }
        let eigen = jacobi_eigen(&covariance)?;
        if let Some(&low) = eigen.values().last() {
            if low < -NEGATIVE_EIGEN_TOL {
                return Err(Error::input(format!("covariance is not positive semidefinite: eigenvalue {low:e}")));
            }
        }
        let err = eigen.reconstruction_error(&covariance);
        if err > RECONSTRUCTION_TOL {
            return Err(Error::numerical(format!("eigendecomposition reconstruction error {err:e}")));
        }
        let values = eigen.values().iter().map(|&l| l.max(0.0)).collect();
        Ok(Self { covariance, eigen, values })
    }

    pub fn from_spec(spec: &CovarianceSpec) -> Result<Self> {
        Self::new(spec.to_matrix()?)
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn covariance(&self) -> &[Vec<f64>] {
        &self.covariance
    }

    /// Eigenvalues in descending order, negatives within tolerance clamped to 0.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.values
    }

    pub fn eigen(&self) -> &SymmetricEigen {
        &self.eigen
    }

    fn check_dim(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.dim() {
            return Err(Error::input(format!("direction has dimension {}, model has {}", u.len(), self.dim())));
        }
        Ok(())
    }

    /// `uᵀ Σ_k u` from the top `k` eigenpairs; `k = d` gives `uᵀΣu`.
    pub fn truncated_quadratic_form(&self, u: &[f64], k: usize) -> f64 {
        self.eigen
            .coordinates(u)
            .iter()
            .zip(&self.values)
            .take(k)
            .map(|(c, l)| l * c * c)
            .sum()
    }

    pub fn quadratic_form(&self, u: &[f64]) -> f64 {
        self.truncated_quadratic_form(u, self.dim())
    }

    /// `tr(Σ - Σ_k)`, the sum of eigenvalues `k+1..d`.
    pub fn tail_trace(&self, k: usize) -> f64 {
        self.values.iter().skip(k).sum()
    }

    /// `‖Σ - Σ_k‖_op`, eigenvalue `k+1` (0 when `k = d`).
    pub fn tail_op(&self, k: usize) -> f64 {
        self.values.get(k).copied().unwrap_or(0.0)
    }

    /// `Σ^{1/2} u` with the symmetric square root.
    pub fn sqrt_apply(&self, u: &[f64]) -> Vec<f64> {
        self.eigen.apply_spectral(u, |l| l.max(0.0).sqrt())
    }
}

/// `x ↦ ⟨u, x⟩` with `‖u‖₂ ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct LinearFunctional {
    u: Vec<f64>,
}

impl TryFrom<Vec<f64>> for LinearFunctional {
    type Error = Error;

    fn try_from(u: Vec<f64>) -> Result<Self> {
        LinearFunctional::new(u)
    }
}

impl From<LinearFunctional> for Vec<f64> {
    fn from(f: LinearFunctional) -> Self {
        f.u
    }
}

impl LinearFunctional {
    pub fn new(u: Vec<f64>) -> Result<Self> {
        if u.iter().any(|x| !x.is_finite()) {
            return Err(Error::input("direction entries must be finite"));
        }
        let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1.0 + UNIT_BALL_TOL {
            return Err(Error::input(format!("direction norm {norm} exceeds 1")));
        }
        Ok(Self { u })
    }

    /// Standard basis vector `e_i` in dimension `d`.
    pub fn basis(d: usize, i: usize) -> Result<Self> {
        if i >= d {
            return Err(Error::input(format!("basis index {i} out of range for dimension {d}")));
        }
        let mut u = vec![0.0; d];
        u[i] = 1.0;
        Ok(Self { u })
    }

    pub fn direction(&self) -> &[f64] {
        &self.u
    }
}

/// `(uᵀΣu)^{1/2}`.
pub fn cgf_norm(model: &GaussianModel, f: &LinearFunctional) -> Result<f64> {
    model.check_dim(f.direction())?;
    Ok(model.quadratic_form(f.direction()).max(0.0).sqrt())
}

/// The four terms of the rank-`k` bound and their sum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBound {
    pub k: usize,
    pub n: u64,
    pub r: f64,
    pub tail_trace: f64,
    pub tail_op: f64,
    pub projected: f64,
    pub base: f64,
    pub total: f64,
    pub guarantee: f64,
}

fn check_rate(n: u64, r: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::input("sample size n must be positive"));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::input(format!("rate r = {r} must be positive")));
    }
    Ok(())
}

/// Evaluate the rank-`k` bound at `f`. With `loose_projected` the projected
/// term uses `(uᵀΣu)^{1/2}` instead of the truncated `(uᵀΣ_k u)^{1/2}`.
pub fn gaussian_instance_bound(
    model: &GaussianModel,
    f: &LinearFunctional,
    k: usize,
    n: u64,
    r: f64,
    loose_projected: bool,
) -> Result<GaussianBound> {
    model.check_dim(f.direction())?;
    check_rate(n, r)?;
    let d = model.dim();
    if k > d {
        return Err(Error::input(format!("rank k = {k} exceeds dimension {d}")));
    }
    let nf = n as f64;
    let u = f.direction();
    let full = model.quadratic_form(u).max(0.0);
    let truncated = if loose_projected { full } else { model.truncated_quadratic_form(u, k).max(0.0) };
    let tail_trace = (model.tail_trace(k).max(0.0) / nf).sqrt();
    let tail_op = (2.0 * r * model.tail_op(k)).sqrt();
    let projected = (k as f64 / nf).sqrt() * truncated.sqrt();
    let base = (2.0 * r).sqrt() * full.sqrt();
    Ok(GaussianBound {
        k,
        n,
        r,
        tail_trace,
        tail_op,
        projected,
        base,
        total: tail_trace + tail_op + projected + base,
        guarantee: 1.0 - 2.0 * (-nf * r).exp(),
    })
}

/// The worst case over the unit ball of the `k`-dependent terms.
pub fn rank_objective(model: &GaussianModel, k: usize, n: u64, r: f64) -> f64 {
    let nf = n as f64;
    (model.tail_trace(k).max(0.0) / nf).sqrt()
        + (2.0 * r * model.tail_op(k)).sqrt()
        + (k as f64 / nf).sqrt() * model.tail_op(0).sqrt()
}

/// `k ∈ {0, …, d}` minimizing [`rank_objective`]; ties go to the smaller `k`.
pub fn optimal_rank(model: &GaussianModel, n: u64, r: f64) -> Result<usize> {
    check_rate(n, r)?;
    let mut best = (0, rank_objective(model, 0, n, r));
    for k in 1..=model.dim() {
        let v = rank_objective(model, k, n, r);
        if v < best.1 {
            best = (k, v);
        }
    }
    Ok(best.0)
}

/// A finite set of linear functionals of `N(0, Σ)`, viewed as a function
/// class. Every nonzero difference is Gaussian, so after normalization its
/// CGF is that of a standard normal.
#[derive(Debug, Clone)]
pub struct GaussianLinearFamily<'a> {
    model: &'a GaussianModel,
    members: Vec<LinearFunctional>,
}

impl<'a> GaussianLinearFamily<'a> {
    pub fn new(model: &'a GaussianModel, members: Vec<LinearFunctional>) -> Result<Self> {
        for m in &members {
            model.check_dim(m.direction())?;
        }
        Ok(Self { model, members })
    }
}

impl FunctionClass for GaussianLinearFamily<'_> {
    fn normalized_differences(&self) -> Vec<CgfOracle> {
        let mut out = Vec::new();
        for (i, a) in self.members.iter().enumerate() {
            for (j, b) in self.members.iter().enumerate() {
                if i == j {
                    continue;
                }
                let h: Vec<f64> = a.direction().iter().zip(b.direction()).map(|(x, y)| x - y).collect();
                if self.model.quadratic_form(&h).max(0.0).sqrt() > crate::chaining::ZERO_NORM_TOL {
                    out.push(CgfOracle::gaussian(1.0).expect("unit variance is valid"));
                }
            }
        }
        out
    }
}
