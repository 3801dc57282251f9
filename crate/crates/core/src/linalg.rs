//! Dense symmetric eigendecomposition by cyclic Jacobi rotations.

use crate::error::{Error, Result};

/// Largest supported dimension.
pub const MAX_DIM: usize = 2000;
const OFF_DIAGONAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 100;

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct SymmetricEigen {
    dim: usize,
    values: Vec<f64>,
    // row-major; column j is the eigenvector of values[j]
    vectors: Vec<f64>,
}

impl SymmetricEigen {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Component `i` of eigenvector `j`.
    pub fn vector_entry(&self, i: usize, j: usize) -> f64 {
        self.vectors[i * self.dim + j]
    }

    /// Eigenvector `j` as an owned vector.
    pub fn vector(&self, j: usize) -> Vec<f64> {
        (0..self.dim).map(|i| self.vector_entry(i, j)).collect()
    }

    /// Coordinates `Vᵀ u` of `u` in the eigenbasis.
    pub fn coordinates(&self, u: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for (i, ui) in u.iter().enumerate() {
            let row = &self.vectors[i * d..(i + 1) * d];
            for (o, v) in out.iter_mut().zip(row) {
                *o += ui * v;
            }
        }
        out
    }

    /// `V diag(c) Vᵀ u` for a spectral multiplier `c`.
    pub fn apply_spectral(&self, u: &[f64], multiplier: impl Fn(f64) -> f64) -> Vec<f64> {
        let d = self.dim;
        let coords: Vec<f64> = self
            .coordinates(u)
            .into_iter()
            .zip(&self.values)
            .map(|(c, &l)| c * multiplier(l))
            .collect();
        (0..d)
            .map(|i| {
                let row = &self.vectors[i * d..(i + 1) * d];
                row.iter().zip(&coords).map(|(v, c)| v * c).sum()
            })
            .collect()
    }

    /// `max_ij |(V Λ Vᵀ)_ij - a_ij|`.
    pub fn reconstruction_error(&self, a: &[Vec<f64>]) -> f64 {
        let d = self.dim;
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let s: f64 = (0..d).map(|m| self.vector_entry(i, m) * self.values[m] * self.vector_entry(j, m)).sum();
                worst = worst.max((s - a[i][j]).abs());
            }
        }
        worst
    }
}

/// Eigendecomposition of a symmetric matrix. Sweeps until the off-diagonal
/// Frobenius norm is at most `1e-13 ‖A‖_F`; the matrix is symmetrized first.
pub fn jacobi_eigen(a: &[Vec<f64>]) -> Result<SymmetricEigen> {
    let d = a.len();
    if d == 0 || d > MAX_DIM {
        return Err(Error::input(format!("matrix dimension {d} must be in 1..={MAX_DIM}")));
    }
    if a.iter().any(|row| row.len() != d) {
        return Err(Error::input("matrix must be square"));
    }
    let mut m = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            m[i * d + j] = 0.5 * (a[i][j] + a[j][i]);
        }
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::input("matrix entries must be finite"));
    }
    let mut v = vec![0.0; d * d];
    for i in 0..d {
        v[i * d + i] = 1.0;
    }
    let frobenius = m.iter().map(|x| x * x).sum::<f64>().sqrt();
    let target = OFF_DIAGONAL_TOL * frobenius;
    let off = |m: &[f64]| {
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                if i != j {
                    s += m[i * d + j] * m[i * d + j];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off(&m) <= target;
    let mut sweeps = 0;
    while !converged {
        if sweeps == MAX_SWEEPS {
            return Err(Error::numerical(format!("Jacobi iteration did not converge in {MAX_SWEEPS} sweeps")));
        }
        sweeps += 1;
        for p in 0..d {
            for q in p + 1..d {
                let apq = m[p * d + q];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[q * d + q] - m[p * d + p]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + theta.hypot(1.0));
                let c = 1.0 / t.hypot(1.0);
                let s = t * c;
                for k in 0..d {
                    let (mkp, mkq) = (m[k * d + p], m[k * d + q]);
                    m[k * d + p] = c * mkp - s * mkq;
                    m[k * d + q] = s * mkp + c * mkq;
                }
                for k in 0..d {
                    let (mpk, mqk) = (m[p * d + k], m[q * d + k]);
                    m[p * d + k] = c * mpk - s * mqk;
                    m[q * d + k] = s * mpk + c * mqk;
                }
                for k in 0..d {
                    let (vkp, vkq) = (v[k * d + p], v[k * d + q]);
                    v[k * d + p] = c * vkp - s * vkq;
                    v[k * d + q] = s * vkp + c * vkq;
                }
            }
        }
        converged = off(&m) <= target;
    }

    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| m[j * d + j].total_cmp(&m[i * d + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| m[i * d + i]).collect();
    let mut vectors = vec![0.0; d * d];
    for (new, &old) in order.iter().enumerate() {
        for k in 0..d {
            vectors[k * d + new] = v[k * d + old];
        }
    }
    Ok(SymmetricEigen { dim: d, values, vectors })
}
