use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ClassCoefficients, FunctionClass, ZERO_NORM_TOL};
use crate::cgf::{cgf_norm, CgfOracle, DiscreteDistribution, TabulatedFunction, CENTERING_TOLERANCE};
use crate::error::{Error, Result};
use crate::orlicz::{orlicz_norm, OrliczGenerator};

/// Which norm measures differences: the CGF functional
/// `sup_λ √(2Λ(λ))/|λ|`, or an Orlicz norm. In JSON: `"cgf"` or
/// `{"orlicz": {"kind": "sub-gaussian"}}`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormContext {
    #[default]
    Cgf,
    Orlicz(OrliczGenerator),
}

/// A finite class of centered functions on a discrete law, containing the
/// zero function, with all pairwise distances precomputed.
#[derive(Debug)]
pub struct FunctionFamily {
    dist: DiscreteDistribution,
    names: Vec<String>,
    members: Vec<TabulatedFunction>,
    zero: usize,
    norm: NormContext,
    distances: Vec<Vec<f64>>,
    coefficients: OnceLock<ClassCoefficients>,
}

impl FunctionFamily {
    /// Validates the members and computes the distance matrix. If no member
    /// is identically zero, a member named `"0"` is prepended.
    pub fn new(
        dist: DiscreteDistribution,
        members: Vec<(String, TabulatedFunction)>,
        norm: NormContext,
    ) -> Result<Self> {
        let mut names = Vec::with_capacity(members.len() + 1);
        let mut funcs = Vec::with_capacity(members.len() + 1);
        for (name, f) in members {
            f.check_support(&dist)?;
            let mean = f.mean(&dist);
            if mean.abs() > CENTERING_TOLERANCE {
                return Err(Error::input(format!("member `{name}` is not centered: E f(X) = {mean:e}")));
            }
            if names.contains(&name) {
                return Err(Error::input(format!("duplicate member name `{name}`")));
            }
            names.push(name);
            funcs.push(f);
        }
        let zero = match funcs.iter().position(TabulatedFunction::is_zero) {
            Some(i) => i,
            None => {
                if names.iter().any(|n| n == "0") {
                    return Err(Error::input("member `0` must be the zero function"));
                }
                names.insert(0, "0".to_string());
                funcs.insert(0, TabulatedFunction::zero(dist.len()));
                0
            }
        };
        let mut family = Self {
            dist,
            names,
            members: funcs,
            zero,
            norm,
            distances: Vec::new(),
            coefficients: OnceLock::new(),
        };
        family.distances = family.distance_matrix(&family.members)?;
        Ok(family)
    }

    pub fn distribution(&self) -> &DiscreteDistribution {
        &self.dist
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn members(&self) -> &[TabulatedFunction] {
        &self.members
    }

    pub fn member(&self, i: usize) -> &TabulatedFunction {
        &self.members[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn zero_index(&self) -> usize {
        self.zero
    }

    pub fn norm_context(&self) -> &NormContext {
        &self.norm
    }

    /// `‖f_i - f_j‖`.
    pub fn distance(&self, i: usize, j: usize) -> f64 {
        self.distances[i][j]
    }

    pub fn distances(&self) -> &[Vec<f64>] {
        &self.distances
    }

    /// `‖f_i‖`.
    pub fn member_norm(&self, i: usize) -> f64 {
        self.distances[i][self.zero]
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.len()).map(|i| self.member_norm(i)).fold(0.0, f64::max)
    }

    /// The norm of an arbitrary function on the support.
    pub fn norm(&self, h: &TabulatedFunction) -> Result<f64> {
        h.check_support(&self.dist)?;
        match &self.norm {
            NormContext::Cgf => Ok(cgf_norm(&CgfOracle::from_values(self.dist.probabilities(), h.values()))),
            NormContext::Orlicz(g) => orlicz_norm(&self.dist, h, g),
        }
    }

    /// Symmetric matrix of `‖a_i - a_j‖` over `funcs`.
    pub fn distance_matrix(&self, funcs: &[TabulatedFunction]) -> Result<Vec<Vec<f64>>> {
        let m = funcs.len();
        let pairs: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
        let values = pairs
            .par_iter()
            .map(|&(i, j)| self.norm(&funcs[i].sub(&funcs[j])))
            .collect::<Result<Vec<f64>>>()?;
        let mut d = vec![vec![0.0; m]; m];
        for (&(i, j), v) in pairs.iter().zip(values) {
            d[i][j] = v;
            d[j][i] = v;
        }
        Ok(d)
    }

    /// `w_r` for this family, with the normalized differences built once.
    pub fn coefficients(&self) -> &ClassCoefficients {
        self.coefficients.get_or_init(|| ClassCoefficients::of(self))
    }

    pub fn class_wr(&self, r: f64) -> Result<f64> {
        self.coefficients().wr(r)
    }
}

impl FunctionClass for FunctionFamily {
    fn normalized_differences(&self) -> Vec<CgfOracle> {
        let m = self.len();
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let norm = self.distances[i][j];
                if i == j || norm <= ZERO_NORM_TOL {
                    continue;
                }
                let h = self.members[i].sub(&self.members[j]).scale(1.0 / norm);
                out.push(CgfOracle::from_values(self.dist.probabilities(), h.values()));
            }
        }
        out
    }
}
