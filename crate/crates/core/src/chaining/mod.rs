//! Deflated generic chaining for finite function classes.
//!
//! For a finite class `𝓕 ∋ 0` of centered functions and a deflation map
//! `A` with `‖A[f]‖ ≤ ‖f‖`, `|A[𝓕]| ≤ e^k`, `A[0] = 0`, with probability at
//! least `1 - 2e^{-nr}` every member satisfies
//!
//! ```text
//! E_n f ≤ w_{r+k/n} ‖f‖ + γ(𝒜) + 2 w_r Σ_ℓ ε_ℓ(𝒜),      𝒜 = {f - A[f] : f ∈ 𝓕}
//! γ(𝒜)   = inf_{(𝒜_ℓ)} sup_{a∈𝒜} Σ_ℓ 2 w_{(2^{ℓ+3}+ℓ+2) log 2 / n} ‖a - 𝒜_ℓ‖
//! ε_ℓ(𝒜) = inf_{|𝒬| ≤ 2^{2^ℓ}} sup_{a∈𝒜} ‖a - 𝒬‖
//! w_r    = sup_{h ∈ 𝓕-𝓕} T_r(h/‖h‖)
//! ```

mod bound;
mod cover;
mod deflation;
mod family;

use std::collections::BTreeMap;
use std::sync::Mutex;

use rayon::prelude::*;

use crate::cgf::{rate_bound_unchecked, CgfOracle};
use crate::error::{Error, Result};

pub use bound::{optimize_deflation, theorem_main_bound, CandidateScore, ChainBoundReport, MemberThreshold, OptimizedDeflation};
pub use cover::{
    epsilon_ell, gamma_exhaustive, gamma_functional, gamma_greedy, gamma_level_cap, gamma_rate, level_cap,
    CoverCertificate, GammaCertificate, GammaMethod, EXHAUSTIVE_EPSILON_MAX, EXHAUSTIVE_GAMMA_MAX,
};
pub use deflation::{build_deflation, build_deflation_with_budget, DeflatedSet, DeflationPlan};
pub use family::{FunctionFamily, NormContext};

/// Differences with norm at or below this are treated as zero.
pub const ZERO_NORM_TOL: f64 = 1e-12;

/// A class whose nonzero differences `h = f - g` can be listed, each
/// normalized to `h/‖h‖`, as CGF oracles.
pub trait FunctionClass {
    fn normalized_differences(&self) -> Vec<CgfOracle>;
}

/// `w_r = max_h T_r(h/‖h‖)` over the nonzero ordered differences; `0` when
/// there are none.
pub fn class_wr<C: FunctionClass + ?Sized>(class: &C, r: f64) -> Result<f64> {
    ClassCoefficients::new(class.normalized_differences()).wr(r)
}

/// The normalized differences of a class, kept so that `w_r` can be
/// evaluated at many rates. Values are memoized per rate.
#[derive(Debug)]
pub struct ClassCoefficients {
    oracles: Vec<CgfOracle>,
    memo: Mutex<BTreeMap<u64, f64>>,
}

impl Clone for ClassCoefficients {
    fn clone(&self) -> Self {
        Self::new(self.oracles.clone())
    }
}

impl ClassCoefficients {
    pub fn new(oracles: Vec<CgfOracle>) -> Self {
        Self { oracles, memo: Mutex::new(BTreeMap::new()) }
    }

    pub fn of<C: FunctionClass + ?Sized>(class: &C) -> Self {
        Self::new(class.normalized_differences())
    }

    pub fn difference_count(&self) -> usize {
        self.oracles.len()
    }

    pub fn wr(&self, r: f64) -> Result<f64> {
        if !(r.is_finite() && r >= 0.0) {
            return Err(Error::input(format!("rate r = {r} must be a nonnegative real")));
        }
        if let Some(&v) = self.memo.lock().expect("memo lock").get(&r.to_bits()) {
            return Ok(v);
        }
        let v = self
            .oracles
            .par_iter()
            .map(|o| rate_bound_unchecked(o, r))
            .reduce(|| 0.0, f64::max);
        self.memo.lock().expect("memo lock").insert(r.to_bits(), v);
        Ok(v)
    }
}
