use serde::{Deserialize, Serialize};

use super::cover::epsilon_depth;
use super::{
    build_deflation, epsilon_ell, gamma_functional, CoverCertificate, DeflatedSet, DeflationPlan, FunctionFamily,
    GammaCertificate,
};
use crate::error::{Error, Result};

/// Threshold `w_{r+k/n} ‖f‖ + RHS` for one member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemberThreshold {
    pub name: String,
    pub norm: f64,
    pub deflated_to: String,
    pub threshold: f64,
}

/// The deflated chaining bound with everything needed to replay it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainBoundReport {
    pub n: u64,
    pub r: f64,
    pub k: u32,
    /// `1 - 2e^{-nr}`.
    pub guarantee: f64,
    pub w_r: f64,
    /// `w_{r+k/n}`.
    pub w_inflated: f64,
    pub gamma: f64,
    pub epsilon_sum: f64,
    /// `γ(𝒜) + 2 w_r Σ_ℓ ε_ℓ(𝒜)`.
    pub total_rhs: f64,
    pub members: Vec<MemberThreshold>,
    pub plan: DeflationPlan,
    pub deflated: DeflatedSet,
    pub gamma_certificate: GammaCertificate,
    pub epsilon_certificates: Vec<CoverCertificate>,
}

impl ChainBoundReport {
    /// `(γ, Σ ε_ℓ, RHS)` recomputed from the certificates and the stored
    /// distance matrix alone.
    pub fn replay(&self) -> (f64, f64, f64) {
        let d = &self.deflated.distances;
        let gamma = self.gamma_certificate.replay(d);
        let epsilon_sum: f64 = self.epsilon_certificates.iter().map(|c| c.replay(d)).sum();
        (gamma, epsilon_sum, gamma + 2.0 * self.w_r * epsilon_sum)
    }

    pub fn thresholds(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.threshold).collect()
    }
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

/// Assemble `γ(𝒜) + 2 w_r Σ_ℓ ε_ℓ(𝒜)` and the per-member thresholds for a
/// deflation plan.
pub fn theorem_main_bound(family: &FunctionFamily, plan: &DeflationPlan, n: u64, r: f64) -> Result<ChainBoundReport> {
    check_rate(n, r)?;
    let deflated = plan.deflated(family)?;
    let w_r = family.class_wr(r)?;
    let w_inflated = family.class_wr(r + plan.k as f64 / n as f64)?;
    let gamma_certificate = gamma_functional(&deflated, family, n)?;
    let epsilon_certificates: Vec<CoverCertificate> =
        (0..epsilon_depth(deflated.len())).map(|l| epsilon_ell(&deflated, l)).collect();
    let gamma = gamma_certificate.value;
    let epsilon_sum: f64 = epsilon_certificates.iter().map(|c| c.value).sum();
    let total_rhs = gamma + 2.0 * w_r * epsilon_sum;
    let members = (0..family.len())
        .map(|i| {
            let norm = family.member_norm(i);
            MemberThreshold {
                name: family.names()[i].clone(),
                norm,
                deflated_to: family.names()[plan.assignment[i]].clone(),
                threshold: w_inflated * norm + total_rhs,
            }
        })
        .collect();
    Ok(ChainBoundReport {
        n,
        r,
        k: plan.k,
        guarantee: 1.0 - 2.0 * (-(n as f64) * r).exp(),
        w_r,
        w_inflated,
        gamma,
        epsilon_sum,
        total_rhs,
        members,
        plan: plan.clone(),
        deflated,
        gamma_certificate,
        epsilon_certificates,
    })
}

/// Score of one candidate `k`: `RHS + (w_{r+k/n} - w_r) max_f ‖f‖`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub k: u32,
    pub total_rhs: f64,
    pub inflation: f64,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizedDeflation {
    pub best: ChainBoundReport,
    pub candidates: Vec<CandidateScore>,
}

/// Build and score a plan for every candidate `k`; the smallest objective
/// wins, ties going to the smaller `k`.
pub fn optimize_deflation(family: &FunctionFamily, n: u64, r: f64, candidates: &[u32]) -> Result<OptimizedDeflation> {
    if candidates.is_empty() {
        return Err(Error::input("candidate list for k is empty"));
    }
    check_rate(n, r)?;
    let mut ks = candidates.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let max_norm = family.max_norm();
    let mut scores = Vec::with_capacity(ks.len());
    let mut best: Option<(f64, ChainBoundReport)> = None;
    for k in ks {
        let plan = build_deflation(family, k);
        let report = theorem_main_bound(family, &plan, n, r)?;
        let inflation = (report.w_inflated - report.w_r) * max_norm;
        let objective = report.total_rhs + inflation;
        scores.push(CandidateScore { k, total_rhs: report.total_rhs, inflation, objective });
        if best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, report));
        }
    }
    let (_, best) = best.expect("nonempty candidates");
    Ok(OptimizedDeflation { best, candidates: scores })
}
