//! Seeded Monte Carlo checks of the tail guarantees.
//!
//! Every trial draws a fresh sample, forms `E_n f` for each tracked function,
//! and counts a violation when any of them strictly exceeds its threshold.
//! Trial `i` uses its own Xoshiro256++ stream seeded with
//!
//! ```text
//! seed_i = mix64(root + 0x9E3779B97F4A7C15 · (i + 1))      (wrapping)
//! ```
//!
//! so the violation count does not depend on scheduling or thread count.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cgf::{cgf_discrete, rate_bound_t, DiscreteDistribution, TabulatedFunction};
use crate::chaining::{build_deflation, theorem_main_bound, FunctionFamily};
use crate::error::{Error, Result};
use crate::gaussian::{gaussian_instance_bound, GaussianModel, LinearFunctional};
use crate::numeric::mix64;

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "TAILBOUND_THREADS";

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

/// Seed of trial `index` under `root`. Index `u64::MAX` is reserved for
/// auxiliary draws such as the Gaussian direction mesh.
pub fn trial_seed(root: u64, index: u64) -> u64 {
    mix64(root.wrapping_add(SEED_STRIDE.wrapping_mul(index.wrapping_add(1))))
}

/// Which guarantee a plan checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Target {
    /// `E_n f ≤ T_r(f)` for a fixed `f`, failure probability `e^{-nr}`.
    Chernoff,
    /// `E_n h ≤ w_r ‖h‖` for a fixed difference `h`, failure probability `e^{-nr}`.
    Corollary,
    /// The rank-`k` Gaussian bound on a direction mesh, failure probability `2e^{-nr}`.
    Gaussian,
    /// The deflated chaining bound for every member, failure probability `2e^{-nr}`.
    TheoremMain,
}

impl Target {
    pub fn as_str(self) -> &'static str {
        match self {
            Target::Chernoff => "chernoff",
            Target::Corollary => "corollary",
            Target::Gaussian => "gaussian",
            Target::TheoremMain => "theorem-main",
        }
    }

    /// Ceiling on the violation probability.
    pub fn failure_probability(self, n: u64, r: f64) -> f64 {
        let single = (-(n as f64) * r).exp();
        match self {
            Target::Chernoff | Target::Corollary => single,
            Target::Gaussian | Target::TheoremMain => 2.0 * single,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "chernoff" => Ok(Target::Chernoff),
            "corollary" => Ok(Target::Corollary),
            "gaussian" => Ok(Target::Gaussian),
            "theorem-main" => Ok(Target::TheoremMain),
            other => Err(Error::input(format!(
                "unknown target `{other}` (expected chernoff, corollary, gaussian or theorem-main)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
enum Sampler {
    /// `n` inverse-CDF draws per trial; each row of `functions` is tracked.
    Discrete { dist: DiscreteDistribution, functions: Vec<Vec<f64>> },
    /// One `G ~ N(0, I_d)` per trial; `E_n f_u = ⟨a_u, G⟩` with `a_u = Σ^{1/2}u/√n`.
    Gaussian { dim: usize, loadings: Vec<Vec<f64>> },
}

/// A fully specified experiment: thresholds are fixed before any trial runs.
#[derive(Debug, Clone)]
pub struct TrialPlan {
    pub target: Target,
    pub n: u64,
    pub r: f64,
    pub k: u32,
    pub trials: u64,
    pub root_seed: u64,
    thresholds: Vec<f64>,
    sampler: Sampler,
}

fn check_common(n: u64, r: f64, trials: u64) -> Result<()> {
    if n == 0 {
        return Err(Error::input("sample size n must be at least 1"));
    }
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::input(format!("rate r = {r} must be positive")));
    }
    if trials == 0 {
        return Err(Error::input("trial count must be at least 1"));
    }
    Ok(())
}

impl TrialPlan {
    /// Track one centered `f` against `T_r(f)`.
    pub fn chernoff(
        dist: &DiscreteDistribution,
        f: &TabulatedFunction,
        n: u64,
        r: f64,
        trials: u64,
        root_seed: u64,
    ) -> Result<Self> {
        check_common(n, r, trials)?;
        let threshold = rate_bound_t(&cgf_discrete(dist, f)?, r)?;
        Ok(Self {
            target: Target::Chernoff,
            n,
            r,
            k: 0,
            trials,
            root_seed,
            thresholds: vec![threshold],
            sampler: Sampler::Discrete { dist: dist.clone(), functions: vec![f.values().to_vec()] },
        })
    }

    /// Track `h = f_i - f_j` against `w_r ‖h‖`.
    pub fn corollary(
        family: &FunctionFamily,
        i: usize,
        j: usize,
        n: u64,
        r: f64,
        trials: u64,
        root_seed: u64,
    ) -> Result<Self> {
        check_common(n, r, trials)?;
        if i >= family.len() || j >= family.len() {
            return Err(Error::input("member index outside the family"));
        }
        let h = family.member(i).sub(family.member(j));
        let threshold = family.class_wr(r)? * family.distance(i, j);
        Ok(Self {
            target: Target::Corollary,
            n,
            r,
            k: 0,
            trials,
            root_seed,
            thresholds: vec![threshold],
            sampler: Sampler::Discrete { dist: family.distribution().clone(), functions: vec![h.values().to_vec()] },
        })
    }

    /// Track `mesh` unit directions against the rank-`k` Gaussian bound. The
    /// directions are normalized standard normal draws from the reserved
    /// stream of `root_seed`.
    #[allow(clippy::too_many_arguments)]
    pub fn gaussian(
        model: &GaussianModel,
        k: usize,
        n: u64,
        r: f64,
        mesh: usize,
        loose_projected: bool,
        trials: u64,
        root_seed: u64,
    ) -> Result<Self> {
        check_common(n, r, trials)?;
        if mesh == 0 {
            return Err(Error::input("direction mesh must contain at least one direction"));
        }
        let d = model.dim();
        let directions = sphere_mesh(d, mesh, trial_seed(root_seed, u64::MAX));
        let scale = 1.0 / (n as f64).sqrt();
        let mut thresholds = Vec::with_capacity(mesh);
        let mut loadings = Vec::with_capacity(mesh);
        for u in directions {
            let f = LinearFunctional::new(u)?;
            thresholds.push(gaussian_instance_bound(model, &f, k, n, r, loose_projected)?.total);
            loadings.push(model.sqrt_apply(f.direction()).into_iter().map(|x| x * scale).collect());
        }
        Ok(Self {
            target: Target::Gaussian,
            n,
            r,
            k: k as u32,
            trials,
            root_seed,
            thresholds,
            sampler: Sampler::Gaussian { dim: d, loadings },
        })
    }

    /// Track every member against `w_{r+k/n} ‖f‖ + RHS` for the greedy
    /// deflation with parameter `k`.
    pub fn theorem_main(family: &FunctionFamily, k: u32, n: u64, r: f64, trials: u64, root_seed: u64) -> Result<Self> {
        check_common(n, r, trials)?;
        let report = theorem_main_bound(family, &build_deflation(family, k), n, r)?;
        Ok(Self {
            target: Target::TheoremMain,
            n,
            r,
            k,
            trials,
            root_seed,
            thresholds: report.thresholds(),
            sampler: Sampler::Discrete {
                dist: family.distribution().clone(),
                functions: family.members().iter().map(|f| f.values().to_vec()).collect(),
            },
        })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    /// Replace the thresholds (one per tracked function).
    pub fn with_thresholds(mut self, thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.len() != self.thresholds.len() {
            return Err(Error::input(format!(
                "expected {} thresholds, got {}",
                self.thresholds.len(),
                thresholds.len()
            )));
        }
        self.thresholds = thresholds;
        Ok(self)
    }

    /// Whether trial `index` violates some threshold.
    fn trial(&self, index: u64) -> bool {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(trial_seed(self.root_seed, index));
        match &self.sampler {
            Sampler::Discrete { dist, functions } => {
                let mut counts = vec![0u64; dist.len()];
                for _ in 0..self.n {
                    counts[dist.inverse_cdf(rng.random::<f64>())] += 1;
                }
                let n = self.n as f64;
                functions.iter().zip(&self.thresholds).any(|(values, &t)| {
                    let sum: f64 = counts.iter().zip(values).map(|(&c, v)| c as f64 * v).sum();
                    sum / n > t
                })
            }
            Sampler::Gaussian { dim, loadings } => {
                let g: Vec<f64> = (0..*dim).map(|_| rng.sample(StandardNormal)).collect();
                loadings.iter().zip(&self.thresholds).any(|(a, &t)| {
                    let e: f64 = a.iter().zip(&g).map(|(x, y)| x * y).sum();
                    e > t
                })
            }
        }
    }
}

/// `count` unit vectors in `R^d` from normalized standard normal draws.
pub fn sphere_mesh(d: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            out.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    out
}

/// Outcome of a plan. `pass` is `rate ≤ guarantee + 3·stderr` with the
/// empirical binomial standard error `√(rate(1 - rate)/trials)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub target: Target,
    pub n: u64,
    pub r: f64,
    pub k: u32,
    pub trials: u64,
    pub violations: u64,
    pub rate: f64,
    pub guarantee: f64,
    pub stderr: f64,
    pub pass: bool,
}

impl VerificationReport {
    pub fn new(target: Target, n: u64, r: f64, k: u32, trials: u64, violations: u64) -> Self {
        let rate = violations as f64 / trials as f64;
        let guarantee = target.failure_probability(n, r);
        let stderr = (rate * (1.0 - rate) / trials as f64).sqrt();
        Self { target, n, r, k, trials, violations, rate, guarantee, stderr, pass: rate <= guarantee + 3.0 * stderr }
    }

    pub const CSV_HEADER: &'static str = "target,n,r,k,trials,violations,rate,guarantee,stderr,pass";

    /// One CSV row; floats in shortest round-trip form.
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.target, self.n, self.r, self.k, self.trials, self.violations, self.rate, self.guarantee, self.stderr, self.pass
        )
    }
}

/// Header plus one row per report, newline-terminated.
pub fn reports_to_csv(reports: &[VerificationReport]) -> String {
    let mut out = String::from(VerificationReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

/// Thread cap from `TAILBOUND_THREADS`, if set to a positive integer.
pub fn thread_cap_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&t| t > 0)
}

/// Run every trial of `plan` with the thread cap from the environment.
pub fn run_trials(plan: &TrialPlan) -> Result<VerificationReport> {
    run_trials_with_threads(plan, thread_cap_from_env())
}

/// Run every trial of `plan` on at most `threads` workers (all cores when
/// `None`). The report does not depend on `threads`.
pub fn run_trials_with_threads(plan: &TrialPlan, threads: Option<usize>) -> Result<VerificationReport> {
    let count = || (0..plan.trials).into_par_iter().filter(|&i| plan.trial(i)).count() as u64;
    let violations = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::numerical(format!("could not start worker pool: {e}")))?
            .install(count),
        None => count(),
    };
    Ok(VerificationReport::new(plan.target, plan.n, plan.r, plan.k, plan.trials, violations))
}

/// Everything a sweep needs to rebuild a plan at each grid point.
#[derive(Debug, Clone, Copy)]
pub enum SweepModel<'a> {
    Chernoff { dist: &'a DiscreteDistribution, f: &'a TabulatedFunction },
    Corollary { family: &'a FunctionFamily, i: usize, j: usize },
    Gaussian { model: &'a GaussianModel, mesh: usize, loose_projected: bool },
    TheoremMain { family: &'a FunctionFamily },
}

impl SweepModel<'_> {
    pub fn plan(&self, n: u64, r: f64, k: u32, trials: u64, root_seed: u64) -> Result<TrialPlan> {
        let mut plan = match *self {
            SweepModel::Chernoff { dist, f } => TrialPlan::chernoff(dist, f, n, r, trials, root_seed)?,
            SweepModel::Corollary { family, i, j } => TrialPlan::corollary(family, i, j, n, r, trials, root_seed)?,
            SweepModel::Gaussian { model, mesh, loose_projected } => {
                TrialPlan::gaussian(model, k as usize, n, r, mesh, loose_projected, trials, root_seed)?
            }
            SweepModel::TheoremMain { family } => TrialPlan::theorem_main(family, k, n, r, trials, root_seed)?,
        };
        plan.k = k;
        Ok(plan)
    }
}

/// Grid over `(n, r, k)`, iterated with `n` outermost and `k` innermost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub n: Vec<u64>,
    pub r: Vec<f64>,
    pub k: Vec<u32>,
}

/// One report per grid point, all with the same root seed.
pub fn sweep(model: SweepModel<'_>, grid: &SweepGrid, trials: u64, root_seed: u64) -> Result<Vec<VerificationReport>> {
    if grid.n.is_empty() || grid.r.is_empty() || grid.k.is_empty() {
        return Err(Error::input("sweep grid must have at least one value of n, r and k"));
    }
    let mut out = Vec::with_capacity(grid.n.len() * grid.r.len() * grid.k.len());
    for &n in &grid.n {
        for &r in &grid.r {
            for &k in &grid.k {
                out.push(run_trials(&model.plan(n, r, k, trials, root_seed)?)?);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chaining::NormContext;

    fn rademacher() -> (DiscreteDistribution, TabulatedFunction) {
        let d = DiscreteDistribution::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap();
        (d, TabulatedFunction::new(vec![-1.0, 1.0]).unwrap())
    }

    #[test]
    fn target_parsing() {
        for t in [Target::Chernoff, Target::Corollary, Target::Gaussian, Target::TheoremMain] {
            assert_eq!(t.as_str().parse::<Target>().unwrap(), t);
        }
        assert!(matches!("lemma".parse::<Target>(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a: Vec<u64> = (0..1000).map(|i| trial_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 1000);
        assert_eq!(trial_seed(7, 3), trial_seed(7, 3));
        assert_ne!(trial_seed(7, 3), trial_seed(8, 3));
    }

    #[test]
    fn report_fields_are_consistent() {
        let r = VerificationReport::new(Target::Chernoff, 100, 0.1, 0, 100, 50);
        assert_eq!(r.rate, 0.5);
        assert!((r.stderr - 0.05).abs() < 1e-15);
        assert!(!r.pass);
        let r = VerificationReport::new(Target::TheoremMain, 10, 0.1, 2, 100, 0);
        assert!((r.guarantee - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!(r.pass);
        assert_eq!(r.csv_row().split(',').count(), VerificationReport::CSV_HEADER.split(',').count());
    }

    #[test]
    fn zero_family_never_violates() {
        let (d, _) = rademacher();
        let fam = FunctionFamily::new(d, vec![], NormContext::Cgf).unwrap();
        let plan = TrialPlan::theorem_main(&fam, 1, 20, 0.1, 500, 3).unwrap();
        assert_eq!(run_trials(&plan).unwrap().violations, 0);
    }

    #[test]
    fn negative_thresholds_always_violate() {
        let (d, f) = rademacher();
        let fam = FunctionFamily::new(d, vec![("f".into(), f)], NormContext::Cgf).unwrap();
        let plan = TrialPlan::theorem_main(&fam, 0, 20, 0.1, 300, 3).unwrap();
        let plan = plan.with_thresholds(vec![-1.0; 2]).unwrap();
        let rep = run_trials(&plan).unwrap();
        assert_eq!(rep.rate, 1.0);
    }

    #[test]
    fn threshold_override_checks_length() {
        let (d, f) = rademacher();
        let plan = TrialPlan::chernoff(&d, &f, 10, 0.1, 10, 1).unwrap();
        assert!(plan.with_thresholds(vec![0.0, 0.0]).is_err());
    }

    #[test]
    fn identical_across_thread_counts() {
        let (d, f) = rademacher();
        let plan = TrialPlan::chernoff(&d, &f, 30, 0.02, 4000, 11).unwrap();
        let one = run_trials_with_threads(&plan, Some(1)).unwrap();
        let four = run_trials_with_threads(&plan, Some(4)).unwrap();
        assert_eq!(one, four);
        assert!(one.violations > 0);
    }

    #[test]
    fn sampler_is_unbiased() {
        let d = DiscreteDistribution::new(vec![vec![0.0], vec![1.0], vec![2.0]], vec![0.2, 0.5, 0.3]).unwrap();
        let f = TabulatedFunction::centered(&d, vec![-1.1, -0.2, 1.066_666_666_666_666_7]).unwrap();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(99);
        let draws = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..draws {
            sum += f.values()[d.inverse_cdf(rng.random::<f64>())];
        }
        let var: f64 = d.probabilities().iter().zip(f.values()).map(|(p, v)| p * v * v).sum();
        let se = (var / draws as f64).sqrt();
        assert!((sum / draws as f64).abs() < 4.0 * se);
    }

    #[test]
    fn mesh_is_unit_and_reproducible() {
        let a = sphere_mesh(5, 20, 4);
        assert_eq!(a, sphere_mesh(5, 20, 4));
        for v in &a {
            assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sweep_single_point_matches_run() {
        let (d, f) = rademacher();
        let model = SweepModel::Chernoff { dist: &d, f: &f };
        let grid = SweepGrid { n: vec![20], r: vec![0.1], k: vec![0] };
        let rows = sweep(model, &grid, 1000, 5).unwrap();
        let direct = run_trials(&TrialPlan::chernoff(&d, &f, 20, 0.1, 1000, 5).unwrap()).unwrap();
        assert_eq!(rows, vec![direct]);
        let empty = SweepGrid { n: vec![], r: vec![0.1], k: vec![0] };
        assert!(sweep(model, &empty, 10, 5).is_err());
    }
}
