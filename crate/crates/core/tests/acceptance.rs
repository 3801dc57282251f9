//! Acceptance suite: twelve criteria, one pass/fail line each.
//!
//! Runs as a plain binary so the lines are always printed; exits nonzero
//! when any criterion fails.

use std::path::PathBuf;
use std::process::ExitCode;
use std::rc::Rc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use tailbound::cgf::{cgf_discrete, check_t_properties, DiscreteDistribution, TabulatedFunction};
use tailbound::chaining::{
    build_deflation, gamma_exhaustive, gamma_functional, gamma_greedy, gamma_level_cap, level_cap, optimize_deflation,
    DeflatedSet, DeflationPlan, FunctionFamily, NormContext,
};
use tailbound::gaussian::{gaussian_instance_bound, optimal_rank, CovarianceSpec, GaussianModel, LinearFunctional};
use tailbound::io::{read_json, FamilyDocument};
use tailbound::orlicz::{
    bernstein_phi_star, bernstein_published_m, conversion_factor_m, conversion_integral, numerical_conjugate,
    wr_exponential_type, wr_quadrature_bound, OrliczGenerator,
};
use tailbound::verify::{reports_to_csv, run_trials, run_trials_with_threads, TrialPlan, VerificationReport};
use tailbound::Result;

const CHERNOFF_SEED: u64 = 20_240_501;
const GAUSSIAN_SEED: u64 = 11;
const THEOREM_SEED: u64 = 7;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

/// Whether a criterion held, with a one-line account of the numbers.
struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Result<Outcome> {
    Ok(Outcome { pass, detail: detail.into() })
}

fn bernstein(l: f64) -> OrliczGenerator {
    OrliczGenerator::bernstein(l).expect("positive L")
}

fn sub_gaussian_closed_form() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for r in [0.1, 1.0, 10.0] {
        let w = wr_exponential_type(&OrliczGenerator::sub_gaussian(), 0.25, r)?;
        worst = worst.max((w - (12.0 * r).sqrt()).abs());
    }
    outcome(worst <= 1e-9, format!("max |w_r - sqrt(12r)| = {worst:.3e}"))
}

fn conversion_factors() -> Result<Outcome> {
    let m = conversion_factor_m(&OrliczGenerator::sub_gaussian())?;
    let mut pass = m >= 0.25 - 1e-6;
    let mut detail = format!("sub-gaussian M = {m:.9}");
    for l in [0.1, 1.0, 10.0] {
        let m = conversion_factor_m(&bernstein(l))?;
        let target = bernstein_published_m(l);
        pass &= m >= target - 1e-6;
        detail += &format!("; bernstein L={l}: M = {m:.7} vs required {target:.7}");
    }
    outcome(pass, detail)
}

fn bernstein_integral_identity() -> Result<Outcome> {
    let mut pass = true;
    let mut detail = Vec::new();
    for l in [0.1, 1.0, 10.0] {
        let numeric = conversion_integral(&bernstein(l))?;
        let closed = (std::f64::consts::PI / 8.0).sqrt() * l + 1.0;
        pass &= (numeric - closed).abs() <= 1e-6;
        detail.push(format!("L={l}: {numeric:.6} vs {closed:.6}"));
    }
    outcome(pass, detail.join("; "))
}

fn conjugate_formula() -> Result<Outcome> {
    let mut worst: f64 = 0.0;
    for l in [0.5, 1.0, 2.0] {
        let g = bernstein(l);
        let hi = 2.0 / l - 0.01;
        for i in 0..100 {
            let lambda = hi * i as f64 / 99.0;
            let numeric = numerical_conjugate(|t| g.phi(t), lambda);
            worst = worst.max((numeric - bernstein_phi_star(lambda, l)).abs());
        }
    }
    outcome(worst <= 1e-6, format!("max |phi* - numerical| = {worst:.3e} over 300 points"))
}

fn quadrature_below_closed_form() -> Result<Outcome> {
    let mut worst = f64::NEG_INFINITY;
    for g in [OrliczGenerator::sub_gaussian(), bernstein(1.0)] {
        let m = conversion_factor_m(&g)?;
        for r in [0.1, 1.0, 10.0] {
            let gap = wr_quadrature_bound(&g, r)? - wr_exponential_type(&g, m, r)?;
            worst = worst.max(gap);
        }
    }
    outcome(worst <= 1e-6, format!("max (quadrature - exponential-type) = {worst:.3e}"))
}

fn random_distribution(rng: &mut Xoshiro256PlusPlus) -> (DiscreteDistribution, Vec<f64>) {
    let p = rng.random_range(2..=8);
    let weights: Vec<f64> = (0..p).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = weights.iter().sum();
    let mut probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let head: f64 = probs[..p - 1].iter().sum();
    probs[p - 1] = 1.0 - head;
    let dist = DiscreteDistribution::new((0..p).map(|i| vec![i as f64]).collect(), probs).expect("valid law");
    let raw: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
    let mean = dist.expectation(&raw);
    (dist, raw.iter().map(|v| v - mean).collect())
}

fn t_property_suite() -> Result<Outcome> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(6);
    let mut failures = 0;
    for _ in 0..1000 {
        let (dist, values) = random_distribution(&mut rng);
        let f = TabulatedFunction::centered(&dist, values)?;
        let oracle = cgf_discrete(&dist, &f)?;
        let r = rng.random_range(0.0..2.0);
        let s = rng.random_range(0.0..2.0);
        let alpha = rng.random_range(0.1..10.0);
        if !check_t_properties(&oracle, r, s, alpha)?.all() {
            failures += 1;
        }
    }
    outcome(failures == 0, format!("{failures} of 1000 distributions violate a property"))
}

fn chernoff_plan() -> Result<TrialPlan> {
    let doc: FamilyDocument = read_json(fixture("rademacher.json"))?;
    TrialPlan::chernoff(&doc.distribution()?, &doc.function("f")?, 50, 0.05, 100_000, CHERNOFF_SEED)
}

fn gaussian_model() -> Result<GaussianModel> {
    GaussianModel::from_spec(&read_json::<CovarianceSpec>(fixture("gaussian-poly2.json"))?)
}

fn gaussian_plan(model: &GaussianModel) -> Result<TrialPlan> {
    let k = optimal_rank(model, 100, 0.02)?;
    TrialPlan::gaussian(model, k, 100, 0.02, 1000, false, 5000, GAUSSIAN_SEED)
}

fn family12() -> Result<FunctionFamily> {
    read_json::<FamilyDocument>(fixture("family12.json"))?.family()
}

fn theorem_plan() -> Result<TrialPlan> {
    TrialPlan::theorem_main(&family12()?, 2, 200, 0.05, 20_000, THEOREM_SEED)
}

fn describe(rep: &VerificationReport) -> String {
    format!(
        "{} violations in {} trials, rate {:.5} vs ceiling {:.5} + 3*{:.5}",
        rep.violations, rep.trials, rep.rate, rep.guarantee, rep.stderr
    )
}

fn chernoff_coverage() -> Result<Outcome> {
    let rep = run_trials(&chernoff_plan()?)?;
    outcome(rep.pass, describe(&rep))
}

fn gaussian_validity() -> Result<Outcome> {
    let model = gaussian_model()?;
    let plan = gaussian_plan(&model)?;
    let rep = run_trials(&plan)?;
    let top = LinearFunctional::new(model.eigen().vector(0))?;
    let with_k = gaussian_instance_bound(&model, &top, plan.k as usize, 100, 0.02, false)?.total;
    let without = gaussian_instance_bound(&model, &top, 0, 100, 0.02, false)?.total;
    outcome(
        rep.pass && with_k < without,
        format!("k = {}; {}; top-direction bound {with_k:.6} vs k=0 {without:.6}", plan.k, describe(&rep)),
    )
}

fn theorem_validity() -> Result<Outcome> {
    let rep = run_trials(&theorem_plan()?)?;
    outcome(rep.pass && rep.violations == 0, describe(&rep))
}

fn random_family(rng: &mut Xoshiro256PlusPlus, members: usize) -> Result<FunctionFamily> {
    let p = 4;
    let dist = DiscreteDistribution::new((0..p).map(|i| vec![i as f64]).collect(), vec![0.25; p])?;
    let funcs = (0..members)
        .map(|i| {
            let raw: Vec<f64> = (0..p).map(|_| (rng.random_range(-8..=8) as f64) * 0.25).collect();
            let mean = dist.expectation(&raw);
            let values = raw.iter().map(|v| v - mean).collect();
            Ok((format!("f{i}"), TabulatedFunction::centered(&dist, values)?))
        })
        .collect::<Result<Vec<_>>>()?;
    FunctionFamily::new(dist, funcs, NormContext::Cgf)
}

/// `min_{|Q| ≤ cap} max_a min_{q ∈ Q} d(a, q)` over every subset, as bitmasks.
fn epsilon_by_bitmask(d: &[Vec<f64>], cap: usize) -> f64 {
    let m = d.len();
    if cap >= m {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << m) {
        if mask.count_ones() as usize > cap {
            continue;
        }
        let radius = (0..m)
            .map(|a| (0..m).filter(|q| mask >> q & 1 == 1).map(|q| d[a][q]).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max);
        best = best.min(radius);
    }
    best
}

fn gamma_levels(size: usize) -> u32 {
    (0..).find(|&l| gamma_level_cap(l) >= size).expect("caps grow without bound")
}

fn oracle_equivalence() -> Result<Outcome> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(10);
    let mut gamma_sets = 0;
    let mut epsilon_sets = 0;
    let mut failures = Vec::new();
    let mut sets: Vec<(Rc<FunctionFamily>, DeflatedSet)> = Vec::new();
    for members in (1..=11).cycle().take(44) {
        let family = Rc::new(random_family(&mut rng, members)?);
        let set = DeflationPlan::trivial(&family).deflated(&family)?;
        sets.push((family, set));
    }
    let fixture = Rc::new(family12()?);
    for k in 0..=3 {
        let set = build_deflation(&fixture, k).deflated(&fixture)?;
        sets.push((Rc::clone(&fixture), set));
    }
    for (family, set) in &sets {
        let d = &set.distances;
        let m = set.len();
        if m <= 8 {
            gamma_sets += 1;
            let cert = gamma_functional(set, family, 100)?;
            let greedy = gamma_greedy(set, &cert.weights)?;
            let exact = gamma_exhaustive(set, &cert.weights)?;
            if greedy.levels.len() != gamma_levels(m) as usize || greedy.value < exact.value {
                failures.push(format!("greedy below exhaustive on a {m}-point set"));
            }
            if cert.value != greedy.value.min(exact.value) {
                failures.push(format!("gamma_functional did not keep the better sequence on a {m}-point set"));
            }
            for c in [&cert, &greedy, &exact] {
                if (c.replay(d) - c.value).abs() > 1e-12 || !c.check_structure(set.zero) {
                    failures.push(format!("gamma certificate does not replay on a {m}-point set"));
                }
            }
        }
        if m <= 12 {
            epsilon_sets += 1;
            let mut level = 0;
            while level_cap(level) < m {
                let cert = tailbound::chaining::epsilon_ell(set, level);
                let oracle = epsilon_by_bitmask(d, level_cap(level));
                if cert.value != oracle || (cert.replay(d) - cert.value).abs() > 1e-12 {
                    failures.push(format!("epsilon_{level} = {} but enumeration gives {oracle} on {m} points", cert.value));
                }
                level += 1;
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{gamma_sets} gamma sets, {epsilon_sets} epsilon sets checked")
    } else {
        failures.join("; ")
    };
    outcome(failures.is_empty(), detail)
}

fn deflation_payoff() -> Result<Outcome> {
    let family = family12()?;
    let best = optimize_deflation(&family, 200, 0.05, &[1, 2, 3])?;
    let baseline = optimize_deflation(&family, 200, 0.05, &[0])?;
    let objective = best.candidates.iter().map(|c| c.objective).fold(f64::INFINITY, f64::min);
    let base = baseline.candidates[0].objective;
    outcome(objective < base, format!("best objective {objective:.6} (k = {}) vs A=0 baseline {base:.6}", best.best.k))
}

fn determinism() -> Result<Outcome> {
    let model = gaussian_model()?;
    let plans = [chernoff_plan()?, gaussian_plan(&model)?, theorem_plan()?];
    let first: Vec<VerificationReport> = plans.iter().map(run_trials).collect::<Result<_>>()?;
    let again: Vec<VerificationReport> = plans.iter().map(run_trials).collect::<Result<_>>()?;
    let serial: Vec<VerificationReport> =
        plans.iter().map(|p| run_trials_with_threads(p, Some(1))).collect::<Result<_>>()?;
    let (a, b, c) = (reports_to_csv(&first), reports_to_csv(&again), reports_to_csv(&serial));
    outcome(a == b && a == c, format!("{} CSV bytes; rerun identical: {}; single-thread identical: {}", a.len(), a == b, a == c))
}

type Criterion = fn() -> Result<Outcome>;

fn main() -> ExitCode {
    let criteria: [(&str, Criterion, Option<Duration>); 12] = [
        ("sub-Gaussian closed form", sub_gaussian_closed_form, Some(Duration::from_secs(1))),
        ("conversion factors", conversion_factors, Some(Duration::from_secs(5))),
        ("Bernstein integral identity", bernstein_integral_identity, Some(Duration::from_secs(2))),
        ("conjugate formula", conjugate_formula, Some(Duration::from_secs(2))),
        ("quadrature below closed form", quadrature_below_closed_form, Some(Duration::from_secs(10))),
        ("T_r property suite", t_property_suite, Some(Duration::from_secs(30))),
        ("Chernoff coverage", chernoff_coverage, Some(Duration::from_secs(10))),
        ("Gaussian validity", gaussian_validity, Some(Duration::from_secs(120))),
        ("deflated chaining validity", theorem_validity, Some(Duration::from_secs(120))),
        ("oracle equivalence", oracle_equivalence, Some(Duration::from_secs(60))),
        ("deflation payoff", deflation_payoff, Some(Duration::from_secs(30))),
        ("determinism", determinism, None),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass && budget.is_none_or(|b| elapsed <= b), o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failed += 1;
        }
        let verdict = if pass { "PASS" } else { "FAIL" };
        let limit = budget.map_or(String::new(), |b| format!(" of {} s", b.as_secs()));
        println!("criterion {:>2} {verdict} {name}: {detail} [{:.2} s{limit}]", i + 1, elapsed.as_secs_f64());
    }
    println!("acceptance: {} of 12 criteria pass", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
