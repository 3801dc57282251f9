//! Randomized invariants of the rate bound, the norms, the class coefficient
//! and the cover numbers.

use proptest::prelude::*;

use tailbound::cgf::{cgf_discrete, check_t_properties, rate_bound_t, DiscreteDistribution, TabulatedFunction};
use tailbound::chaining::{epsilon_ell, DeflationPlan, FunctionFamily, NormContext};
use tailbound::gaussian::{gaussian_instance_bound, optimal_rank, rank_objective, GaussianModel, LinearFunctional};
use tailbound::orlicz::{orlicz_norm, OrliczGenerator};

/// A law on `p` points with weights bounded away from zero.
fn distribution() -> impl Strategy<Value = DiscreteDistribution> {
    prop::collection::vec(0.05f64..1.0, 2..7).prop_map(|w| {
        let total: f64 = w.iter().sum();
        let mut probs: Vec<f64> = w.iter().map(|x| x / total).collect();
        let head: f64 = probs[..probs.len() - 1].iter().sum();
        *probs.last_mut().unwrap() = 1.0 - head;
        DiscreteDistribution::new((0..probs.len()).map(|i| vec![i as f64]).collect(), probs).unwrap()
    })
}

fn centered(dist: &DiscreteDistribution, raw: &[f64]) -> TabulatedFunction {
    let values = &raw[..dist.len()];
    let mean = dist.expectation(values);
    TabulatedFunction::centered(dist, values.iter().map(|v| v - mean).collect()).unwrap()
}

fn raw_values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-4.0f64..4.0, 7)
}

fn generator() -> impl Strategy<Value = OrliczGenerator> {
    prop_oneof![
        Just(OrliczGenerator::sub_gaussian()),
        Just(OrliczGenerator::sub_exponential()),
        (0.1f64..5.0).prop_map(|l| OrliczGenerator::bernstein(l).unwrap()),
    ]
}

/// A family of up to five members on a four-point uniform law.
fn family() -> impl Strategy<Value = FunctionFamily> {
    prop::collection::vec(prop::collection::vec(-8i32..=8, 4), 1..6).prop_map(|rows| {
        let dist = DiscreteDistribution::new((0..4).map(|i| vec![i as f64]).collect(), vec![0.25; 4]).unwrap();
        let members = rows
            .iter()
            .enumerate()
            .map(|(i, row)| {
                let raw: Vec<f64> = row.iter().map(|&v| v as f64 * 0.25).collect();
                (format!("f{i}"), centered(&dist, &raw))
            })
            .filter(|(_, f)| !f.is_zero())
            .collect::<Vec<_>>();
        let mut seen = Vec::new();
        let members = members
            .into_iter()
            .filter(|(_, f)| {
                let fresh = !seen.contains(f);
                seen.push(f.clone());
                fresh
            })
            .collect();
        FunctionFamily::new(dist, members, NormContext::Cgf).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn rate_bound_is_homogeneous_subadditive_and_concave(
        dist in distribution(),
        raw in raw_values(),
        r in 0.0f64..3.0,
        s in 0.0f64..3.0,
        alpha in 0.05f64..20.0,
    ) {
        let f = centered(&dist, &raw);
        let oracle = cgf_discrete(&dist, &f).unwrap();
        let report = check_t_properties(&oracle, r, s, alpha).unwrap();
        prop_assert!(report.all(), "{report:?}");
    }

    #[test]
    fn rate_bound_lies_between_zero_and_the_supremum(
        dist in distribution(),
        raw in raw_values(),
        r in 0.0f64..50.0,
    ) {
        let f = centered(&dist, &raw);
        let t = rate_bound_t(&cgf_discrete(&dist, &f).unwrap(), r).unwrap();
        prop_assert!(t >= -1e-12);
        prop_assert!(t <= f.values().iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1e-12);
    }

    #[test]
    fn orlicz_norm_is_homogeneous_and_subadditive(
        dist in distribution(),
        a in raw_values(),
        b in raw_values(),
        c in 0.1f64..10.0,
        gen in generator(),
    ) {
        let f = centered(&dist, &a);
        let g = centered(&dist, &b);
        let nf = orlicz_norm(&dist, &f, &gen).unwrap();
        let ng = orlicz_norm(&dist, &g, &gen).unwrap();
        let ncf = orlicz_norm(&dist, &f.scale(c), &gen).unwrap();
        let nsum = orlicz_norm(&dist, &f.add(&g), &gen).unwrap();
        prop_assert!((ncf - c * nf).abs() <= 1e-8 * (c * nf).max(1e-300));
        prop_assert!(nsum <= (nf + ng) * (1.0 + 1e-8));
    }

    #[test]
    fn family_distances_form_a_metric(fam in family()) {
        let m = fam.len();
        for i in 0..m {
            prop_assert_eq!(fam.distance(i, i), 0.0);
            for j in 0..m {
                prop_assert_eq!(fam.distance(i, j), fam.distance(j, i));
                for k in 0..m {
                    prop_assert!(fam.distance(i, j) <= fam.distance(i, k) + fam.distance(k, j) + 1e-9);
                }
            }
        }
    }

    #[test]
    fn class_coefficient_is_monotone_and_subadditive(fam in family(), r in 0.001f64..2.0, s in 0.001f64..2.0) {
        let (lo, hi) = if r <= s { (r, s) } else { (s, r) };
        let w_lo = fam.class_wr(lo).unwrap();
        let w_hi = fam.class_wr(hi).unwrap();
        let w_sum = fam.class_wr(r + s).unwrap();
        prop_assert!(w_lo <= w_hi + 1e-9);
        prop_assert!(w_sum <= w_lo + w_hi + 1e-8);
    }

    #[test]
    fn members_satisfy_the_class_coefficient_bound(fam in family(), r in 0.001f64..2.0) {
        let w = fam.class_wr(r).unwrap();
        for i in 0..fam.len() {
            let t = rate_bound_t(&cgf_discrete(fam.distribution(), fam.member(i)).unwrap(), r).unwrap();
            prop_assert!(t <= w * fam.member_norm(i) + 1e-8, "member {i}: {t} > {w} * {}", fam.member_norm(i));
        }
    }

    #[test]
    fn cover_radius_never_grows_with_the_level(fam in family()) {
        let set = DeflationPlan::trivial(&fam).deflated(&fam).unwrap();
        let values: Vec<f64> = (0..4).map(|l| epsilon_ell(&set, l).value).collect();
        for pair in values.windows(2) {
            prop_assert!(pair[1] <= pair[0]);
        }
        prop_assert_eq!(values[3], 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn gaussian_bound_terms_add_up_and_rank_is_optimal(
        spectrum in prop::collection::vec(0.0f64..4.0, 1..8),
        dir in prop::collection::vec(-1.0f64..1.0, 8),
        n in 1u64..500,
        r in 0.001f64..1.0,
    ) {
        let d = spectrum.len();
        let cov: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { spectrum[i] } else { 0.0 }).collect()).collect();
        let model = GaussianModel::new(cov).unwrap();
        let u = &dir[..d];
        let len = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assume!(len > 1e-3);
        let f = LinearFunctional::new(u.iter().map(|x| x / len).collect()).unwrap();
        let k_star = optimal_rank(&model, n, r).unwrap();
        for k in 0..=d {
            let b = gaussian_instance_bound(&model, &f, k, n, r, false).unwrap();
            prop_assert!((b.total - (b.tail_trace + b.tail_op + b.projected + b.base)).abs() <= 1e-12 * b.total.max(1.0));
            prop_assert!(rank_objective(&model, k_star, n, r) <= rank_objective(&model, k, n, r));
            let loose = gaussian_instance_bound(&model, &f, k, n, r, true).unwrap();
            prop_assert!(b.projected <= loose.projected + 1e-12);
        }
    }
}
