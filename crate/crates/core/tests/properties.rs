use bdchain_core::montecarlo::{self, SimOptions, StoppingRule};
use bdchain_core::oracle::{self, TruncatedChainModel};
use bdchain_core::{
    analytics, parse_spec, spec_to_json, ChainSpec, Family, Number, ProbPair, RationalFormula, TailRule,
};
use num_rational::BigRational;
use num_traits::{One, Zero};
use proptest::prelude::*;

type Q = BigRational;

fn pair() -> impl Strategy<Value = ProbPair> {
    (2i64..=12).prop_flat_map(|d| (1..d).prop_map(move |a| ProbPair::new(Number::ratio(a, d), Number::ratio(d - a, d))))
}

fn tail_rule() -> impl Strategy<Value = TailRule> {
    prop_oneof![
        Just(TailRule::Half),
        Just(TailRule::RepeatLast),
        (1i64..=9).prop_map(|a| TailRule::Constant(Number::ratio(a, 10))),
    ]
}

fn table_chain() -> impl Strategy<Value = ChainSpec> {
    (prop::collection::vec(pair(), 1..12), tail_rule(), 1u64..6)
        .prop_map(|(table, tail, k)| ChainSpec::new(Family::Table { table, tail }, k).unwrap())
}

/// Chains whose tail is symmetric, hence recurrent.
fn recurrent_chain() -> impl Strategy<Value = ChainSpec> {
    (prop::collection::vec(pair(), 1..8), 1u64..5)
        .prop_map(|(table, k)| ChainSpec::new(Family::Table { table, tail: TailRule::Half }, k).unwrap())
}

fn any_chain() -> impl Strategy<Value = ChainSpec> {
    prop_oneof![
        table_chain(),
        (1u64..20).prop_map(|k| ChainSpec::simple_symmetric(k).unwrap()),
        (1u64..20).prop_map(|k| ChainSpec::example1(k).unwrap()),
        (1u64..20).prop_map(|k| ChainSpec::example1_mirrored(k).unwrap()),
        ((1i64..=9), 1u64..20).prop_map(|(a, k)| ChainSpec::constant_drift(Number::ratio(a, 10), k).unwrap()),
        (0.05f64..0.95, 1u64..20).prop_map(|(p, k)| ChainSpec::constant_drift(Number::Float(p), k).unwrap()),
        (prop::collection::vec(pair(), 1..5), 1u64..6)
            .prop_map(|(prefix, k)| ChainSpec::eventually_constant(prefix, k).unwrap()),
        (1u64..10).prop_map(|k| ChainSpec::new(
            Family::RationalExpression(RationalFormula { numerator: vec![3, 1], denominator: vec![3, 2] }),
            k
        )
        .unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn probabilities_are_normalized_and_positive(spec in any_chain()) {
        for n in 1..=60 {
            let pair = spec.probs_at(n).unwrap();
            prop_assert!(pair.left.is_positive() && pair.right.is_positive());
            let total = &pair.left + &pair.right;
            if spec.is_exact() {
                prop_assert_eq!(total, Number::one());
            } else {
                prop_assert!((total.to_f64() - 1.0).abs() <= 1e-15);
            }
        }
    }

    #[test]
    fn serialization_round_trips(spec in any_chain()) {
        let text = spec_to_json(&spec);
        let back = parse_spec(&text).unwrap();
        prop_assert_eq!(&back, &spec);
        prop_assert_eq!(spec_to_json(&back), text);
    }

    #[test]
    fn exit_probabilities_sum_to_one(spec in table_chain(), extra in 1u64..15) {
        let k = spec.start_state();
        let (low, high): (Q, Q) = analytics::exit_probabilities(&spec, 0, k, k + extra).unwrap();
        prop_assert!(low > Q::zero() && high > Q::zero());
        prop_assert_eq!(low + high, Q::one());
    }

    #[test]
    fn exit_probabilities_match_recursion_exactly(spec in table_chain(), b in 2u64..16) {
        let model = TruncatedChainModel::<Q>::from_spec(&spec, b as usize).unwrap();
        for start in 1..b {
            let analytic: (Q, Q) = analytics::exit_probabilities(&spec, 0, start, b).unwrap();
            prop_assert_eq!(analytic, oracle::exit_probs_by_recursion(&model, start as usize).unwrap());
        }
    }

    #[test]
    fn stopping_identity_holds_exactly(spec in table_chain(), m in 0u64..25) {
        let k = spec.start_state();
        let model = TruncatedChainModel::<Q>::from_spec(&spec, oracle::non_binding_level(k, m)).unwrap();
        let evolution = oracle::evolve_distribution(&model, k as usize, m).unwrap();
        prop_assert_eq!(evolution.distribution.total(), Q::one());
        let rhs = analytics::stopping_identity_rhs(&evolution.occupation, &spec).unwrap();
        prop_assert_eq!(oracle::expected_value_of(&evolution.distribution), rhs);
        prop_assert_eq!(analytics::monotonicity_violation(&evolution.occupation, &spec).unwrap(), None);
    }

    #[test]
    fn truncated_occupation_is_bounded_and_increasing(spec in recurrent_chain(), extra in 1usize..20) {
        let k = spec.start_state() as usize;
        let small = k + extra;
        let formula = analytics::occupation_profile_until_extinction::<Q>(&spec, small as u64 - 1).unwrap();
        let at = |n: usize| {
            let model = TruncatedChainModel::<Q>::from_spec(&spec, n).unwrap();
            oracle::occupation_by_fundamental_matrix(&model, k).unwrap().values
        };
        let (near, far) = (at(small), at(small + 5));
        for i in 0..small - 1 {
            prop_assert!(near[i] < far[i]);
            prop_assert!(far[i] < formula.values[i]);
        }
    }

    #[test]
    fn simulation_ignores_worker_count(spec in table_chain(), seed in any::<u64>(), m in 1u64..200) {
        let rule = StoppingRule::Truncation { m };
        let one = montecarlo::estimate_expectation(&spec, rule, 300, seed, SimOptions { workers: 1, ..SimOptions::default() }).unwrap();
        let many = montecarlo::estimate_expectation(&spec, rule, 300, seed, SimOptions { workers: 3, ..SimOptions::default() }).unwrap();
        prop_assert_eq!(one, many);
    }
}
