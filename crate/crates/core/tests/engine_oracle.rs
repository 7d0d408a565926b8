mod common;

use convgrowth::{catalog, ExactScalar, LogScalar, Scalar, SequenceTable, TreeOracle};
use num_bigint::BigInt;
use proptest::prelude::*;

#[test]
fn catalan_tree_counts_match_values() {
    let spec = catalog::catalan();
    let oracle = TreeOracle::new(&spec);
    let table = SequenceTable::<ExactScalar>::compute(&spec, 9).unwrap();
    for n in 0..=9 {
        let count = oracle.count(n).unwrap();
        assert!(table.value(n).unwrap().into_inner() == count.clone().into());
        if n > 0 {
            assert_eq!(
                oracle.enumerate(n).unwrap().count(),
                usize::try_from(count).unwrap()
            );
        }
    }
    assert!(oracle.enumerate(0).is_err());
}

#[test]
fn oracle_refuses_above_cap() {
    let oracle = TreeOracle::new(&catalog::catalan());
    assert!(oracle.count(10).is_err());
    assert!(oracle.clone().with_cap(12).count(12).is_ok());
}

#[test]
fn mixed_example_sits_between_oracles() {
    let spec = catalog::mixed_example();
    let oracle = TreeOracle::new(&spec);
    let table = SequenceTable::<ExactScalar>::compute(&spec, 8).unwrap();
    for n in 1..=8 {
        let s = table.value(n).unwrap().into_inner();
        assert!(oracle.oracle_max(n).unwrap() <= s);
        assert!(s <= oracle.oracle_sum(n).unwrap());
    }
}

#[test]
fn every_enumerated_tree_is_well_formed() {
    let spec = catalog::mixed_example();
    let oracle = TreeOracle::new(&spec);
    let mut seen = 0;
    for tree in oracle.enumerate(5).unwrap() {
        assert!(tree.is_well_formed(&spec));
        assert_eq!(tree.size(), 5);
        seen += 1;
    }
    assert_eq!(BigInt::from(seen), oracle.count(5).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn engine_matches_direct_expansion(seed in any::<u64>()) {
        let spec = common::random_specs(seed, 1).pop().unwrap();
        let table = SequenceTable::<ExactScalar>::compute(&spec, 7).unwrap();
        let oracle = TreeOracle::new(&spec);
        for n in 0..=7 {
            prop_assert_eq!(table.value(n).unwrap().into_inner(), oracle.direct_value(n).unwrap());
        }
    }

    #[test]
    fn sum_recurrences_count_weighted_trees(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let spec = loop {
            let s = common::random_spec(&mut rng, 3, 3, 3);
            if s.is_all_sum() { break s; }
        };
        let table = SequenceTable::<ExactScalar>::compute(&spec, 6).unwrap();
        let oracle = TreeOracle::new(&spec);
        for n in 0..=6 {
            prop_assert_eq!(table.value(n).unwrap().into_inner(), oracle.oracle_sum(n).unwrap());
        }
    }

    #[test]
    fn extending_in_steps_equals_one_shot(seed in any::<u64>(), cut in 1usize..60) {
        let spec = common::random_specs(seed, 1).pop().unwrap();
        let mut stepped = SequenceTable::<LogScalar>::compute(&spec, cut).unwrap();
        stepped.extend(60).unwrap();
        let direct = SequenceTable::<LogScalar>::compute(&spec, 60).unwrap();
        prop_assert_eq!(stepped.encode_cache(), direct.encode_cache());
    }

    #[test]
    fn values_are_monotone_in_weights(seed in any::<u64>()) {
        // Raising every weight by one can only increase the sequence.
        let spec = common::random_specs(seed, 1).pop().unwrap();
        let bumped = convgrowth::RecurrenceSpec::new(
            spec.terms()
                .iter()
                .map(|t| convgrowth::Term::new(t.op, t.arity, t.weight.clone() + BigInt::from(1)))
                .collect(),
        ).unwrap();
        let a = SequenceTable::<LogScalar>::compute(&spec, 40).unwrap().values();
        let b = SequenceTable::<LogScalar>::compute(&bumped, 40).unwrap().values();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.approx_le(y, 1e-12));
        }
    }
}
