#![allow(dead_code)]

use convgrowth::{Operator, RecurrenceSpec, Term};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A random valid recurrence with `1..=max_terms` terms, arities in
/// `1..=max_arity` and weights `p/q <= max_weight` with `q <= 4`. Draws are
/// repeated until some arity is at least 2.
pub fn random_spec(
    rng: &mut impl Rng,
    max_terms: usize,
    max_arity: usize,
    max_weight: i64,
) -> RecurrenceSpec {
    loop {
        let t = rng.gen_range(1..=max_terms);
        let terms: Vec<Term> = (0..t)
            .map(|_| {
                let op = if rng.gen_bool(0.5) {
                    Operator::Sum
                } else {
                    Operator::Max
                };
                let arity = rng.gen_range(1..=max_arity);
                let denom = rng.gen_range(1..=4i64);
                let numer = rng.gen_range(1..=max_weight * denom);
                Term::new(
                    op,
                    arity,
                    BigRational::new(BigInt::from(numer), BigInt::from(denom)),
                )
            })
            .collect();
        if let Ok(spec) = RecurrenceSpec::new(terms) {
            return spec;
        }
    }
}

pub fn random_specs(seed: u64, count: usize) -> Vec<RecurrenceSpec> {
    let mut rng = rng(seed);
    (0..count).map(|_| random_spec(&mut rng, 4, 5, 8)).collect()
}
