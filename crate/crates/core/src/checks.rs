//! Structural inequalities that every computed prefix must satisfy.
//!
//! * supermultiplicativity: `kappa* s_u s_v <= s_{u+v+1}`
//! * history bound: `s_n <= L (n-1) s_1 s_{n-1}` for `n >= 2`
//! * subtree decomposition (all-sum recurrences):
//!   `s_n <= sum_{i in R} L (n-i) s_{n-i} s_i`, `R = [(n-1)/(L+1), (Ln+1)/(L+1)]`
//! * submultiplicative transform:
//!   `s_n <= (s_1 L^2 n^3 / kappa*)^(log_{(L+1)/L} n) s_m s_{n-m}`
//!
//! The exact backend compares rationals; the log backend allows a relative
//! slack on the log scale. The transform involves irrational exponents and
//! is always checked on the log scale.

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::engine::SequenceTable;
use crate::numeric::Scalar;
use crate::oracle::lemma_interval;

/// Default slack for log-domain comparisons.
pub const LOG_SLACK: f64 = 1e-9;

const KEPT_VIOLATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    /// The indices the inequality was instantiated at (`(u, v)`, `(n,)` or `(n, m)`).
    pub indices: Vec<usize>,
    pub lhs_ln: f64,
    pub rhs_ln: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InequalityReport {
    pub name: &'static str,
    pub checked: usize,
    pub violations: usize,
    /// The first few violations, for diagnostics.
    pub examples: Vec<Violation>,
}

impl InequalityReport {
    fn new(name: &'static str) -> Self {
        InequalityReport {
            name,
            checked: 0,
            violations: 0,
            examples: Vec::new(),
        }
    }

    fn observe(&mut self, holds: bool, violation: impl FnOnce() -> Violation) {
        self.checked += 1;
        if !holds {
            self.violations += 1;
            if self.examples.len() < KEPT_VIOLATIONS {
                self.examples.push(violation());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

fn integer<S: Scalar>(v: usize) -> S {
    S::from_rational(&BigRational::from_integer(BigInt::from(v)))
}

/// `kappa* s_u s_v <= s_{u+v+1}` for all `u + v + 1 <= N`.
pub fn supermultiplicativity<S: Scalar>(table: &SequenceTable<S>, slack: f64) -> InequalityReport {
    let mut report = InequalityReport::new("supermultiplicativity");
    let s = table.values();
    let kstar = S::from_rational(table.spec().kstar());
    let big_n = table.len_n();
    for u in 0..big_n {
        let scaled = kstar.mul(&s[u]);
        for v in u..big_n - u {
            let lhs = scaled.mul(&s[v]);
            let rhs = &s[u + v + 1];
            report.observe(lhs.approx_le(rhs, slack), || Violation {
                indices: vec![u, v],
                lhs_ln: lhs.ln(),
                rhs_ln: rhs.ln(),
            });
        }
    }
    report
}

/// `s_n <= L (n-1) s_1 s_{n-1}` for `2 <= n <= N`.
pub fn history_bound<S: Scalar>(table: &SequenceTable<S>, slack: f64) -> InequalityReport {
    let mut report = InequalityReport::new("history bound");
    let s = table.values();
    let l = table.spec().max_arity();
    for n in 2..=table.len_n() {
        let rhs = integer::<S>(l * (n - 1)).mul(&s[1]).mul(&s[n - 1]);
        report.observe(s[n].approx_le(&rhs, slack), || Violation {
            indices: vec![n],
            lhs_ln: s[n].ln(),
            rhs_ln: rhs.ln(),
        });
    }
    report
}

/// `s_n <= sum_{i in R} L (n-i) s_{n-i} s_i` for `2 <= n <= N`. Only
/// guaranteed for recurrences without max terms.
pub fn decomposition_bound<S: Scalar>(table: &SequenceTable<S>, slack: f64) -> InequalityReport {
    let mut report = InequalityReport::new("subtree decomposition bound");
    let s = table.values();
    let l = table.spec().max_arity();
    for n in 2..=table.len_n() {
        let rhs = lemma_interval(n, l).fold(S::zero(), |acc, i| {
            acc.add(&integer::<S>(l * (n - i)).mul(&s[n - i]).mul(&s[i]))
        });
        report.observe(s[n].approx_le(&rhs, slack), || Violation {
            indices: vec![n],
            lhs_ln: s[n].ln(),
            rhs_ln: rhs.ln(),
        });
    }
    report
}

/// `ln s_n <= alpha ln n ln(s_1 L^2 n^3 / kappa*) + ln s_m + ln s_{n-m}` for
/// `1 <= n <= N`, `0 <= m <= n`.
pub fn submultiplicative_transform<S: Scalar>(
    table: &SequenceTable<S>,
    slack: f64,
) -> InequalityReport {
    let mut report = InequalityReport::new("submultiplicative transform");
    let c = table.spec().constants();
    let ln_s = table.values_ln();
    let l = c.max_arity as f64;
    for n in 1..=table.len_n() {
        let ln_n = (n as f64).ln();
        let prefactor = c.alpha * ln_n * (c.ln_s1 + 2.0 * l.ln() + 3.0 * ln_n - c.ln_kstar);
        for m in 0..=n / 2 {
            let rhs = prefactor + ln_s[m] + ln_s[n - m];
            let lhs = ln_s[n];
            report.observe(lhs <= rhs + slack * rhs.abs().max(1.0), || Violation {
                indices: vec![n, m],
                lhs_ln: lhs,
                rhs_ln: rhs,
            });
        }
    }
    report
}

/// Runs every applicable inequality on the table.
pub fn all_inequalities<S: Scalar>(table: &SequenceTable<S>, slack: f64) -> Vec<InequalityReport> {
    let mut out = vec![
        supermultiplicativity(table, slack),
        history_bound(table, slack),
    ];
    if table.spec().is_all_sum() {
        out.push(decomposition_bound(table, slack));
    }
    out.push(submultiplicative_transform(table, slack));
    out
}
