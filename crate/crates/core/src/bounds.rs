//! Two-sided bounds on the growth rate `lambda = lim s_n^(1/n)`.
//!
//! For every `n >= 2`, with `L` the largest arity and logarithms taken to
//! base `(L+1)/L`:
//!
//! ```text
//! (kappa* s_n / (L (n-1) s_1))^(1/n)  <=  lambda
//! lambda  <=  (3^A n^B(n) s_n)^(1/n)
//!     A    = 18 log 3 + 2 log(s_1 L^2 / kappa*)
//!     B(n) = 3 log n + 12 log 3 + log(s_1 L^2 / kappa*)
//! ```
//!
//! and additionally `lambda >= (kappa* s_{n-1})^(1/n)` for every `n >= 1`.
//! Everything here works with natural logs of the bounds, so the huge
//! prefactors never leave double range.

use std::time::{Duration, Instant};

use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use crate::engine::{EngineError, SequenceTable};
use crate::numeric::{LogScalar, Scalar};
use crate::recurrence::{catalog, DerivedConstants, RecurrenceSpec, SpecError};

pub const DEFAULT_EPSILON: f64 = 0.25;
pub const DEFAULT_MAX_N: usize = 1 << 14;

#[derive(Debug, Error)]
pub enum BoundsError {
    #[error("bound needs {min} <= n <= {max}, got n = {n}")]
    OutOfRange { n: usize, min: usize, max: usize },
    #[error("epsilon must be positive and finite, got {0}")]
    BadEpsilon(f64),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Spec(#[from] SpecError),
}

fn require(n: usize, min: usize, max: usize) -> Result<(), BoundsError> {
    if n < min || n > max {
        Err(BoundsError::OutOfRange { n, min, max })
    } else {
        Ok(())
    }
}

/// `ln` of the lower bound `(kappa* s_n / (L (n-1) s_1))^(1/n)`, `n >= 2`.
pub fn lower_bound_ln<S: Scalar>(
    table: &SequenceTable<S>,
    constants: &DerivedConstants,
    n: usize,
) -> Result<f64, BoundsError> {
    require(n, 2, table.len_n())?;
    Ok(lower_from_ln(constants, n, table.value_ln(n)?))
}

/// `ln` of `(kappa* s_{n-1})^(1/n)`, valid for `1 <= n <= N + 1`.
pub fn lower_bound_shifted_ln<S: Scalar>(
    table: &SequenceTable<S>,
    constants: &DerivedConstants,
    n: usize,
) -> Result<f64, BoundsError> {
    require(n, 1, table.len_n() + 1)?;
    Ok(shifted_from_ln(constants, n, table.value_ln(n - 1)?))
}

/// `ln` of the upper bound `(3^A n^B(n) s_n)^(1/n)`, `n >= 2`.
pub fn upper_bound_ln<S: Scalar>(
    table: &SequenceTable<S>,
    constants: &DerivedConstants,
    n: usize,
) -> Result<f64, BoundsError> {
    require(n, 2, table.len_n())?;
    Ok(upper_from_ln(constants, n, table.value_ln(n)?))
}

fn lower_from_ln(c: &DerivedConstants, n: usize, ln_sn: f64) -> f64 {
    let denom = (c.max_arity as f64 * (n - 1) as f64).ln() + c.ln_s1;
    (c.ln_kstar - denom + ln_sn) / n as f64
}

fn shifted_from_ln(c: &DerivedConstants, n: usize, ln_prev: f64) -> f64 {
    (c.ln_kstar + ln_prev) / n as f64
}

fn upper_from_ln(c: &DerivedConstants, n: usize, ln_sn: f64) -> f64 {
    let ln_n = (n as f64).ln();
    let ln3 = 3f64.ln();
    (upper_exponent_of_three(c) * ln3 + upper_exponent_of_n(c, n) * ln_n + ln_sn) / n as f64
}

/// `A = 18 alpha ln 3 + 2 beta'`, the exponent of 3 in the upper bound.
pub fn upper_exponent_of_three(c: &DerivedConstants) -> f64 {
    18.0 * c.alpha * 3f64.ln() + 2.0 * c.beta_prime
}

/// `B(n) = 3 alpha ln n + 12 alpha ln 3 + beta'`, the exponent of `n`.
pub fn upper_exponent_of_n(c: &DerivedConstants, n: usize) -> f64 {
    3.0 * c.alpha * (n as f64).ln() + 12.0 * c.alpha * 3f64.ln() + c.beta_prime
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundEntry {
    pub n: usize,
    pub ln_lower: f64,
    pub ln_upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Ratio reached `1 + epsilon`.
    Converged,
    /// Hit the index cap.
    MaxN,
    /// Hit the wall-clock cap.
    TimeLimit,
    /// Evaluated at a fixed `N` with no target.
    Fixed,
}

/// Per-`n` bounds plus the running envelope over everything evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub spec: RecurrenceSpec,
    pub epsilon: Option<f64>,
    pub entries: Vec<BoundEntry>,
    /// Max over all evaluated lower bounds of either form.
    pub best_ln_lower: f64,
    /// Min over all evaluated upper bounds.
    pub best_ln_upper: f64,
    /// Largest index the envelope covers.
    pub max_n: usize,
    pub stop: StopReason,
}

impl BoundsReport {
    fn empty(spec: &RecurrenceSpec, epsilon: Option<f64>) -> Self {
        BoundsReport {
            spec: spec.clone(),
            epsilon,
            entries: Vec::new(),
            best_ln_lower: f64::NEG_INFINITY,
            best_ln_upper: f64::INFINITY,
            max_n: 0,
            stop: StopReason::Fixed,
        }
    }

    pub fn ratio(&self) -> f64 {
        (self.best_ln_upper - self.best_ln_lower).exp()
    }

    pub fn lower(&self) -> f64 {
        self.best_ln_lower.exp()
    }

    pub fn upper(&self) -> f64 {
        self.best_ln_upper.exp()
    }

    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn contains(&self, rate: f64) -> bool {
        let ln = rate.ln();
        self.best_ln_lower <= ln && ln <= self.best_ln_upper
    }

    /// Folds indices `from..=to` of `table` into the envelope. The shifted
    /// lower bound also uses `n = to + 1`, which only needs `s_to`.
    fn absorb<S: Scalar>(
        &mut self,
        table: &SequenceTable<S>,
        constants: &DerivedConstants,
        from: usize,
        to: usize,
    ) -> Result<(), BoundsError> {
        for n in from.max(1)..=to + 1 {
            let shifted = lower_bound_shifted_ln(table, constants, n)?;
            self.best_ln_lower = self.best_ln_lower.max(shifted);
            if (2..=to).contains(&n) {
                let ln_sn = table.value_ln(n)?;
                self.best_ln_lower = self.best_ln_lower.max(lower_from_ln(constants, n, ln_sn));
                self.best_ln_upper = self.best_ln_upper.min(upper_from_ln(constants, n, ln_sn));
            }
        }
        self.max_n = self.max_n.max(to);
        Ok(())
    }

    fn record<S: Scalar>(
        &mut self,
        table: &SequenceTable<S>,
        constants: &DerivedConstants,
        n: usize,
    ) -> Result<(), BoundsError> {
        if self.entries.last().is_some_and(|e| e.n == n) {
            return Ok(());
        }
        self.entries.push(BoundEntry {
            n,
            ln_lower: lower_bound_ln(table, constants, n)?,
            ln_upper: upper_bound_ln(table, constants, n)?,
        });
        Ok(())
    }

    /// JSON document with every value as both a natural log and a decimal,
    /// rounded to 12 significant digits.
    pub fn to_json(&self) -> Value {
        let entries: Vec<Value> = self
            .entries
            .iter()
            .map(|e| {
                json!({
                    "n": e.n,
                    "ln_lower": round12(e.ln_lower),
                    "ln_upper": round12(e.ln_upper),
                    "lower": round12(e.ln_lower.exp()),
                    "upper": round12(e.ln_upper.exp()),
                })
            })
            .collect();
        json!({
            "spec": self.spec.to_json(),
            "epsilon": self.epsilon,
            "entries": entries,
            "best": {
                "ln_lower": round12(self.best_ln_lower),
                "ln_upper": round12(self.best_ln_upper),
                "lower": round12(self.lower()),
                "upper": round12(self.upper()),
                "ratio": round12(self.ratio()),
            },
            "max_n": self.max_n,
            "stop": self.stop,
            "converged": self.converged(),
        })
    }

    /// Rows `n, ln_lower, ln_upper, lower, upper, ratio`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,ln_lower,ln_upper,lower,upper,ratio\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                e.n,
                round12(e.ln_lower),
                round12(e.ln_upper),
                round12(e.ln_lower.exp()),
                round12(e.ln_upper.exp()),
                round12((e.ln_upper - e.ln_lower).exp()),
            ));
        }
        out
    }
}

/// Rounds to 12 significant digits so tiny floating-point noise does not
/// leak into reports.
pub fn round12(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{x:.11e}").parse().unwrap_or(x)
}

/// Bounds over a computed prefix: the envelope covers every `n <= N`,
/// entries are recorded at powers of two and at `N` (or at every `n` when
/// `every_n` is set).
pub fn bounds_report<S: Scalar>(
    table: &SequenceTable<S>,
    every_n: bool,
) -> Result<BoundsReport, BoundsError> {
    let big_n = table.len_n();
    require(big_n, 2, usize::MAX)?;
    let constants = table.spec().constants();
    let mut report = BoundsReport::empty(table.spec(), None);
    report.absorb(table, &constants, 1, big_n)?;
    if every_n {
        for n in 2..=big_n {
            report.record(table, &constants, n)?;
        }
    } else {
        let mut n = 2;
        while n < big_n {
            report.record(table, &constants, n)?;
            n *= 2;
        }
        report.record(table, &constants, big_n)?;
    }
    Ok(report)
}

/// Caps for [`refine`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Budget {
    pub max_n: usize,
    pub max_time: Option<Duration>,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            max_n: DEFAULT_MAX_N,
            max_time: None,
        }
    }
}

impl Budget {
    pub fn max_n(max_n: usize) -> Self {
        Budget {
            max_n,
            max_time: None,
        }
    }
}

/// Doubles `N` from 2 until the sandwich ratio drops to `1 + epsilon` or
/// the budget runs out. Running out is reported, not raised.
pub fn refine(
    spec: &RecurrenceSpec,
    epsilon: f64,
    budget: Budget,
) -> Result<BoundsReport, BoundsError> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(BoundsError::BadEpsilon(epsilon));
    }
    let started = Instant::now();
    let max_n = budget.max_n.max(2);
    let constants = spec.constants();
    let mut table = SequenceTable::<LogScalar>::new(spec);
    let mut report = BoundsReport::empty(spec, Some(epsilon));
    let target = epsilon.ln_1p();
    let mut n = 2;
    loop {
        let previous = table.len_n();
        table.extend(n)?;
        report.absorb(&table, &constants, previous + 1, n)?;
        report.record(&table, &constants, n)?;
        log::debug!(
            "refine N={n}: lower={:.6} upper={:.6} ratio={:.6}",
            report.lower(),
            report.upper(),
            report.ratio()
        );
        if report.best_ln_upper - report.best_ln_lower <= target {
            report.stop = StopReason::Converged;
            break;
        }
        if n >= max_n {
            report.stop = StopReason::MaxN;
            break;
        }
        if budget.max_time.is_some_and(|t| started.elapsed() >= t) {
            report.stop = StopReason::TimeLimit;
            break;
        }
        n = (n * 2).min(max_n);
    }
    Ok(report)
}

/// Classical sequences with known growth rates, used as fixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KnownSequence {
    Catalan,
    Schroeder,
    /// Fuss-Catalan numbers with `k >= 2` folds.
    KFold(usize),
}

impl KnownSequence {
    pub fn spec(self) -> Result<RecurrenceSpec, SpecError> {
        match self {
            KnownSequence::Catalan => Ok(catalog::catalan()),
            KnownSequence::Schroeder => Ok(catalog::schroeder()),
            KnownSequence::KFold(k) => catalog::kfold(k),
        }
    }

    /// `4`, `3 + 2 sqrt 2`, and `k^k / (k-1)^(k-1)`.
    pub fn growth_rate(self) -> f64 {
        match self {
            KnownSequence::Catalan => 4.0,
            KnownSequence::Schroeder => 3.0 + 2.0 * 2f64.sqrt(),
            KnownSequence::KFold(k) => {
                let k = k as f64;
                (k * k.ln() - (k - 1.0) * (k - 1.0).ln()).exp()
            }
        }
    }

    pub fn name(self) -> String {
        match self {
            KnownSequence::Catalan => "catalan".to_string(),
            KnownSequence::Schroeder => "schroeder".to_string(),
            KnownSequence::KFold(k) => format!("kfold({k})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownRateCheck {
    pub sequence: KnownSequence,
    pub known_rate: f64,
    pub inside: bool,
    pub report: BoundsReport,
}

impl KnownRateCheck {
    pub fn summary(&self) -> String {
        format!(
            "{}: {:.6} inside [{:.6}, {:.6}] (ratio {:.4}, N = {}): {}",
            self.sequence.name(),
            self.known_rate,
            self.report.lower(),
            self.report.upper(),
            self.report.ratio(),
            self.report.max_n,
            if self.inside { "PASS" } else { "FAIL" }
        )
    }
}

/// Runs [`refine`] on a known sequence and checks its rate is bracketed.
pub fn known_rate_check(
    sequence: KnownSequence,
    epsilon: f64,
    budget: Budget,
) -> Result<KnownRateCheck, BoundsError> {
    let spec = sequence.spec()?;
    let report = refine(&spec, epsilon, budget)?;
    let known_rate = sequence.growth_rate();
    Ok(KnownRateCheck {
        sequence,
        known_rate,
        inside: report.contains(known_rate),
        report,
    })
}
