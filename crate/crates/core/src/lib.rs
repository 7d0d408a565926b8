//! Evaluation and growth-rate bounds for recurrences built from mixed
//! sum/max multifold convolutions.
//!
//! With `s_0 = 1`, each term contributes `kappa * sum` (or `kappa * max`)
//! of `s_{x_1} ... s_{x_l}` over the compositions `x_1 + ... + x_l = n - 1`.
//! Catalan, large Schroeder and Fuss-Catalan numbers are the pure-sum cases.
//!
//! * [`recurrence`] parses and validates recurrences.
//! * [`numeric`] provides the exact and log-domain scalar backends.
//! * [`engine`] computes prefixes `s_0..s_N` in `O(L N^2)` and caches them.
//! * [`bounds`] turns a prefix into certified lower/upper bounds on
//!   `lim s_n^(1/n)` and refines them to a target ratio.
//! * [`oracle`] enumerates composition trees to cross-check the engine.
//! * [`checks`] verifies the structural inequalities on computed prefixes.
//!
//! ```
//! use convgrowth::{parse_spec, ExactScalar, SequenceTable};
//!
//! let spec = parse_spec("sum 2 1").unwrap();
//! let table = SequenceTable::<ExactScalar>::compute(&spec, 5).unwrap();
//! let values: Vec<String> = table.values().iter().map(|v| v.to_string()).collect();
//! assert_eq!(values.join(" "), "1 1 2 5 14 42");
//! ```

pub mod bounds;
pub mod checks;
pub mod engine;
pub mod numeric;
pub mod oracle;
pub mod recurrence;

pub use bounds::{
    bounds_report, known_rate_check, lower_bound_ln, lower_bound_shifted_ln, refine,
    upper_bound_ln, BoundEntry, BoundsError, BoundsReport, Budget, KnownRateCheck, KnownSequence,
    StopReason,
};
pub use engine::{EngineError, SequenceTable};
pub use numeric::{Domain, ExactScalar, LogScalar, NumericError, Scalar};
pub use oracle::{CompositionTree, OracleError, TreeEnumerator, TreeOracle};
pub use recurrence::{
    catalog, derive_constants, parse_any, parse_spec, parse_spec_json, DerivedConstants, Operator,
    RecurrenceSpec, SpecError, Term,
};
