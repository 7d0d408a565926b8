//! Recurrence descriptions: terms, parsing, validation and derived constants.
//!
//! A recurrence has `s_0 = 1` and for `n >= 1`
//!
//! ```text
//! s_n = sum over terms i of  kappa_i * OP_i { s_{x_1} ... s_{x_l} : x_1 + ... + x_l = n - 1 }
//! ```
//!
//! where `OP_i` is either a sum or a max over the ordered compositions, `l`
//! is the term's arity and `kappa_i` its positive weight.
//!
//! The text format has one term per line, `<op> <arity> <weight>`, with `#`
//! starting a comment:
//!
//! ```text
//! # Schroeder numbers
//! sum 1 1
//! sum 2 1
//! ```

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::Deserialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numeric::ln_rational;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid JSON recurrence: {0}")]
    Json(String),
    #[error("recurrence has no terms")]
    Empty,
    #[error("term {term}: arity must be a positive integer")]
    NonPositiveArity { term: usize },
    #[error("term {term}: weight must be positive")]
    NonPositiveWeight { term: usize },
    #[error("no term with arity >= 2; the recurrence would be linear")]
    NoConvolutionTerm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Sum,
    Max,
}

impl Operator {
    pub fn keyword(self) -> &'static str {
        match self {
            Operator::Sum => "sum",
            Operator::Max => "max",
        }
    }
}

impl FromStr for Operator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Operator::Sum),
            "max" => Ok(Operator::Max),
            other => Err(format!(
                "unknown operator `{other}`, expected `sum` or `max`"
            )),
        }
    }
}

/// One summand of the recurrence: `weight * op{ product of arity values }`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Term {
    pub op: Operator,
    pub arity: usize,
    pub weight: BigRational,
}

impl Term {
    pub fn new(op: Operator, arity: usize, weight: BigRational) -> Self {
        Term { op, arity, weight }
    }

    pub fn sum(arity: usize, weight: impl Into<BigInt>) -> Self {
        Term::new(
            Operator::Sum,
            arity,
            BigRational::from_integer(weight.into()),
        )
    }

    pub fn max(arity: usize, weight: impl Into<BigInt>) -> Self {
        Term::new(
            Operator::Max,
            arity,
            BigRational::from_integer(weight.into()),
        )
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {}",
            self.op.keyword(),
            self.arity,
            format_rational(&self.weight)
        )
    }
}

/// A validated recurrence. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RecurrenceSpec {
    terms: Vec<Term>,
    max_arity: usize,
    kstar: BigRational,
}

impl RecurrenceSpec {
    pub fn new(terms: Vec<Term>) -> Result<Self, SpecError> {
        if terms.is_empty() {
            return Err(SpecError::Empty);
        }
        for (i, term) in terms.iter().enumerate() {
            if term.arity == 0 {
                return Err(SpecError::NonPositiveArity { term: i + 1 });
            }
            if !term.weight.is_positive() {
                return Err(SpecError::NonPositiveWeight { term: i + 1 });
            }
        }
        // Largest weight among the convolution terms: it raises the lower
        // bound and shrinks the upper bound's constants at the same time.
        let kstar = terms
            .iter()
            .filter(|t| t.arity >= 2)
            .map(|t| &t.weight)
            .max()
            .cloned()
            .ok_or(SpecError::NoConvolutionTerm)?;
        let max_arity = terms.iter().map(|t| t.arity).max().unwrap_or(0);
        Ok(RecurrenceSpec {
            terms,
            max_arity,
            kstar,
        })
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    /// Number of terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Largest arity over all terms.
    pub fn max_arity(&self) -> usize {
        self.max_arity
    }

    /// The weight used for the supermultiplicativity constant.
    pub fn kstar(&self) -> &BigRational {
        &self.kstar
    }

    pub fn sum_term_count(&self) -> usize {
        self.terms.iter().filter(|t| t.op == Operator::Sum).count()
    }

    pub fn is_all_sum(&self) -> bool {
        self.terms.iter().all(|t| t.op == Operator::Sum)
    }

    pub fn is_all_max(&self) -> bool {
        self.terms.iter().all(|t| t.op == Operator::Max)
    }

    /// `s_1`, the sum of all weights.
    pub fn first_value(&self) -> BigRational {
        self.terms
            .iter()
            .fold(BigRational::zero(), |acc, t| acc + &t.weight)
    }

    /// Least common multiple of the weight denominators.
    pub fn weight_denominator_lcm(&self) -> BigInt {
        self.terms
            .iter()
            .fold(BigInt::one(), |acc, t| acc.lcm(t.weight.denom()))
    }

    /// Renders the recurrence in the text format; `parse_spec` inverts it.
    pub fn render(&self) -> String {
        self.terms.iter().map(|t| format!("{t}\n")).collect()
    }

    /// Order-independent rendering used for cache identity.
    pub fn canonical_form(&self) -> String {
        let mut lines: Vec<(Operator, usize, &BigRational)> = self
            .terms
            .iter()
            .map(|t| (t.op, t.arity, &t.weight))
            .collect();
        lines.sort();
        lines
            .into_iter()
            .map(|(op, arity, w)| format!("{} {} {}\n", op.keyword(), arity, format_rational(w)))
            .collect()
    }

    /// SHA-256 of [`canonical_form`](Self::canonical_form).
    pub fn digest(&self) -> [u8; 32] {
        let out = Sha256::digest(self.canonical_form().as_bytes());
        let mut digest = [0u8; 32];
        digest.copy_from_slice(&out);
        digest
    }

    pub fn to_json(&self) -> serde_json::Value {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                serde_json::json!({
                    "op": t.op.keyword(),
                    "arity": t.arity,
                    "weight": format_rational(&t.weight),
                })
            })
            .collect::<Vec<_>>();
        serde_json::json!({ "terms": terms })
    }

    pub fn constants(&self) -> DerivedConstants {
        derive_constants(self)
    }
}

impl fmt::Display for RecurrenceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.terms.iter().map(|t| t.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

impl FromStr for RecurrenceSpec {
    type Err = SpecError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_spec(s)
    }
}

/// Constants shared by the bounds: `s_1`, `L`, `kappa*` and the logarithmic
/// factors of the upper bound.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedConstants {
    pub s1: BigRational,
    pub max_arity: usize,
    pub kstar: BigRational,
    /// `(L + 1) / L`.
    pub log_base: f64,
    /// `1 / ln((L + 1) / L)`; multiplying a natural log by this converts it
    /// to base `(L + 1) / L`.
    pub alpha: f64,
    /// `log_{(L+1)/L}(s_1 L^2 / kappa*)`.
    pub beta_prime: f64,
    pub ln_s1: f64,
    pub ln_kstar: f64,
}

pub fn derive_constants(spec: &RecurrenceSpec) -> DerivedConstants {
    let s1 = spec.first_value();
    let max_arity = spec.max_arity();
    let l = max_arity as f64;
    let alpha = 1.0 / (1.0 / l).ln_1p();
    let ln_s1 = ln_rational(&s1);
    let ln_kstar = ln_rational(spec.kstar());
    let beta_prime = alpha * (ln_s1 + 2.0 * l.ln() - ln_kstar);
    DerivedConstants {
        s1,
        max_arity,
        kstar: spec.kstar().clone(),
        log_base: (l + 1.0) / l,
        alpha,
        beta_prime,
        ln_s1,
        ln_kstar,
    }
}

/// Parses the line-oriented text format.
pub fn parse_spec(text: &str) -> Result<RecurrenceSpec, SpecError> {
    let mut terms = Vec::new();
    for (index, raw_line) in text.lines().enumerate() {
        let line_no = index + 1;
        let content = raw_line.split('#').next().unwrap_or("");
        let tokens = tokenize(content);
        if tokens.is_empty() {
            continue;
        }
        let syntax = |column: usize, message: String| SpecError::Syntax {
            line: line_no,
            column,
            message,
        };
        if tokens.len() != 3 {
            let column = tokens.get(3).map_or(tokens[0].0, |t| t.0);
            return Err(syntax(
                column,
                format!(
                    "expected `<op> <arity> <weight>`, found {} fields",
                    tokens.len()
                ),
            ));
        }
        let (op_col, op_text) = tokens[0];
        let op = op_text.parse::<Operator>().map_err(|m| syntax(op_col, m))?;

        let (ar_col, ar_text) = tokens[1];
        let arity = parse_arity(ar_text).map_err(|m| syntax(ar_col, m))?;
        if arity <= 0 {
            return Err(SpecError::NonPositiveArity {
                term: terms.len() + 1,
            });
        }

        let (w_col, w_text) = tokens[2];
        let weight = parse_rational(w_text).map_err(|m| syntax(w_col, m))?;
        terms.push(Term::new(op, arity as usize, weight));
    }
    RecurrenceSpec::new(terms)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDocument {
    terms: Vec<TermDocument>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TermDocument {
    op: String,
    arity: i64,
    weight: WeightDocument,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum WeightDocument {
    Number(serde_json::Number),
    Text(String),
}

/// Parses `{"terms":[{"op":"sum","arity":2,"weight":"3/2"}, ...]}`.
///
/// Numeric weights go through their shortest decimal representation, so
/// `0.1` becomes exactly `1/10`.
pub fn parse_spec_json(text: &str) -> Result<RecurrenceSpec, SpecError> {
    let doc: SpecDocument =
        serde_json::from_str(text).map_err(|e| SpecError::Json(e.to_string()))?;
    let mut terms = Vec::with_capacity(doc.terms.len());
    for (i, t) in doc.terms.into_iter().enumerate() {
        let op =
            t.op.parse::<Operator>()
                .map_err(|m| SpecError::Json(format!("term {}: {m}", i + 1)))?;
        if t.arity <= 0 {
            return Err(SpecError::NonPositiveArity { term: i + 1 });
        }
        let weight_text = match t.weight {
            WeightDocument::Number(n) => n.to_string(),
            WeightDocument::Text(s) => s,
        };
        let weight = parse_rational(weight_text.trim())
            .map_err(|m| SpecError::Json(format!("term {}: {m}", i + 1)))?;
        terms.push(Term::new(op, t.arity as usize, weight));
    }
    RecurrenceSpec::new(terms)
}

/// Accepts either format: JSON when the first non-blank character is `{`.
pub fn parse_any(text: &str) -> Result<RecurrenceSpec, SpecError> {
    if text.trim_start().starts_with('{') {
        parse_spec_json(text)
    } else {
        parse_spec(text)
    }
}

fn tokenize(line: &str) -> Vec<(usize, &str)> {
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in line.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s + 1, &line[s..i]));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        out.push((s + 1, &line[s..]));
    }
    out
}

fn parse_arity(text: &str) -> Result<i64, String> {
    let digits = text.strip_prefix(['+', '-']).unwrap_or(text);
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return Err(format!("arity `{text}` is not an integer"));
    }
    text.parse::<i64>()
        .map_err(|_| format!("arity `{text}` is out of range"))
}

/// Parses `p/q`, an integer, or a decimal with optional exponent, exactly.
pub fn parse_rational(text: &str) -> Result<BigRational, String> {
    if let Some((p, q)) = text.split_once('/') {
        let numer = parse_decimal(p)?;
        let denom = parse_decimal(q)?;
        if denom.is_zero() {
            return Err(format!("`{text}` has a zero denominator"));
        }
        return Ok(numer / denom);
    }
    parse_decimal(text)
}

fn parse_decimal(text: &str) -> Result<BigRational, String> {
    let bad = || format!("`{text}` is not a number");
    let (negative, body) = match text.as_bytes().first() {
        Some(b'-') => (true, &text[1..]),
        Some(b'+') => (false, &text[1..]),
        _ => (false, text),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => {
            let exp = body[pos + 1..].parse::<i32>().map_err(|_| bad())?;
            (&body[..pos], exp)
        }
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(bad());
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits = format!("{int_part}{frac_part}");
    let numer: BigInt = digits.parse().map_err(|_| bad())?;
    let scale = exponent - frac_part.len() as i32;
    let ten = BigInt::from(10);
    let mut value = BigRational::from_integer(numer);
    if scale >= 0 {
        value *= BigRational::from_integer(num_traits::pow(ten, scale as usize));
    } else {
        value /= BigRational::from_integer(num_traits::pow(ten, scale.unsigned_abs() as usize));
    }
    Ok(if negative { -value } else { value })
}

pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// Ready-made recurrences from the classical families.
pub mod catalog {
    use super::*;

    /// `C_n = sum C_i C_{n-1-i}`.
    pub fn catalan() -> RecurrenceSpec {
        RecurrenceSpec::new(vec![Term::sum(2, 1)]).expect("valid")
    }

    /// Large Schroeder numbers, `S_n = S_{n-1} + sum S_i S_{n-1-i}`.
    pub fn schroeder() -> RecurrenceSpec {
        RecurrenceSpec::new(vec![Term::sum(1, 1), Term::sum(2, 1)]).expect("valid")
    }

    /// Fuss-Catalan numbers with `k` folds.
    pub fn kfold(k: usize) -> Result<RecurrenceSpec, SpecError> {
        RecurrenceSpec::new(vec![Term::sum(k, 1)])
    }

    /// Five terms mixing sums of arity 2..4 with maxima of arity 5 and 6,
    /// each weighted by its arity.
    pub fn mixed_example() -> RecurrenceSpec {
        RecurrenceSpec::new(vec![
            Term::sum(2, 2),
            Term::sum(3, 3),
            Term::sum(4, 4),
            Term::max(5, 5),
            Term::max(6, 6),
        ])
        .expect("valid")
    }

    /// `s_n = 2 max s_a s_b`, so `s_n = 2^n`.
    pub fn doubling_max() -> RecurrenceSpec {
        RecurrenceSpec::new(vec![Term::max(2, 2)]).expect("valid")
    }
}
