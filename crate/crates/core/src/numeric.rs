//! Scalar domains for sequence values.
//!
//! Two backends share the [`Scalar`] contract: [`ExactScalar`] is a big
//! rational that never rounds, [`LogScalar`] stores the natural logarithm of
//! a nonnegative real so values far beyond `f64::MAX` stay representable.
//! The sequence engine and the inequality checks are written once against the
//! trait.

use std::cmp::Ordering;
use std::f64::consts::LN_2;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericError {
    #[error("logarithm of zero is undefined")]
    LogOfZero,
    #[error("root index must be positive")]
    ZeroRootIndex,
    #[error("truncated scalar record")]
    Truncated,
    #[error("malformed scalar record: {0}")]
    Malformed(&'static str),
}

/// Which backend a table or cache file was computed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    Exact,
    Log,
}

impl Domain {
    pub fn tag(self) -> u8 {
        match self {
            Domain::Exact => 0,
            Domain::Log => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Domain> {
        match tag {
            0 => Some(Domain::Exact),
            1 => Some(Domain::Log),
            _ => None,
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Exact => "exact",
            Domain::Log => "log",
        })
    }
}

/// Arithmetic contract shared by both backends. All values are nonnegative.
pub trait Scalar: Clone + fmt::Debug + PartialEq + Send + Sync + 'static {
    const DOMAIN: Domain;

    fn zero() -> Self;
    fn one() -> Self;
    fn from_rational(q: &BigRational) -> Self;

    fn add(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn max_of(&self, other: &Self) -> Self;

    fn is_zero(&self) -> bool;

    /// Natural logarithm as a double; `-inf` for zero.
    fn ln(&self) -> f64;

    /// `ln(self) / n`, the log of the `n`-th root.
    fn nth_root_ln(&self, n: u64) -> Result<f64, NumericError> {
        if n == 0 {
            return Err(NumericError::ZeroRootIndex);
        }
        if self.is_zero() {
            return Err(NumericError::LogOfZero);
        }
        Ok(self.ln() / n as f64)
    }

    /// `self <= other`. The exact backend ignores `slack`; the log backend
    /// accepts `ln self <= ln other + slack * max(1, |ln other|)`.
    fn approx_le(&self, other: &Self, slack: f64) -> bool;

    /// Convolution cell `sum_x a[x] * b[len - 1 - x]` over equal-length slices.
    fn convolve_sum(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b.iter().rev())
            .fold(Self::zero(), |acc, (x, y)| acc.add(&x.mul(y)))
    }

    /// Max-convolution cell `max_x a[x] * b[len - 1 - x]`.
    fn convolve_max(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        a.iter()
            .zip(b.iter().rev())
            .fold(Self::zero(), |acc, (x, y)| acc.max_of(&x.mul(y)))
    }

    fn encode(&self, out: &mut Vec<u8>);
    fn decode(input: &mut &[u8]) -> Result<Self, NumericError>;

    /// Rough heap footprint, used for the engine's memory budget.
    fn heap_bytes(&self) -> usize;
}

/// `ln x` for an arbitrarily large unsigned integer, from its top 64 bits.
pub fn ln_biguint(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits == 0 {
        return f64::NEG_INFINITY;
    }
    if bits <= 64 {
        return x.to_u64().map_or(f64::NAN, |v| (v as f64).ln());
    }
    let shift = bits - 64;
    let top = (x >> shift).to_u64().unwrap_or(u64::MAX);
    (top as f64).ln() + shift as f64 * LN_2
}

/// `ln q` for a nonnegative rational; `-inf` for zero, NaN for negatives.
pub fn ln_rational(q: &BigRational) -> f64 {
    if q.is_negative() {
        return f64::NAN;
    }
    ln_biguint(q.numer().magnitude()) - ln_biguint(q.denom().magnitude())
}

/// Stable `ln(e^a + e^b)`.
#[inline]
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// Loss-free nonnegative rational.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ExactScalar(BigRational);

impl ExactScalar {
    pub fn new(value: BigRational) -> Self {
        ExactScalar(value)
    }

    pub fn from_integer(value: impl Into<BigInt>) -> Self {
        ExactScalar(BigRational::from_integer(value.into()))
    }

    pub fn value(&self) -> &BigRational {
        &self.0
    }

    pub fn into_inner(self) -> BigRational {
        self.0
    }

    pub fn is_integer(&self) -> bool {
        self.0.denom().is_one()
    }
}

impl fmt::Display for ExactScalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_integer() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl PartialOrd for ExactScalar {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExactScalar {
    fn cmp(&self, other: &Self) -> Ordering {
        if self.is_integer() && other.is_integer() {
            self.0.numer().cmp(other.0.numer())
        } else {
            self.0.cmp(&other.0)
        }
    }
}

// num-rational reduces after every operation and its binary gcd is
// quadratic in the bit length even against a denominator of one, so the
// integer case bypasses normalisation entirely.
impl Scalar for ExactScalar {
    const DOMAIN: Domain = Domain::Exact;

    fn zero() -> Self {
        ExactScalar(BigRational::zero())
    }

    fn one() -> Self {
        ExactScalar(BigRational::one())
    }

    fn from_rational(q: &BigRational) -> Self {
        ExactScalar(q.clone())
    }

    fn add(&self, other: &Self) -> Self {
        if self.is_integer() && other.is_integer() {
            ExactScalar(BigRational::new_raw(
                self.0.numer() + other.0.numer(),
                BigInt::one(),
            ))
        } else {
            ExactScalar(&self.0 + &other.0)
        }
    }

    fn mul(&self, other: &Self) -> Self {
        if self.is_integer() && other.is_integer() {
            ExactScalar(BigRational::new_raw(
                self.0.numer() * other.0.numer(),
                BigInt::one(),
            ))
        } else {
            ExactScalar(&self.0 * &other.0)
        }
    }

    fn max_of(&self, other: &Self) -> Self {
        if other > self {
            other.clone()
        } else {
            self.clone()
        }
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    fn ln(&self) -> f64 {
        ln_rational(&self.0)
    }

    fn approx_le(&self, other: &Self, _slack: f64) -> bool {
        self <= other
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.push(u8::from(self.0.is_negative()));
        for part in [self.0.numer(), self.0.denom()] {
            let bytes = part.magnitude().to_bytes_le();
            out.extend_from_slice(&(bytes.len() as u64).to_le_bytes());
            out.extend_from_slice(&bytes);
        }
    }

    fn decode(input: &mut &[u8]) -> Result<Self, NumericError> {
        let sign = take(input, 1)?[0];
        let sign = match sign {
            0 => Sign::Plus,
            1 => Sign::Minus,
            _ => return Err(NumericError::Malformed("sign byte")),
        };
        let mut parts = [BigUint::zero(), BigUint::zero()];
        for part in parts.iter_mut() {
            let len = u64::from_le_bytes(take(input, 8)?.try_into().expect("8 bytes"));
            let len = usize::try_from(len).map_err(|_| NumericError::Truncated)?;
            *part = BigUint::from_bytes_le(take(input, len)?);
        }
        let [numer, denom] = parts;
        if denom.is_zero() {
            return Err(NumericError::Malformed("zero denominator"));
        }
        Ok(ExactScalar(BigRational::new_raw(
            BigInt::from_biguint(sign, numer),
            BigInt::from_biguint(Sign::Plus, denom),
        )))
    }

    fn heap_bytes(&self) -> usize {
        let bits = self.0.numer().bits() + self.0.denom().bits();
        std::mem::size_of::<Self>() + (bits / 8) as usize
    }
}

/// Nonnegative real stored as its natural logarithm; zero is `-inf`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogScalar(f64);

impl LogScalar {
    pub fn from_ln(ln_value: f64) -> Self {
        LogScalar(ln_value)
    }

    pub fn ln_value(self) -> f64 {
        self.0
    }
}

impl Scalar for LogScalar {
    const DOMAIN: Domain = Domain::Log;

    fn zero() -> Self {
        LogScalar(f64::NEG_INFINITY)
    }

    fn one() -> Self {
        LogScalar(0.0)
    }

    fn from_rational(q: &BigRational) -> Self {
        LogScalar(ln_rational(q))
    }

    fn add(&self, other: &Self) -> Self {
        LogScalar(log_add_exp(self.0, other.0))
    }

    fn mul(&self, other: &Self) -> Self {
        // -inf + finite stays -inf, which is the absorbing zero.
        LogScalar(self.0 + other.0)
    }

    fn max_of(&self, other: &Self) -> Self {
        LogScalar(self.0.max(other.0))
    }

    fn is_zero(&self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    fn ln(&self) -> f64 {
        self.0
    }

    fn approx_le(&self, other: &Self, slack: f64) -> bool {
        self.0 <= other.0 + slack * other.0.abs().max(1.0)
    }

    // Two passes: find the largest product, then sum exp(p - max) once.
    // One exp per term instead of the exp + ln_1p of pairwise log-add-exp.
    fn convolve_sum(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        let peak = a
            .iter()
            .zip(b.iter().rev())
            .map(|(x, y)| x.0 + y.0)
            .fold(f64::NEG_INFINITY, f64::max);
        if peak == f64::NEG_INFINITY {
            return Self::zero();
        }
        let total: f64 = a
            .iter()
            .zip(b.iter().rev())
            .map(|(x, y)| (x.0 + y.0 - peak).exp())
            .sum();
        LogScalar(peak + total.ln())
    }

    fn convolve_max(a: &[Self], b: &[Self]) -> Self {
        debug_assert_eq!(a.len(), b.len());
        LogScalar(
            a.iter()
                .zip(b.iter().rev())
                .map(|(x, y)| x.0 + y.0)
                .fold(f64::NEG_INFINITY, f64::max),
        )
    }

    fn encode(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.0.to_bits().to_le_bytes());
    }

    fn decode(input: &mut &[u8]) -> Result<Self, NumericError> {
        let raw = take(input, 8)?;
        Ok(LogScalar(f64::from_bits(u64::from_le_bytes(
            raw.try_into().expect("8 bytes"),
        ))))
    }

    fn heap_bytes(&self) -> usize {
        std::mem::size_of::<Self>()
    }
}

fn take<'a>(input: &mut &'a [u8], len: usize) -> Result<&'a [u8], NumericError> {
    if input.len() < len {
        return Err(NumericError::Truncated);
    }
    let (head, tail) = input.split_at(len);
    *input = tail;
    Ok(head)
}
