//! Prefix evaluation of a recurrence.
//!
//! For every arity `j` that some term needs, the table keeps the `j`-fold
//! sum-convolution `c_j[m] = sum over x_1+..+x_j = m of prod s_{x_i}` and the
//! max-convolution `d_j[m]` (same with `max`). Both satisfy
//! `c_j[m] = sum_x s_x c_{j-1}[m-x]`, so each new index costs one pass per
//! rank and the whole prefix costs `O(L N^2)` scalar operations.
//!
//! Values are stored scaled by `D^n`, where `D` is the lcm of the weight
//! denominators: the scaled sequence obeys the same recurrence with the
//! integer weights `kappa_i D`, which keeps the exact backend on integers.

use std::collections::BTreeMap;
use std::fs;
use std::io;
use std::path::Path;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::numeric::{ln_rational, Domain, NumericError, Scalar};
use crate::recurrence::{Operator, RecurrenceSpec};

/// Default memory budget for one table.
pub const DEFAULT_MEMORY_CAP: usize = 8 << 30;

const CACHE_MAGIC: &[u8; 8] = b"CVGSEQ\0\x1a";
const CACHE_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("index {index} is beyond the computed prefix (N = {computed})")]
    OutOfRange { index: usize, computed: usize },
    #[error("cannot shrink a table from N = {current} to N = {requested}")]
    Shrink { current: usize, requested: usize },
    #[error("memory budget exceeded: extending to N = {requested} needs about {needed} bytes, cap is {cap}")]
    MemoryBudget {
        requested: usize,
        needed: usize,
        cap: usize,
    },
    #[error("cache was written for a different recurrence")]
    SpecMismatch,
    #[error("cache holds {found} values, expected {expected}")]
    DomainMismatch { found: Domain, expected: Domain },
    #[error("corrupt cache: {0}")]
    Corrupt(String),
    #[error("cache i/o: {0}")]
    Io(#[from] io::Error),
}

impl From<NumericError> for EngineError {
    fn from(e: NumericError) -> Self {
        EngineError::Corrupt(e.to_string())
    }
}

/// Term weights merged by arity, already multiplied by the common
/// denominator.
#[derive(Debug, Clone)]
struct FoldPlan<S> {
    sum_weights: Vec<(usize, S)>,
    max_weights: Vec<(usize, S)>,
    sum_ranks: usize,
    max_ranks: usize,
}

impl<S: Scalar> FoldPlan<S> {
    fn new(spec: &RecurrenceSpec, scale: &BigInt) -> Self {
        let mut merged: [BTreeMap<usize, BigRational>; 2] = Default::default();
        for term in spec.terms() {
            let slot = match term.op {
                Operator::Sum => &mut merged[0],
                Operator::Max => &mut merged[1],
            };
            // kappa_a * max P + kappa_b * max P = (kappa_a + kappa_b) * max P,
            // so both families merge additively.
            *slot.entry(term.arity).or_default() += &term.weight;
        }
        let scale = BigRational::from_integer(scale.clone());
        let [sums, maxes] = merged.map(|m| {
            m.into_iter()
                .map(|(arity, w)| (arity, S::from_rational(&(w * &scale))))
                .collect::<Vec<_>>()
        });
        let rank = |v: &[(usize, S)]| v.iter().map(|(a, _)| *a).max().unwrap_or(1).max(1);
        FoldPlan {
            sum_ranks: rank(&sums),
            max_ranks: rank(&maxes),
            sum_weights: sums,
            max_weights: maxes,
        }
    }
}

/// Convolution tables for ranks `2..=ranks`; rank 1 is the sequence itself.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldTables<S> {
    sum: Vec<Vec<S>>,
    max: Vec<Vec<S>>,
}

/// A computed prefix `s_0..=s_N` in one scalar domain.
#[derive(Debug, Clone)]
pub struct SequenceTable<S: Scalar> {
    spec: RecurrenceSpec,
    digest: [u8; 32],
    plan: FoldPlan<S>,
    scale: BigInt,
    ln_scale: f64,
    values: Vec<S>,
    folds: FoldTables<S>,
    memory_cap: usize,
    bytes: usize,
}

impl<S: Scalar> SequenceTable<S> {
    /// A table holding only `s_0 = 1`.
    pub fn new(spec: &RecurrenceSpec) -> Self {
        let scale = spec.weight_denominator_lcm();
        let plan = FoldPlan::new(spec, &scale);
        let folds = FoldTables {
            sum: vec![Vec::new(); plan.sum_ranks - 1],
            max: vec![Vec::new(); plan.max_ranks - 1],
        };
        let one = S::one();
        let bytes = one.heap_bytes();
        SequenceTable {
            digest: spec.digest(),
            spec: spec.clone(),
            ln_scale: ln_rational(&BigRational::from_integer(scale.clone())),
            scale,
            plan,
            values: vec![one],
            folds,
            memory_cap: DEFAULT_MEMORY_CAP,
            bytes,
        }
    }

    /// Builds and extends in one step.
    pub fn compute(spec: &RecurrenceSpec, n: usize) -> Result<Self, EngineError> {
        let mut table = Self::new(spec);
        table.extend(n)?;
        Ok(table)
    }

    pub fn with_memory_cap(mut self, cap: usize) -> Self {
        self.memory_cap = cap;
        self
    }

    pub fn set_memory_cap(&mut self, cap: usize) {
        self.memory_cap = cap;
    }

    pub fn spec(&self) -> &RecurrenceSpec {
        &self.spec
    }

    pub fn domain(&self) -> Domain {
        S::DOMAIN
    }

    /// Largest computed index.
    pub fn len_n(&self) -> usize {
        self.values.len() - 1
    }

    /// Approximate bytes held by values and fold tables.
    pub fn memory_bytes(&self) -> usize {
        self.bytes
    }

    /// Extends the prefix to `s_{new_n}`. On a memory-budget error the table
    /// is rolled back to the length it had on entry.
    pub fn extend(&mut self, new_n: usize) -> Result<(), EngineError> {
        let start_n = self.len_n();
        if new_n < start_n {
            return Err(EngineError::Shrink {
                current: start_n,
                requested: new_n,
            });
        }
        let start_bytes = self.bytes;
        for n in start_n + 1..=new_n {
            let added = self.push_next();
            self.bytes += added;
            if self.bytes > self.memory_cap {
                let needed = self.bytes;
                self.truncate(start_n);
                self.bytes = start_bytes;
                return Err(EngineError::MemoryBudget {
                    requested: n,
                    needed,
                    cap: self.memory_cap,
                });
            }
        }
        Ok(())
    }

    // Appends fold cells at m = n - 1 (ascending rank), then s_n.
    fn push_next(&mut self) -> usize {
        let m = self.values.len() - 1;
        let prefix = &self.values[..=m];
        let mut bytes = 0;
        for rank in 0..self.folds.sum.len() {
            let cell = {
                let lower = if rank == 0 {
                    prefix
                } else {
                    &self.folds.sum[rank - 1][..=m]
                };
                S::convolve_sum(prefix, lower)
            };
            bytes += cell.heap_bytes();
            self.folds.sum[rank].push(cell);
        }
        for rank in 0..self.folds.max.len() {
            let cell = {
                let lower = if rank == 0 {
                    prefix
                } else {
                    &self.folds.max[rank - 1][..=m]
                };
                S::convolve_max(prefix, lower)
            };
            bytes += cell.heap_bytes();
            self.folds.max[rank].push(cell);
        }
        let mut next = S::zero();
        for (arity, w) in &self.plan.sum_weights {
            let fold = if *arity == 1 {
                &self.values[m]
            } else {
                &self.folds.sum[arity - 2][m]
            };
            next = next.add(&w.mul(fold));
        }
        for (arity, w) in &self.plan.max_weights {
            let fold = if *arity == 1 {
                &self.values[m]
            } else {
                &self.folds.max[arity - 2][m]
            };
            next = next.add(&w.mul(fold));
        }
        bytes += next.heap_bytes();
        self.values.push(next);
        bytes
    }

    fn truncate(&mut self, n: usize) {
        self.values.truncate(n + 1);
        for col in self.folds.sum.iter_mut().chain(self.folds.max.iter_mut()) {
            col.truncate(n);
        }
    }

    /// A copy holding only `s_0..=s_n`, as if it had been computed to `n`.
    pub fn truncated(&self, n: usize) -> Result<Self, EngineError> {
        self.check_index(n)?;
        let mut copy = self.clone();
        copy.truncate(n);
        copy.bytes = copy
            .values
            .iter()
            .chain(copy.folds.sum.iter().flatten())
            .chain(copy.folds.max.iter().flatten())
            .map(Scalar::heap_bytes)
            .sum();
        Ok(copy)
    }

    fn check_index(&self, n: usize) -> Result<(), EngineError> {
        if n > self.len_n() {
            Err(EngineError::OutOfRange {
                index: n,
                computed: self.len_n(),
            })
        } else {
            Ok(())
        }
    }

    fn unscale(&self, raw: &S, n: usize) -> S {
        if self.scale.is_one() {
            raw.clone()
        } else {
            let factor = BigRational::new(BigInt::one(), Pow::pow(&self.scale, n));
            raw.mul(&S::from_rational(&factor))
        }
    }

    /// `s_n`.
    pub fn value(&self, n: usize) -> Result<S, EngineError> {
        self.check_index(n)?;
        Ok(self.unscale(&self.values[n], n))
    }

    /// `s_0..=s_N`.
    pub fn values(&self) -> Vec<S> {
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| self.unscale(v, n))
            .collect()
    }

    /// `ln s_n`.
    pub fn value_ln(&self, n: usize) -> Result<f64, EngineError> {
        self.check_index(n)?;
        Ok(self.values[n].ln() - n as f64 * self.ln_scale)
    }

    /// `ln s_0..=ln s_N`.
    pub fn values_ln(&self) -> Vec<f64> {
        self.values
            .iter()
            .enumerate()
            .map(|(n, v)| v.ln() - n as f64 * self.ln_scale)
            .collect()
    }

    /// `c_j[m]`; rank 1 is `s_m`. `None` when the rank is not tabulated or
    /// `m >= N`.
    pub fn sum_fold(&self, rank: usize, m: usize) -> Option<S> {
        self.fold(&self.folds.sum, rank, m)
    }

    /// `d_j[m]`; rank 1 is `s_m`.
    pub fn max_fold(&self, rank: usize, m: usize) -> Option<S> {
        self.fold(&self.folds.max, rank, m)
    }

    fn fold(&self, cols: &[Vec<S>], rank: usize, m: usize) -> Option<S> {
        let raw = match rank {
            0 => return None,
            1 => self.values.get(m)?,
            r => cols.get(r - 2)?.get(m)?,
        };
        Some(self.unscale(raw, m))
    }

    /// Highest tabulated ranks as `(sum, max)`.
    pub fn fold_ranks(&self) -> (usize, usize) {
        (self.plan.sum_ranks, self.plan.max_ranks)
    }

    /// Writes the table to `path` in the binary cache format.
    pub fn save_cache(&self, path: impl AsRef<Path>) -> Result<(), EngineError> {
        fs::write(path, self.encode_cache())?;
        Ok(())
    }

    /// Reads a table written by [`save_cache`](Self::save_cache) for the
    /// same recurrence and domain.
    pub fn load_cache(path: impl AsRef<Path>, spec: &RecurrenceSpec) -> Result<Self, EngineError> {
        let bytes = fs::read(path)?;
        Self::decode_cache(&bytes, spec)
    }

    /// Layout, little-endian throughout:
    ///
    /// ```text
    /// magic[8] version:u16 domain:u8 digest[32] n:u64 sum_ranks:u32 max_ranks:u32
    /// columns: values, then each sum fold, then each max fold;
    ///   each column is count:u64 followed by count x (len:u32, scalar bytes)
    /// sha256[32] over everything before it
    /// ```
    pub fn encode_cache(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(CACHE_MAGIC);
        out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
        out.push(S::DOMAIN.tag());
        out.extend_from_slice(&self.digest);
        out.extend_from_slice(&(self.len_n() as u64).to_le_bytes());
        out.extend_from_slice(&(self.plan.sum_ranks as u32).to_le_bytes());
        out.extend_from_slice(&(self.plan.max_ranks as u32).to_le_bytes());
        let columns = std::iter::once(&self.values)
            .chain(self.folds.sum.iter())
            .chain(self.folds.max.iter());
        let mut record = Vec::new();
        for col in columns {
            out.extend_from_slice(&(col.len() as u64).to_le_bytes());
            for v in col {
                record.clear();
                v.encode(&mut record);
                out.extend_from_slice(&(record.len() as u32).to_le_bytes());
                out.extend_from_slice(&record);
            }
        }
        let checksum = Sha256::digest(&out);
        out.extend_from_slice(&checksum);
        out
    }

    pub fn decode_cache(bytes: &[u8], spec: &RecurrenceSpec) -> Result<Self, EngineError> {
        let corrupt = |what: &str| EngineError::Corrupt(what.to_string());
        if bytes.len() < CACHE_MAGIC.len() + 32 {
            return Err(corrupt("file too short"));
        }
        let (body, checksum) = bytes.split_at(bytes.len() - 32);
        if Sha256::digest(body).as_slice() != checksum {
            return Err(corrupt("checksum mismatch"));
        }
        let mut input = body;
        if read(&mut input, 8)? != CACHE_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = u16::from_le_bytes(read(&mut input, 2)?.try_into().expect("2 bytes"));
        if version != CACHE_VERSION {
            return Err(EngineError::Corrupt(format!(
                "unsupported version {version}"
            )));
        }
        let tag = read(&mut input, 1)?[0];
        let found = Domain::from_tag(tag).ok_or_else(|| corrupt("unknown domain tag"))?;
        if found != S::DOMAIN {
            return Err(EngineError::DomainMismatch {
                found,
                expected: S::DOMAIN,
            });
        }
        if read(&mut input, 32)? != spec.digest() {
            return Err(EngineError::SpecMismatch);
        }
        let n = read_u64(&mut input)? as usize;
        let sum_ranks = read_u32(&mut input)? as usize;
        let max_ranks = read_u32(&mut input)? as usize;

        let mut table = Self::new(spec);
        if (sum_ranks, max_ranks) != (table.plan.sum_ranks, table.plan.max_ranks) {
            return Err(corrupt("fold ranks do not match the recurrence"));
        }
        let mut read_column = |expected: usize| -> Result<Vec<S>, EngineError> {
            let count = read_u64(&mut input)? as usize;
            if count != expected {
                return Err(corrupt("column length does not match N"));
            }
            let mut col = Vec::with_capacity(count);
            for _ in 0..count {
                let len = read_u32(&mut input)? as usize;
                let mut record = read(&mut input, len)?;
                col.push(S::decode(&mut record)?);
                if !record.is_empty() {
                    return Err(corrupt("trailing bytes in record"));
                }
            }
            Ok(col)
        };
        table.values = read_column(n + 1)?;
        for col in table.folds.sum.iter_mut() {
            *col = read_column(n)?;
        }
        for col in table.folds.max.iter_mut() {
            *col = read_column(n)?;
        }
        if !input.is_empty() {
            return Err(corrupt("trailing bytes"));
        }
        table.bytes = std::iter::once(&table.values)
            .chain(table.folds.sum.iter())
            .chain(table.folds.max.iter())
            .flatten()
            .map(Scalar::heap_bytes)
            .sum();
        Ok(table)
    }
}

impl<S: Scalar> PartialEq for SequenceTable<S> {
    fn eq(&self, other: &Self) -> bool {
        self.digest == other.digest && self.values == other.values && self.folds == other.folds
    }
}

fn read<'a>(input: &mut &'a [u8], len: usize) -> Result<&'a [u8], EngineError> {
    if input.len() < len {
        return Err(EngineError::Corrupt("truncated".to_string()));
    }
    let (head, tail) = input.split_at(len);
    *input = tail;
    Ok(head)
}

fn read_u64(input: &mut &[u8]) -> Result<u64, EngineError> {
    Ok(u64::from_le_bytes(
        read(input, 8)?.try_into().expect("8 bytes"),
    ))
}

fn read_u32(input: &mut &[u8]) -> Result<u32, EngineError> {
    Ok(u32::from_le_bytes(
        read(input, 4)?.try_into().expect("4 bytes"),
    ))
}
