use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::anyhow;
use convgrowth::checks;
use convgrowth::{
    bounds_report, known_rate_check, refine as refine_bounds, BoundsError, BoundsReport, Budget,
    EngineError, ExactScalar, KnownSequence, LogScalar, RecurrenceSpec, Scalar, SequenceTable,
    TreeOracle,
};
use serde_json::json;

use crate::output;
use crate::{
    BenchArgs, BoundsArgs, DomainArg, EvalArgs, Format, KnownArgs, KnownName, OracleArgs,
    RefineArgs, TableArgs,
};

/// A command failure with its process exit code. `error` is `None` when the
/// command already reported the failure on stdout.
pub struct Failure {
    pub code: u8,
    pub error: Option<anyhow::Error>,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 2,
            error: Some(error.into()),
        }
    }

    fn resource(error: impl Into<anyhow::Error>) -> Self {
        Failure {
            code: 3,
            error: Some(error.into()),
        }
    }

    fn check_failed() -> Self {
        Failure {
            code: 1,
            error: None,
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::OutOfRange { .. } | EngineError::Shrink { .. } => Failure::usage(e),
            _ => Failure::resource(e),
        }
    }
}

impl From<BoundsError> for Failure {
    fn from(e: BoundsError) -> Self {
        match e {
            BoundsError::Engine(inner) => inner.into(),
            other => Failure::usage(other),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn cache_path(spec: &RecurrenceSpec, args: &TableArgs) -> Option<PathBuf> {
    if let Some(path) = &args.cache {
        return Some(path.clone());
    }
    let dir = args.cache_dir.as_ref()?;
    let digest: String = spec.digest().iter().map(|b| format!("{b:02x}")).collect();
    let domain = match args.domain {
        DomainArg::Exact => "exact",
        DomainArg::Log => "log",
    };
    Some(dir.join(format!("{digest}.{domain}.cvg")))
}

/// Computes `s_0..=s_n`, resuming from and updating the cache when one is
/// configured.
fn table<S: Scalar>(
    spec: &RecurrenceSpec,
    n: usize,
    args: &TableArgs,
) -> Result<SequenceTable<S>, Failure> {
    let cap = args
        .memory_cap
        .unwrap_or(convgrowth::engine::DEFAULT_MEMORY_CAP);
    let path = cache_path(spec, args);
    let mut table = match &path {
        Some(p) if p.exists() => {
            let loaded = SequenceTable::<S>::load_cache(p, spec)?;
            log::info!("resumed N = {} from {}", loaded.len_n(), p.display());
            loaded
        }
        _ => SequenceTable::<S>::new(spec),
    };
    table.set_memory_cap(cap);
    if table.len_n() >= n {
        return Ok(table.truncated(n)?);
    }
    let started = Instant::now();
    table.extend(n)?;
    log::info!(
        "computed to N = {n} in {:.3}s",
        started.elapsed().as_secs_f64()
    );
    if let Some(p) = &path {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(Failure::resource)?;
        }
        table.save_cache(p)?;
        log::info!("wrote cache {}", p.display());
    }
    Ok(table)
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json values serialize")
    );
}

pub fn eval(args: EvalArgs) -> CmdResult {
    let spec = args.spec.load()?;
    match args.table.domain {
        DomainArg::Exact => {
            let values = table::<ExactScalar>(&spec, args.n, &args.table)?.values();
            match args.format {
                Format::Text => println!("{}", output::exact_text(&values)),
                Format::Json => print_json(&output::exact_json(&values)),
                Format::Csv => print!("{}", output::exact_csv(&values)),
                Format::Bfile => match output::exact_bfile(&values) {
                    Ok(text) => print!("{text}"),
                    Err(n) => {
                        return Err(Failure::usage(anyhow!(
                            "b-file output needs integer values, s_{n} = {} is not",
                            values[n]
                        )))
                    }
                },
            }
        }
        DomainArg::Log => {
            if args.format == Format::Bfile {
                return Err(Failure::usage(anyhow!(
                    "b-file output needs exact values; use --domain exact"
                )));
            }
            let ln_values = table::<LogScalar>(&spec, args.n, &args.table)?.values_ln();
            match args.format {
                Format::Text => print!("{}", output::log_text(&ln_values)),
                Format::Json => print_json(&output::log_json(&ln_values)),
                Format::Csv => print!("{}", output::log_csv(&ln_values)),
                Format::Bfile => unreachable!(),
            }
        }
    }
    Ok(())
}

fn emit_report(report: &BoundsReport, format: Format) -> CmdResult {
    match format {
        Format::Text => print!("{}", output::bounds_text(report)),
        Format::Json => print_json(&report.to_json()),
        Format::Csv => print!("{}", report.to_csv()),
        Format::Bfile => return Err(Failure::usage(anyhow!("b-file output is only for eval"))),
    }
    Ok(())
}

pub fn bounds(args: BoundsArgs) -> CmdResult {
    let spec = args.spec.load()?;
    let n = usize::try_from(args.n).map_err(Failure::usage)?;
    if args.format == Format::Bfile {
        return Err(Failure::usage(anyhow!("b-file output is only for eval")));
    }
    let report = match args.table.domain {
        DomainArg::Exact => bounds_report(&table::<ExactScalar>(&spec, n, &args.table)?, args.all)?,
        DomainArg::Log => bounds_report(&table::<LogScalar>(&spec, n, &args.table)?, args.all)?,
    };
    emit_report(&report, args.format)
}

pub fn refine(args: RefineArgs) -> CmdResult {
    let spec = args.spec.load()?;
    let max_time = match args.seconds {
        Some(s) if s.is_finite() && s >= 0.0 => Some(Duration::from_secs_f64(s)),
        Some(s) => {
            return Err(Failure::usage(anyhow!(
                "--seconds must be nonnegative, got {s}"
            )))
        }
        None => None,
    };
    let budget = Budget {
        max_n: args.max_n,
        max_time,
    };
    let report = refine_bounds(&spec, args.epsilon, budget)?;
    if !report.converged() {
        log::warn!(
            "budget exhausted before reaching ratio {}",
            1.0 + args.epsilon
        );
    }
    emit_report(&report, args.format)
}

/// One row of the oracle table.
struct OracleRow {
    n: usize,
    value: String,
    oracle_max: String,
    oracle_sum: String,
    relation: bool,
    direct: bool,
    lemma: bool,
    enumerated: Option<bool>,
}

impl OracleRow {
    fn passed(&self) -> bool {
        self.relation && self.direct && self.lemma && self.enumerated != Some(false)
    }
}

/// Largest tree count walked one tree at a time.
const ENUMERATION_LIMIT: u64 = 200_000;

pub fn oracle(args: OracleArgs) -> CmdResult {
    let spec = args.spec.load()?;
    let default_cap = convgrowth::oracle::DEFAULT_VERTEX_CAP;
    if args.max_n > default_cap && !args.allow_large {
        return Err(Failure::usage(anyhow!(
            "--max-n {} is above the default cap {default_cap}; pass --allow-large to run it",
            args.max_n
        )));
    }
    if args.format != Format::Text && args.format != Format::Json {
        return Err(Failure::usage(anyhow!("oracle output is text or json")));
    }
    let oracle = TreeOracle::new(&spec).with_cap(args.max_n.max(default_cap));
    let table = SequenceTable::<ExactScalar>::compute(&spec, args.max_n)?;
    // A single max term (after merging) makes s_n the heaviest tree; with
    // sum terms only it is the total over all trees; otherwise it lies
    // between the two.
    let single_max = spec.is_all_max() && {
        let mut arities: Vec<usize> = spec.terms().iter().map(|t| t.arity).collect();
        arities.sort_unstable();
        arities.dedup();
        arities.len() == 1
    };
    let mut rows = Vec::new();
    for n in 1..=args.max_n {
        let value = table.value(n)?.into_inner();
        let max = oracle.oracle_max(n).map_err(Failure::usage)?;
        let sum = oracle.oracle_sum(n).map_err(Failure::usage)?;
        let relation = if spec.is_all_sum() {
            value == sum
        } else if single_max {
            value == max
        } else {
            max <= value && value <= sum
        };
        let direct = oracle.direct_value(n).map_err(Failure::usage)? == value;
        let lemma = n < 2 || oracle.check_subtree_lemma(n).map_err(Failure::usage)?;
        let count = oracle.count(n).map_err(Failure::usage)?;
        let enumerated = match u64::try_from(count) {
            Ok(c) if c <= ENUMERATION_LIMIT => Some(
                oracle.enumerated_sum(n).map_err(Failure::usage)? == sum
                    && oracle.enumerated_max(n).map_err(Failure::usage)? == max,
            ),
            _ => None,
        };
        rows.push(OracleRow {
            n,
            value: convgrowth::recurrence::format_rational(&value),
            oracle_max: convgrowth::recurrence::format_rational(&max),
            oracle_sum: convgrowth::recurrence::format_rational(&sum),
            relation,
            direct,
            lemma,
            enumerated,
        });
    }
    let reports = checks::all_inequalities(&table, 0.0);
    let all_passed = rows.iter().all(OracleRow::passed) && reports.iter().all(|r| r.passed());

    let mark = |ok: bool| if ok { "ok" } else { "FAIL" };
    match args.format {
        Format::Json => print_json(&json!({
            "spec": spec.to_json(),
            "rows": rows.iter().map(|r| json!({
                "n": r.n,
                "s_n": r.value,
                "oracle_max": r.oracle_max,
                "oracle_sum": r.oracle_sum,
                "relation": r.relation,
                "direct": r.direct,
                "subtree_lemma": r.lemma,
                "enumerated": r.enumerated,
                "passed": r.passed(),
            })).collect::<Vec<_>>(),
            "inequalities": reports.iter().map(|r| json!({
                "name": r.name,
                "checked": r.checked,
                "violations": r.violations,
            })).collect::<Vec<_>>(),
            "passed": all_passed,
        })),
        _ => {
            let mut out = format!("recurrence: {spec}\n");
            let _ = writeln!(
                out,
                "{:>3}  {:>20}  {:>20}  {:>20}  {:>8}  {:>6}  {:>6}  {:>10}  result",
                "n", "s_n", "oracle_max", "oracle_sum", "relation", "direct", "lemma", "enumerated"
            );
            for r in &rows {
                let _ = writeln!(
                    out,
                    "{:>3}  {:>20}  {:>20}  {:>20}  {:>8}  {:>6}  {:>6}  {:>10}  {}",
                    r.n,
                    r.value,
                    r.oracle_max,
                    r.oracle_sum,
                    mark(r.relation),
                    mark(r.direct),
                    mark(r.lemma),
                    r.enumerated.map_or("skipped", mark),
                    if r.passed() { "PASS" } else { "FAIL" }
                );
            }
            for r in &reports {
                let _ = writeln!(
                    out,
                    "{}: {} checked, {} violations: {}",
                    r.name,
                    r.checked,
                    r.violations,
                    if r.passed() { "PASS" } else { "FAIL" }
                );
            }
            let _ = writeln!(out, "oracle: {}", if all_passed { "PASS" } else { "FAIL" });
            print!("{out}");
        }
    }
    if all_passed {
        Ok(())
    } else {
        Err(Failure::check_failed())
    }
}

pub fn known(args: KnownArgs) -> CmdResult {
    let sequences = match args.name {
        KnownName::Catalan => vec![KnownSequence::Catalan],
        KnownName::Schroeder => vec![KnownSequence::Schroeder],
        KnownName::Kfold => vec![KnownSequence::KFold(args.k)],
        KnownName::All => vec![
            KnownSequence::Catalan,
            KnownSequence::Schroeder,
            KnownSequence::KFold(args.k),
        ],
    };
    let mut all_inside = true;
    for sequence in sequences {
        let check = known_rate_check(sequence, args.epsilon, Budget::max_n(args.max_n))?;
        all_inside &= check.inside;
        println!("{}", check.summary());
    }
    if all_inside {
        Ok(())
    } else {
        Err(Failure::check_failed())
    }
}

fn time_extend<S: Scalar>(
    spec: &RecurrenceSpec,
    n: usize,
    repeats: usize,
) -> Result<Duration, Failure> {
    let mut best = Duration::MAX;
    for _ in 0..repeats.max(1) {
        let started = Instant::now();
        let table = SequenceTable::<S>::compute(spec, n)?;
        best = best.min(started.elapsed());
        std::hint::black_box(table.len_n());
    }
    Ok(best)
}

pub fn bench(args: BenchArgs) -> CmdResult {
    let spec = args.spec.load()?;
    if args.n == 0 {
        return Err(Failure::usage(anyhow!("--n must be positive")));
    }
    let timings = match args.domain {
        DomainArg::Exact => (
            time_extend::<ExactScalar>(&spec, args.n, args.repeats)?,
            time_extend::<ExactScalar>(&spec, 2 * args.n, args.repeats)?,
        ),
        DomainArg::Log => (
            time_extend::<LogScalar>(&spec, args.n, args.repeats)?,
            time_extend::<LogScalar>(&spec, 2 * args.n, args.repeats)?,
        ),
    };
    let (small, large) = (timings.0.as_secs_f64(), timings.1.as_secs_f64());
    let ratio = large / small;
    let exponent = ratio.log2();
    if !(3.2..=5.0).contains(&ratio) {
        log::warn!("t(2N)/t(N) = {ratio:.2} is outside the expected [3.2, 5.0]");
    }
    match args.format {
        Format::Json => print_json(&json!({
            "n": args.n,
            "seconds_n": small,
            "seconds_2n": large,
            "ratio": ratio,
            "exponent": exponent,
        })),
        Format::Text => println!(
            "t({}) = {:.3} ms, t({}) = {:.3} ms, ratio {ratio:.3}, scaling exponent {exponent:.3}",
            args.n,
            small * 1e3,
            2 * args.n,
            large * 1e3
        ),
        _ => return Err(Failure::usage(anyhow!("bench output is text or json"))),
    }
    Ok(())
}
