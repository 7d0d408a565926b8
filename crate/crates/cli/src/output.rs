use convgrowth::bounds::round12;
use convgrowth::{BoundsReport, ExactScalar};
use serde_json::{json, Value};

/// `x = e^ln` in scientific notation with 12 significant digits, without
/// overflowing for huge `ln`.
pub fn decimal_from_ln(ln: f64) -> String {
    if ln == f64::NEG_INFINITY {
        return "0".to_string();
    }
    let log10 = ln / std::f64::consts::LN_10;
    let mut exponent = log10.floor();
    let mut mantissa = 10f64.powf(log10 - exponent);
    if mantissa >= 9.999_999_999_995 {
        mantissa /= 10.0;
        exponent += 1.0;
    }
    format!("{mantissa:.11}e{exponent}")
}

pub fn exact_text(values: &[ExactScalar]) -> String {
    let parts: Vec<String> = values.iter().map(ToString::to_string).collect();
    parts.join(" ")
}

pub fn exact_json(values: &[ExactScalar]) -> Value {
    json!({
        "domain": "exact",
        "n": values.len() - 1,
        "values": values.iter().map(ToString::to_string).collect::<Vec<_>>(),
    })
}

pub fn exact_csv(values: &[ExactScalar]) -> String {
    let mut out = String::from("n,value\n");
    for (n, v) in values.iter().enumerate() {
        out.push_str(&format!("{n},{v}\n"));
    }
    out
}

/// Lines `n s_n`; every value must be an integer.
pub fn exact_bfile(values: &[ExactScalar]) -> Result<String, usize> {
    let mut out = String::new();
    for (n, v) in values.iter().enumerate() {
        if !v.is_integer() {
            return Err(n);
        }
        out.push_str(&format!("{n} {v}\n"));
    }
    Ok(out)
}

pub fn log_text(ln_values: &[f64]) -> String {
    let mut out = String::new();
    for (n, ln) in ln_values.iter().enumerate() {
        out.push_str(&format!("{n} {} {}\n", round12(*ln), decimal_from_ln(*ln)));
    }
    out
}

pub fn log_json(ln_values: &[f64]) -> Value {
    json!({
        "domain": "log",
        "n": ln_values.len() - 1,
        "values": ln_values
            .iter()
            .map(|ln| json!({ "ln": round12(*ln), "decimal": decimal_from_ln(*ln) }))
            .collect::<Vec<_>>(),
    })
}

pub fn log_csv(ln_values: &[f64]) -> String {
    let mut out = String::from("n,ln,decimal\n");
    for (n, ln) in ln_values.iter().enumerate() {
        out.push_str(&format!("{n},{},{}\n", round12(*ln), decimal_from_ln(*ln)));
    }
    out
}

pub fn bounds_text(report: &BoundsReport) -> String {
    let mut out = format!("recurrence: {}\n", report.spec);
    out.push_str(&format!(
        "{:>8}  {:>18}  {:>18}  {:>18}\n",
        "n", "lower", "upper", "ratio"
    ));
    for e in &report.entries {
        out.push_str(&format!(
            "{:>8}  {:>18}  {:>18}  {:>18}\n",
            e.n,
            rate(e.ln_lower),
            rate(e.ln_upper),
            rate(e.ln_upper - e.ln_lower)
        ));
    }
    out.push_str(&format!(
        "best over n <= {}: [{:.10}, {:.10}], ratio {:.6}\n",
        report.max_n,
        report.lower(),
        report.upper(),
        report.ratio()
    ));
    if let Some(eps) = report.epsilon {
        out.push_str(&format!(
            "target ratio {:.6}: {}\n",
            1.0 + eps,
            if report.converged() {
                "converged".to_string()
            } else {
                format!("unconverged ({})", stop_name(report))
            }
        ));
    }
    out
}

/// Plain decimals for moderate values, scientific notation beyond a million.
fn rate(ln: f64) -> String {
    if ln < 6.0 * std::f64::consts::LN_10 {
        format!("{:.10}", ln.exp())
    } else {
        decimal_from_ln(ln)
    }
}

fn stop_name(report: &BoundsReport) -> &'static str {
    match report.stop {
        convgrowth::StopReason::Converged => "converged",
        convgrowth::StopReason::MaxN => "reached max N",
        convgrowth::StopReason::TimeLimit => "ran out of time",
        convgrowth::StopReason::Fixed => "fixed N",
    }
}
