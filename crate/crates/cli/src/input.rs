use std::fs;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use convgrowth::{catalog, parse_any, RecurrenceSpec};

use crate::commands::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NamedSpec {
    Catalan,
    Schroeder,
    Kfold3,
    Mixed,
    Max22,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct SpecArgs {
    /// Recurrence file, in the line format or JSON.
    #[arg(long, value_name = "PATH")]
    pub spec: Option<PathBuf>,

    /// Recurrence given inline; `;` separates terms, e.g. "sum 2 1; max 3 1/2".
    #[arg(long, value_name = "TEXT")]
    pub expr: Option<String>,

    /// A built-in recurrence.
    #[arg(long, value_enum)]
    pub named: Option<NamedSpec>,
}

impl SpecArgs {
    pub fn load(&self) -> Result<RecurrenceSpec, Failure> {
        if let Some(named) = self.named {
            return Ok(match named {
                NamedSpec::Catalan => catalog::catalan(),
                NamedSpec::Schroeder => catalog::schroeder(),
                NamedSpec::Kfold3 => catalog::kfold(3).map_err(Failure::usage)?,
                NamedSpec::Mixed => catalog::mixed_example(),
                NamedSpec::Max22 => catalog::doubling_max(),
            });
        }
        let (text, origin) = match (&self.spec, &self.expr) {
            (Some(path), _) => (
                fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(Failure::usage)?,
                path.display().to_string(),
            ),
            (None, Some(expr)) => (expr.replace(';', "\n"), "--expr".to_string()),
            (None, None) => unreachable!("clap requires one spec source"),
        };
        let spec = parse_any(&text)
            .with_context(|| format!("invalid recurrence in {origin}"))
            .map_err(Failure::usage)?;
        log::info!("recurrence: {spec}");
        Ok(spec)
    }
}

/// Parses a byte count with an optional K, M or G (binary) suffix.
pub fn parse_bytes(text: &str) -> Result<usize, String> {
    let trimmed = text.trim();
    let (digits, shift) = match trimmed.char_indices().last() {
        Some((i, 'K' | 'k')) => (&trimmed[..i], 10),
        Some((i, 'M' | 'm')) => (&trimmed[..i], 20),
        Some((i, 'G' | 'g')) => (&trimmed[..i], 30),
        _ => (trimmed, 0),
    };
    let base: usize = digits
        .parse()
        .map_err(|_| format!("`{text}` is not a byte count"))?;
    base.checked_mul(1 << shift)
        .ok_or_else(|| format!("`{text}` is too large"))
}
