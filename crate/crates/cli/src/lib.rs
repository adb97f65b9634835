//! Reproducible experiment runner: parses TOML configs, fans runs out over
//! a worker pool, and writes figure-ready CSV plus a JSON summary.
//!
//! Result files are deterministic: rows are emitted in input order with
//! every float printed to 17 significant digits, and reruns of the same
//! config produce byte-identical bytes. Wall-clock diagnostics go to a
//! separate timing.json that is excluded from that guarantee.

pub mod config;
pub mod figures;
pub mod runner;

use anyhow::anyhow;

pub(crate) fn error_msg(e: pqlab_core::Error) -> anyhow::Error {
    anyhow!("{e}")
}

/// Decimal scientific notation with 17 significant digits: doubles
/// round-trip exactly.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}
