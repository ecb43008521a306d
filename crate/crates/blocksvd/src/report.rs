//! Text output: `%.17g` float formatting, CSV/TSV writers and the
//! provenance record.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::sparse::SparseTriplets;
use crate::trace::IterationLog;

/// Format like C's `%.17g`: 17 significant digits, fixed notation for
/// decimal exponents in [-4, 17), scientific otherwise, trailing zeros
/// trimmed.
pub fn fmt_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{:.16e}", v);
    let epos = sci.find('e').expect("exponent marker");
    let exp: i32 = sci[epos + 1..].parse().expect("exponent digits");
    if !(-4..17).contains(&exp) {
        let mantissa = trim_zeros(&sci[..epos]);
        format!("{}e{}{:02}", mantissa, if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let precision = (16 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", precision, v)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// One value per line, descending, `%.17g`.
pub fn singular_values_text(values: &[f64]) -> String {
    let mut out = String::new();
    for v in values {
        out.push_str(&fmt_g17(*v));
        out.push('\n');
    }
    out
}

pub fn read_singular_values(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)?;
    let mut values = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        values.push(line.parse::<f64>().map_err(|_| Error::Parse {
            line: idx + 1,
            message: format!("not a number: `{}`", line),
        })?);
    }
    Ok(values)
}

/// Dense matrix as CSV: one row per line, `%.17g` cells.
pub fn dense_csv(m: &DenseMatrix) -> String {
    let mut out = String::new();
    for r in 0..m.n_rows() {
        let mut first = true;
        for c in 0..m.n_cols() {
            if !first {
                out.push(',');
            }
            out.push_str(&fmt_g17(m.get(r, c)));
            first = false;
        }
        out.push('\n');
    }
    out
}

/// Triplet CSV with a `%%dims` header, ready for `parse_triplets`.
pub fn triplets_csv(m: &SparseTriplets) -> String {
    let mut out = format!("%%dims {} {}\n", m.n_rows(), m.n_cols());
    for &(r, c, v) in m.entries() {
        let _ = writeln!(out, "{},{},{}", r, c, fmt_g17(v));
    }
    out
}

/// Iteration log as a TSV table.
pub fn iterations_tsv(log: &IterationLog) -> String {
    let mut out = String::from("ITER\tTRACE11\tTRACE22\tNONDIAG\tSECONDS\n");
    for rec in &log.records {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{:.3}",
            rec.iteration,
            fmt_g17(rec.trace11),
            fmt_g17(rec.trace22),
            fmt_g17(rec.nondiag),
            rec.seconds
        );
    }
    out
}

/// Key/value run record: permutations, transposed flag, config echo.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Provenance {
    pub transposed: bool,
    pub row_permutation: Vec<usize>,
    pub col_permutation: Vec<usize>,
    pub converged: bool,
    pub notices: Vec<String>,
    pub config: ConfigEcho,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub fraction: f64,
    pub ratio_tol: f64,
    pub max_iters: usize,
    pub tol_rank: f64,
    pub budget_bytes: usize,
    pub seed: u64,
    pub route: String,
}
