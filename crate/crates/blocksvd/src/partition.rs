//! Preprocessing: orientation, norm-descending sorting, norm-fraction cut
//! selection and block statistics.

use crate::error::{Error, Result};
use crate::sparse::{BlockId, BlockPartition, Permutation, SparseTriplets};

/// Make sure the matrix has at least as many rows as columns, transposing
/// otherwise; the flag records that U and V must be swapped on output.
pub fn ensure_portrait(m: &SparseTriplets) -> (SparseTriplets, bool) {
    if m.n_rows() >= m.n_cols() {
        (m.clone(), false)
    } else {
        (m.transposed(), true)
    }
}

/// Stable permutations ordering rows and columns by non-increasing
/// Euclidean norm. Squared norms are used internally; the ordering is the
/// same.
pub fn sort_by_norms(m: &SparseTriplets) -> (Permutation, Permutation) {
    let row_keys: Vec<f64> = m.row_norms().iter().map(|n| n * n).collect();
    let col_keys: Vec<f64> = m.col_norms().iter().map(|n| n * n).collect();
    (
        Permutation::sort_descending(&row_keys),
        Permutation::sort_descending(&col_keys),
    )
}

/// Smallest column count whose prefix holds at least `fraction` of the
/// squared Frobenius norm; the row cut matches it so block 11 is square.
///
/// The prefix test runs over the whole first column block (blocks 11 and
/// 21 together), which is what the sorted column norms measure.
pub fn choose_cut(sorted: &SparseTriplets, fraction: f64) -> Result<BlockPartition> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Usage(format!(
            "fraction must lie in (0, 1), got {}",
            fraction
        )));
    }
    let total = sorted.frobenius_sq();
    let col_sq: Vec<f64> = sorted.col_norms().iter().map(|n| n * n).collect();
    let mut prefix = 0.0;
    for (k, sq) in col_sq.iter().enumerate() {
        prefix += sq;
        if prefix >= fraction * total {
            let cut = k + 1;
            if cut >= sorted.n_cols() {
                return Err(Error::DegenerateCut {
                    fraction,
                    n_cols: sorted.n_cols(),
                });
            }
            return Ok(BlockPartition::new(cut, cut));
        }
    }
    Err(Error::DegenerateCut {
        fraction,
        n_cols: sorted.n_cols(),
    })
}

/// One row of the block statistics table.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub label: &'static str,
    pub rows: usize,
    pub cols: usize,
    /// Fraction of entries that are nonzero, in [0, 1].
    pub density: f64,
    pub square_norm: f64,
    /// Share of the whole squared norm, in percent.
    pub norm_percentage: f64,
}

/// Per-block statistics table: a whole-matrix row
/// followed by the four blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionReport {
    pub rows: Vec<ReportRow>,
}

impl PartitionReport {
    pub const HEADER: &'static str =
        "BLOCK\tROWS\tCOLUMNS\tDENSITY\tSQUARE NORM\tNORM PERCENTAGE";

    /// Serialize as a TSV table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(Self::HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{:.2}%\t{}\t{:.2}%\n",
                row.label,
                row.rows,
                row.cols,
                row.density * 100.0,
                crate::report::fmt_g17(row.square_norm),
                row.norm_percentage
            ));
        }
        out
    }
}

pub fn partition_report(m: &SparseTriplets, p: &BlockPartition) -> Result<PartitionReport> {
    p.validate(m)?;
    let total = m.frobenius_sq();
    let mut rows = vec![report_row("whole", m, total)];
    for id in BlockId::ALL {
        let block = m.extract_block(p, id)?;
        rows.push(report_row(id.label(), &block, total));
    }
    Ok(PartitionReport { rows })
}

fn report_row(label: &'static str, m: &SparseTriplets, total_sq: f64) -> ReportRow {
    let cells = m.n_rows() * m.n_cols();
    let square_norm = m.frobenius_sq();
    ReportRow {
        label,
        rows: m.n_rows(),
        cols: m.n_cols(),
        density: if cells == 0 { 0.0 } else { m.nnz() as f64 / cells as f64 },
        square_norm,
        norm_percentage: if total_sq == 0.0 { 0.0 } else { 100.0 * square_norm / total_sq },
    }
}
