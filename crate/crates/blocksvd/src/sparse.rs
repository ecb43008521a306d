//! Coordinate-form sparse matrices, permutations and block views.
//!
//! `SparseTriplets` is the only representation ever held for a full input
//! matrix; everything dense downstream is block-local.

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};
use crate::memory::{self, MemoryBudget};

/// Sparse matrix in normalized coordinate form: entries sorted row-major,
/// duplicates summed, exact zeros dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTriplets {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl SparseTriplets {
    pub fn new(n_rows: usize, n_cols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        for &(r, c, _) in &entries {
            if r >= n_rows || c >= n_cols {
                return Err(Error::Dimension(format!(
                    "entry ({}, {}) outside {}x{} matrix",
                    r, c, n_rows, n_cols
                )));
            }
        }
        entries.sort_unstable_by_key(|a| (a.0, a.1));
        let mut normalized: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
        for (r, c, v) in entries {
            match normalized.last_mut() {
                Some(last) if last.0 == r && last.1 == c => last.2 += v,
                _ => normalized.push((r, c, v)),
            }
        }
        normalized.retain(|&(_, _, v)| v != 0.0);
        for &(r, c, v) in &normalized {
            if !v.is_finite() {
                return Err(Error::Dimension(format!(
                    "non-finite value at ({}, {})",
                    r, c
                )));
            }
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries: normalized,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    /// Swap the roles of rows and columns.
    pub fn transposed(&self) -> SparseTriplets {
        let entries = self.entries.iter().map(|&(r, c, v)| (c, r, v)).collect();
        SparseTriplets::new(self.n_cols, self.n_rows, entries).expect("indices stay in range")
    }

    /// Sum of squared entries; equals trace(AᵗA).
    ///
    /// Summed in value order so the result depends only on the multiset of
    /// entries, making it exactly invariant under permutation.
    pub fn frobenius_sq(&self) -> f64 {
        let mut squares: Vec<f64> = self.entries.iter().map(|&(_, _, v)| v * v).collect();
        squares.sort_unstable_by(f64::total_cmp);
        squares.iter().sum()
    }

    /// Euclidean norm of each row.
    pub fn row_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.n_rows];
        for &(r, _, v) in &self.entries {
            sq[r] += v * v;
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Euclidean norm of each column.
    pub fn col_norms(&self) -> Vec<f64> {
        let mut sq = vec![0.0; self.n_cols];
        for &(_, c, v) in &self.entries {
            sq[c] += v * v;
        }
        sq.into_iter().map(f64::sqrt).collect()
    }

    /// Reindex rows and columns: entry (i, j) lands at the output position
    /// whose permutation slot maps back to (i, j).
    pub fn permute(&self, row_p: &Permutation, col_p: &Permutation) -> Result<SparseTriplets> {
        if row_p.size() != self.n_rows || col_p.size() != self.n_cols {
            return Err(Error::Dimension(format!(
                "permutation sizes {}/{} do not match {}x{}",
                row_p.size(),
                col_p.size(),
                self.n_rows,
                self.n_cols
            )));
        }
        let row_inv = row_p.inverse();
        let col_inv = col_p.inverse();
        let entries = self
            .entries
            .iter()
            .map(|&(r, c, v)| (row_inv.map()[r], col_inv.map()[c], v))
            .collect();
        SparseTriplets::new(self.n_rows, self.n_cols, entries)
    }

    /// Extract one block of the 2x2 view with local 0-based indices.
    pub fn extract_block(&self, p: &BlockPartition, which: BlockId) -> Result<SparseTriplets> {
        p.validate(self)?;
        let (r0, r1, c0, c1) = match which {
            BlockId::B11 => (0, p.row_cut, 0, p.col_cut),
            BlockId::B12 => (0, p.row_cut, p.col_cut, self.n_cols),
            BlockId::B21 => (p.row_cut, self.n_rows, 0, p.col_cut),
            BlockId::B22 => (p.row_cut, self.n_rows, p.col_cut, self.n_cols),
        };
        let entries = self
            .entries
            .iter()
            .filter(|&&(r, c, _)| r >= r0 && r < r1 && c >= c0 && c < c1)
            .map(|&(r, c, v)| (r - r0, c - c0, v))
            .collect();
        SparseTriplets::new(r1 - r0, c1 - c0, entries)
    }

    /// Blockwise Gram matrix AᵗA split at the column cut.
    ///
    /// G11 and G12 are always materialized (after a budget check); G22
    /// falls back to its diagonal when the full block does not fit.
    pub fn gram_blockwise(&self, p: &BlockPartition, budget: &MemoryBudget) -> Result<GramBlocks> {
        p.validate(self)?;
        let k = p.col_cut;
        let rest = self.n_cols - k;
        budget.check("G11", memory::bytes_for(k, k))?;
        let mut g11 = DenseMatrix::zeros(k, k);
        budget.check("G12", memory::bytes_for(k, rest))?;
        let mut g12 = DenseMatrix::zeros(k, rest);
        let full_g22 = budget.fits(memory::bytes_for(rest, rest));
        let mut g22 = if full_g22 {
            G22Block::Full(DenseMatrix::zeros(rest, rest))
        } else {
            G22Block::Diagonal(vec![0.0; rest])
        };

        for row in RowGroups::new(&self.entries) {
            for (i, &(_, c1, v1)) in row.iter().enumerate() {
                for &(_, c2, v2) in &row[i..] {
                    let prod = v1 * v2;
                    if c2 < k {
                        g11.set(c1, c2, g11.get(c1, c2) + prod);
                        if c1 != c2 {
                            g11.set(c2, c1, g11.get(c2, c1) + prod);
                        }
                    } else if c1 < k {
                        g12.set(c1, c2 - k, g12.get(c1, c2 - k) + prod);
                    } else {
                        match &mut g22 {
                            G22Block::Full(m) => {
                                m.set(c1 - k, c2 - k, m.get(c1 - k, c2 - k) + prod);
                                if c1 != c2 {
                                    m.set(c2 - k, c1 - k, m.get(c2 - k, c1 - k) + prod);
                                }
                            }
                            G22Block::Diagonal(d) => {
                                if c1 == c2 {
                                    d[c1 - k] += prod;
                                }
                            }
                        }
                    }
                }
            }
        }
        Ok(GramBlocks { g11, g12, g22 })
    }

    /// Full dense Gram matrix AᵗA (budget-checked); oracle-scale only.
    pub fn gram_full(&self, budget: &MemoryBudget) -> Result<DenseMatrix> {
        let n = self.n_cols;
        budget.check("AtA", memory::bytes_for(n, n))?;
        let mut g = DenseMatrix::zeros(n, n);
        for row in RowGroups::new(&self.entries) {
            for (i, &(_, c1, v1)) in row.iter().enumerate() {
                for &(_, c2, v2) in &row[i..] {
                    let prod = v1 * v2;
                    g.set(c1, c2, g.get(c1, c2) + prod);
                    if c1 != c2 {
                        g.set(c2, c1, g.get(c2, c1) + prod);
                    }
                }
            }
        }
        Ok(g)
    }

    /// Sparse-times-dense product A·X.
    pub fn mul_dense(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        if x.n_rows() != self.n_cols {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} sparse by {}x{} dense",
                self.n_rows,
                self.n_cols,
                x.n_rows(),
                x.n_cols()
            )));
        }
        let mut out = DenseMatrix::zeros(self.n_rows, x.n_cols());
        for &(r, c, v) in &self.entries {
            let x_row = x.row(c);
            let out_row = out.row_mut(r);
            for (o, &xj) in out_row.iter_mut().zip(x_row) {
                *o += v * xj;
            }
        }
        Ok(out)
    }

    /// Densify (budget-checked); oracle-scale only.
    pub fn to_dense(&self, budget: &MemoryBudget) -> Result<DenseMatrix> {
        budget.check("dense(A)", memory::bytes_for(self.n_rows, self.n_cols))?;
        let mut m = DenseMatrix::zeros(self.n_rows, self.n_cols);
        for &(r, c, v) in &self.entries {
            m.set(r, c, v);
        }
        Ok(m)
    }
}

/// Iterator over maximal runs of entries sharing a row (entries are sorted).
struct RowGroups<'a> {
    entries: &'a [(usize, usize, f64)],
}

impl<'a> RowGroups<'a> {
    fn new(entries: &'a [(usize, usize, f64)]) -> Self {
        Self { entries }
    }
}

impl<'a> Iterator for RowGroups<'a> {
    type Item = &'a [(usize, usize, f64)];

    fn next(&mut self) -> Option<Self::Item> {
        let first = self.entries.first()?;
        let end = self
            .entries
            .iter()
            .position(|e| e.0 != first.0)
            .unwrap_or(self.entries.len());
        let (head, tail) = self.entries.split_at(end);
        self.entries = tail;
        Some(head)
    }
}

/// Gram blocks of the column split; G22 may be diagonal-only under budget.
#[derive(Debug)]
pub struct GramBlocks {
    pub g11: DenseMatrix,
    pub g12: DenseMatrix,
    pub g22: G22Block,
}

#[derive(Debug)]
pub enum G22Block {
    Full(DenseMatrix),
    Diagonal(Vec<f64>),
}

impl G22Block {
    pub fn trace(&self) -> f64 {
        match self {
            G22Block::Full(m) => m.trace(),
            G22Block::Diagonal(d) => d.iter().sum(),
        }
    }
}

/// Parse the triplet CSV format: `row,col,value` lines, `#` comments,
/// optional `%%dims <rows> <cols>` header, and flag-selectable indexing base.
pub fn parse_triplets(text: &str, one_based: bool) -> Result<SparseTriplets> {
    let mut declared: Option<(usize, usize)> = None;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    let mut max_row = 0usize;
    let mut max_col = 0usize;
    let base = usize::from(one_based);

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(rest) = line.strip_prefix("%%dims") {
            let mut parts = rest.split_whitespace();
            let rows = parse_field::<usize>(parts.next(), line_no, "row count")?;
            let cols = parse_field::<usize>(parts.next(), line_no, "column count")?;
            declared = Some((rows, cols));
            continue;
        }
        let mut fields = line.split(',');
        let r = parse_field::<usize>(fields.next(), line_no, "row index")?;
        let c = parse_field::<usize>(fields.next(), line_no, "column index")?;
        let v = parse_field::<f64>(fields.next(), line_no, "value")?;
        if fields.next().is_some() {
            return Err(Error::Parse {
                line: line_no,
                message: "expected exactly `row,col,value`".into(),
            });
        }
        if one_based && (r == 0 || c == 0) {
            return Err(Error::Parse {
                line: line_no,
                message: "index 0 is invalid in one-based input".into(),
            });
        }
        let (r, c) = (r - base, c - base);
        max_row = max_row.max(r + 1);
        max_col = max_col.max(c + 1);
        entries.push((r, c, v));
    }

    let (n_rows, n_cols) = declared.unwrap_or((max_row, max_col));
    if max_row > n_rows || max_col > n_cols {
        return Err(Error::Dimension(format!(
            "entries reach ({}, {}) but header declares {}x{}",
            max_row, max_col, n_rows, n_cols
        )));
    }
    SparseTriplets::new(n_rows, n_cols, entries)
}

fn parse_field<T: std::str::FromStr>(field: Option<&str>, line: usize, what: &str) -> Result<T> {
    field
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Parse {
            line,
            message: format!("missing or malformed {}", what),
        })
}

/// Permutation stored as `map[i] = source index of output position i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; map.len()];
        for &i in &map {
            if i >= map.len() || seen[i] {
                return Err(Error::Dimension("permutation map is not a bijection".into()));
            }
            seen[i] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.map.len()
    }

    pub fn map(&self) -> &[usize] {
        &self.map
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.map.len()];
        for (pos, &src) in self.map.iter().enumerate() {
            inv[src] = pos;
        }
        Permutation { map: inv }
    }

    /// Stable ordering by non-increasing key: output position 0 holds the
    /// largest key, ties keep their original relative order.
    pub fn sort_descending(keys: &[f64]) -> Permutation {
        let mut idx: Vec<usize> = (0..keys.len()).collect();
        idx.sort_by(|&a, &b| keys[b].partial_cmp(&keys[a]).expect("finite keys").then(a.cmp(&b)));
        Permutation { map: idx }
    }
}

/// Row/column cuts defining the 2x2 block view; indices below the cut
/// belong to block 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPartition {
    pub row_cut: usize,
    pub col_cut: usize,
}

impl BlockPartition {
    pub fn new(row_cut: usize, col_cut: usize) -> Self {
        Self { row_cut, col_cut }
    }

    pub fn validate(&self, m: &SparseTriplets) -> Result<()> {
        if self.row_cut == 0
            || self.col_cut == 0
            || self.row_cut > m.n_rows()
            || self.col_cut > m.n_cols()
        {
            return Err(Error::Dimension(format!(
                "cut ({}, {}) invalid for {}x{} matrix",
                self.row_cut,
                self.col_cut,
                m.n_rows(),
                m.n_cols()
            )));
        }
        Ok(())
    }
}

/// Identifies one block of the 2x2 view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockId {
    B11,
    B12,
    B21,
    B22,
}

impl BlockId {
    pub const ALL: [BlockId; 4] = [BlockId::B11, BlockId::B12, BlockId::B21, BlockId::B22];

    pub fn label(&self) -> &'static str {
        match self {
            BlockId::B11 => "11",
            BlockId::B12 => "12",
            BlockId::B21 => "21",
            BlockId::B22 => "22",
        }
    }
}

impl std::str::FromStr for BlockId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "11" => Ok(BlockId::B11),
            "12" => Ok(BlockId::B12),
            "21" => Ok(BlockId::B21),
            "22" => Ok(BlockId::B22),
            other => Err(Error::Usage(format!("unknown block id `{}`", other))),
        }
    }
}
