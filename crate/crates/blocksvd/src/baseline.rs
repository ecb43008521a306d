//! Self-hosted dense SVD.
//!
//! Two routes are provided and cross-checked against each other:
//! Householder bidiagonalization followed by unshifted QR sweeps
//! ([`svd_dense`]), and the Gram route that diagonalizes AᵗA and recovers
//! the left factor as A·V·D^(-1/2) ([`economy_svd_gram`]). The first is the
//! desk-scale oracle, the second scales to the blockwise driver.

use crate::dense::{DenseMatrix, Diagonal};
use crate::eigen::jacobi_eigh;
use crate::error::{Error, Result};
use crate::memory::MemoryBudget;
use crate::sparse::SparseTriplets;

/// Relative cutoff below which singular values count as zero.
pub const TOL_RANK: f64 = 1e-12;

/// Default off-diagonal tolerance for the QR sweeps.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Default cap on QR sweeps.
pub const DEFAULT_MAX_SWEEPS: usize = 500;

/// Elementary reflector H = I - 2·r̂·r̂ᵗ acting from `offset` on.
#[derive(Debug, Clone)]
pub struct HouseholderReflector {
    unit_vector: Vec<f64>,
    offset: usize,
}

impl HouseholderReflector {
    pub fn unit_vector(&self) -> &[f64] {
        &self.unit_vector
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    /// Apply H to a vector in place.
    pub fn apply(&self, x: &mut [f64]) {
        let tail = &mut x[self.offset..];
        let dot: f64 = self
            .unit_vector
            .iter()
            .zip(tail.iter())
            .map(|(r, v)| r * v)
            .sum();
        for (r, v) in self.unit_vector.iter().zip(tail.iter_mut()) {
            *v -= 2.0 * dot * r;
        }
    }

    /// Apply H to every column of `m` in place.
    pub fn apply_left(&self, m: &mut DenseMatrix) {
        let rows = m.n_rows();
        let cols = m.n_cols();
        debug_assert_eq!(self.offset + self.unit_vector.len(), rows);
        for c in 0..cols {
            let mut dot = 0.0;
            for (i, r) in self.unit_vector.iter().enumerate() {
                dot += r * m.get(self.offset + i, c);
            }
            let dot2 = 2.0 * dot;
            for (i, r) in self.unit_vector.iter().enumerate() {
                let v = m.get(self.offset + i, c) - dot2 * r;
                m.set(self.offset + i, c, v);
            }
        }
    }

    /// Apply H to every row of `m` in place (right multiplication).
    pub fn apply_right(&self, m: &mut DenseMatrix) {
        let cols = m.n_cols();
        debug_assert_eq!(self.offset + self.unit_vector.len(), cols);
        for r in 0..m.n_rows() {
            let row = m.row_mut(r);
            let tail = &mut row[self.offset..cols];
            let dot: f64 = self
                .unit_vector
                .iter()
                .zip(tail.iter())
                .map(|(u, v)| u * v)
                .sum();
            let dot2 = 2.0 * dot;
            for (u, v) in self.unit_vector.iter().zip(tail.iter_mut()) {
                *v -= dot2 * u;
            }
        }
    }
}

/// Reflector sending the sub-vector from `offset` on to ±‖·‖·e₁.
///
/// Uses the stable choice v = x + sign(x₁)·‖x‖·e₁, so the surviving entry
/// has sign opposite the leading entry.
pub fn householder_annihilating(column: &[f64], offset: usize) -> Result<HouseholderReflector> {
    let tail = &column[offset..];
    let norm_sq: f64 = tail.iter().map(|v| v * v).sum();
    if norm_sq == 0.0 {
        return Err(Error::ZeroColumn);
    }
    let norm = norm_sq.sqrt();
    let mut v: Vec<f64> = tail.to_vec();
    let sign = if v[0] >= 0.0 { 1.0 } else { -1.0 };
    v[0] += sign * norm;
    let v_norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in &mut v {
        *x /= v_norm;
    }
    Ok(HouseholderReflector {
        unit_vector: v,
        offset,
    })
}

/// Orthogonal reduction to upper bidiagonal form.
#[derive(Debug)]
pub struct BidiagonalResult {
    /// Rows × n slice of the accumulated left reflectors.
    pub left_factor: DenseMatrix,
    /// n × n matrix with nonzeros only on the diagonal and superdiagonal.
    pub bidiag: DenseMatrix,
    /// n × n accumulated right reflectors.
    pub right_factor: DenseMatrix,
    /// Number of reflections actually applied.
    pub reflections: usize,
}

/// Bidiagonalize a matrix with n_rows ≥ n_cols.
///
/// Left reflectors clear whole columns; right reflectors start one past
/// the diagonal so the zeros they create survive, leaving one nonzero in
/// each column and two in each row. At most 2n-1 reflections are applied.
pub fn bidiagonalize(a: &DenseMatrix) -> Result<BidiagonalResult> {
    let m = a.n_rows();
    let n = a.n_cols();
    if m < n {
        return Err(Error::Dimension(format!(
            "bidiagonalization needs rows >= cols, got {}x{}",
            m, n
        )));
    }
    let mut work = a.clone();
    let mut lefts: Vec<HouseholderReflector> = Vec::with_capacity(n);
    let mut rights: Vec<HouseholderReflector> = Vec::with_capacity(n.saturating_sub(2));
    let mut reflections = 0;

    for k in 0..n {
        match householder_annihilating(&work.column(k), k) {
            Ok(h) => {
                h.apply_left(&mut work);
                lefts.push(h);
                reflections += 1;
            }
            Err(Error::ZeroColumn) => {}
            Err(e) => return Err(e),
        }
        if k + 2 < n {
            match householder_annihilating(work.row(k), k + 1) {
                Ok(h) => {
                    h.apply_right(&mut work);
                    rights.push(h);
                    reflections += 1;
                }
                Err(Error::ZeroColumn) => {}
                Err(e) => return Err(e),
            }
        }
    }

    // Keep only the bidiagonal band; everything else is rounding residue.
    let mut bidiag = DenseMatrix::zeros(n, n);
    for i in 0..n {
        bidiag.set(i, i, work.get(i, i));
        if i + 1 < n {
            bidiag.set(i, i + 1, work.get(i, i + 1));
        }
    }

    // left_factor = H₁·H₂·…·[Iₙ; 0] applied back to front.
    let mut left_factor = DenseMatrix::eye(m, n);
    for h in lefts.iter().rev() {
        h.apply_left(&mut left_factor);
    }
    let mut right_factor = DenseMatrix::identity(n);
    for h in rights.iter().rev() {
        h.apply_left(&mut right_factor);
    }
    Ok(BidiagonalResult {
        left_factor,
        bidiag,
        right_factor,
        reflections,
    })
}

/// Economy decomposition A = U·D·Vᵗ with UᵗU = VᵗV = I of rank width.
#[derive(Debug, Clone)]
pub struct EconomySvd {
    pub u_slice: DenseMatrix,
    pub d: Diagonal,
    pub v_slice: DenseMatrix,
}

impl EconomySvd {
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    /// ‖A − U·D·Vᵗ‖_F for the matrix this decomposes.
    pub fn reconstruction_error(&self, a: &DenseMatrix) -> f64 {
        let ud = self.u_slice.scale_columns(self.d.values()).expect("rank widths match");
        let recon = ud.matmul_a_bt(&self.v_slice).expect("rank widths match");
        recon.sub(a).expect("same shape").frobenius()
    }
}

/// Diagonalize a bidiagonal matrix by alternating one-sided Householder
/// sweeps and merge the factors into an economy SVD of the original matrix.
///
/// Each sweep lower-triangularizes from the right, then re-uppers from the
/// left; orthogonal transformations preserve the singular values while the
/// diagonal mass grows, which is what drives convergence.
pub fn qr_diagonalize(b: &BidiagonalResult, tol: f64, max_sweeps: usize) -> Result<EconomySvd> {
    let n = b.bidiag.n_cols();
    let fro = b.bidiag.frobenius();
    let mut w = b.bidiag.clone();
    let mut left = DenseMatrix::identity(n);
    let mut right = DenseMatrix::identity(n);

    if fro > 0.0 {
        let target = tol * fro;
        let mut sweeps = 0;
        loop {
            deflate_tiny(&mut w, fro, target);
            // The sweeps stall on couplings between near-equal singular
            // values, so segments that deflation has isolated are finished
            // directly: a lone pair in closed form, a small well-conditioned
            // cluster through its (then fully accurate) Gram matrix.
            for (lo, hi) in unreduced_segments(&w) {
                if hi - lo == 2 {
                    solve_isolated_pair(&mut w, &mut left, &mut right, lo);
                } else if hi - lo <= 12 && segment_diag_ratio(&w, lo, hi) <= 30.0 {
                    finish_clustered_segment(&mut w, &mut left, &mut right, lo, hi)?;
                }
            }
            if off_diagonal_mass(&w) <= target {
                break;
            }
            if sweeps >= max_sweeps {
                return Err(Error::Convergence {
                    what: "QR diagonalization sweeps".into(),
                    residual: off_diagonal_mass(&w),
                });
            }
            // Right pass: annihilate the superdiagonal, mixing column pairs.
            for j in 0..n - 1 {
                if w.get(j, j + 1) == 0.0 {
                    continue;
                }
                let pair = [w.get(j, j), w.get(j, j + 1)];
                if let Ok(h) = householder_annihilating(&pair, 0) {
                    apply_pair_right(&mut w, j, &h);
                    apply_pair_right(&mut right, j, &h);
                }
            }
            // Left pass: annihilate the new subdiagonal, mixing row pairs.
            for i in 0..n - 1 {
                if w.get(i + 1, i) == 0.0 {
                    continue;
                }
                let pair = [w.get(i, i), w.get(i + 1, i)];
                if let Ok(h) = householder_annihilating(&pair, 0) {
                    apply_pair_left(&mut w, i, &h);
                    // L accumulates on its columns: B = L·W·Rᵗ stays true.
                    apply_pair_right(&mut left, i, &h);
                }
            }
            sweeps += 1;
        }
    }

    // B = L·W·Rᵗ with W diagonal, so A = (Qb·L)·W·(Pb·R)ᵗ. Fold signs of W
    // into the left columns, sort descending, apply the rank cutoff.
    let full_u = b.left_factor.matmul(&left)?;
    let full_v = b.right_factor.matmul(&right)?;
    let mut values: Vec<(f64, usize, bool)> = (0..n)
        .map(|i| {
            let w_ii = w.get(i, i);
            (w_ii.abs(), i, w_ii < 0.0)
        })
        .collect();
    values.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite").then(a.1.cmp(&b.1)));
    let max_value = values.first().map_or(0.0, |v| v.0);
    let rank = values
        .iter()
        .take_while(|v| v.0 > TOL_RANK * max_value && v.0 > 0.0)
        .count();

    let mut u_slice = DenseMatrix::zeros(b.left_factor.n_rows(), rank);
    let mut v_slice = DenseMatrix::zeros(b.right_factor.n_rows(), rank);
    let mut d = Vec::with_capacity(rank);
    for (dst, &(value, src, negated)) in values.iter().take(rank).enumerate() {
        d.push(value);
        let mut u_col = full_u.column(src);
        if negated {
            for x in &mut u_col {
                *x = -*x;
            }
        }
        u_slice.set_column(dst, &u_col);
        v_slice.set_column(dst, &full_v.column(src));
    }
    Ok(EconomySvd {
        u_slice,
        d: Diagonal::new(d),
        v_slice,
    })
}

fn off_diagonal_mass(w: &DenseMatrix) -> f64 {
    let n = w.n_rows();
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let x = w.get(i, j);
                sum += x * x;
            }
        }
    }
    sum.sqrt()
}

/// Zero negligible entries so the problem splits into independent blocks.
/// Zeroing everything below the threshold adds at most n·eps ≤ target/2 of
/// off-diagonal mass, which the convergence criterion absorbs.
fn deflate_tiny(w: &mut DenseMatrix, fro: f64, target: f64) {
    let n = w.n_rows();
    let eps = (1e-15 * fro).max(0.5 * target / n as f64);
    for i in 0..n {
        for j in 0..n {
            if w.get(i, j).abs() <= eps {
                w.set(i, j, 0.0);
            }
        }
    }
}

/// Maximal diagonal index ranges still coupled by superdiagonal entries.
fn unreduced_segments(w: &DenseMatrix) -> Vec<(usize, usize)> {
    let n = w.n_rows();
    let mut segments = Vec::new();
    let mut lo = 0;
    for i in 0..n {
        let coupled = i + 1 < n && w.get(i, i + 1) != 0.0;
        if !coupled {
            if i + 1 - lo >= 2 {
                segments.push((lo, i + 1));
            }
            lo = i + 1;
        }
    }
    segments
}

fn segment_diag_ratio(w: &DenseMatrix, lo: usize, hi: usize) -> f64 {
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for i in lo..hi {
        let d = w.get(i, i).abs();
        min = min.min(d);
        max = max.max(d);
    }
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Finish an isolated segment whose diagonal entries are all of comparable
/// size. Squaring costs relative accuracy ~ ratio², which the caller's
/// ratio gate keeps below the sweep tolerance.
fn finish_clustered_segment(
    w: &mut DenseMatrix,
    left: &mut DenseMatrix,
    right: &mut DenseMatrix,
    lo: usize,
    hi: usize,
) -> Result<()> {
    let s = w.submatrix(lo, hi, lo, hi);
    let gram = s.matmul_at_b(&s)?.symmetrized();
    let (v, _) = crate::eigen::jacobi_eigh(&gram, 1e-14)?;
    // Columns of S·V are orthogonal, so its QR is the remaining factor pair.
    let sv = s.matmul(&v)?;
    let (q, r) = householder_qr(&sv);
    for i in lo..hi {
        for j in lo..hi {
            w.set(i, j, if j >= i { r.get(i - lo, j - lo) } else { 0.0 });
        }
    }
    mix_columns(left, lo, &q);
    mix_columns(right, lo, &v);
    Ok(())
}

/// Columns [lo, lo + t.rows) of `m` multiplied on the right by `t`.
fn mix_columns(m: &mut DenseMatrix, lo: usize, t: &DenseMatrix) {
    let l = t.n_rows();
    let mut vals = vec![0.0; l];
    for r in 0..m.n_rows() {
        for (j, v) in vals.iter_mut().enumerate() {
            *v = m.get(r, lo + j);
        }
        for j in 0..t.n_cols() {
            let s: f64 = vals.iter().enumerate().map(|(k, v)| v * t.get(k, j)).sum();
            m.set(r, lo + j, s);
        }
    }
}

/// Reflector sequence triangularizing `a`, plus the transformed matrix.
pub(crate) fn qr_reflectors(a: &DenseMatrix) -> (Vec<HouseholderReflector>, DenseMatrix) {
    let m = a.n_rows();
    let n = a.n_cols();
    let mut r_full = a.clone();
    let mut reflectors = Vec::new();
    for k in 0..n.min(m.saturating_sub(1)) {
        if let Ok(h) = householder_annihilating(&r_full.column(k), k) {
            h.apply_left(&mut r_full);
            reflectors.push(h);
        }
    }
    (reflectors, r_full)
}

/// Thin Householder QR with nonnegative diagonal: a = q·r.
pub fn householder_qr(a: &DenseMatrix) -> (DenseMatrix, DenseMatrix) {
    let m = a.n_rows();
    let n = a.n_cols();
    debug_assert!(m >= n);
    let (reflectors, r_full) = qr_reflectors(a);
    let mut q = DenseMatrix::eye(m, n);
    for h in reflectors.iter().rev() {
        h.apply_left(&mut q);
    }
    let mut r = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            r.set(i, j, r_full.get(i, j));
        }
    }
    for i in 0..n {
        if r.get(i, i) < 0.0 {
            for j in i..n {
                r.set(i, j, -r.get(i, j));
            }
            for row in 0..m {
                q.set(row, i, -q.get(row, i));
            }
        }
    }
    (q, r)
}

/// Exact SVD of the isolated block [[f, g], [0, h]] at rows/cols (i, i+1).
///
/// The sweeps stall on couplings between near-equal singular values, so
/// once deflation isolates a pair it is finished in closed form. The
/// rotation algebra follows Demmel & Kahan's two-by-two triangular SVD,
/// which stays fully accurate without forming the Gram matrix.
fn solve_isolated_pair(w: &mut DenseMatrix, left: &mut DenseMatrix, right: &mut DenseMatrix, i: usize) {
    let f = w.get(i, i);
    let g = w.get(i, i + 1);
    let h = w.get(i + 1, i + 1);
    let s = svd_upper_2x2(f, g, h);

    // W ← Lrot·W·Rrot, so the accumulated factors pick up Lrotᵗ and Rrot.
    rotate_cols(right, i, s.csr, s.snr);
    rotate_cols(left, i, s.csl, s.snl);
    w.set(i, i, s.ssmax);
    w.set(i + 1, i + 1, s.ssmin);
    w.set(i, i + 1, 0.0);
    w.set(i + 1, i, 0.0);
}

/// Mix columns (j, j+1): (a, b) → (c·a + s·b, −s·a + c·b).
fn rotate_cols(m: &mut DenseMatrix, j: usize, c: f64, s: f64) {
    for r in 0..m.n_rows() {
        let a = m.get(r, j);
        let b = m.get(r, j + 1);
        m.set(r, j, c * a + s * b);
        m.set(r, j + 1, -s * a + c * b);
    }
}

struct TwoByTwoSvd {
    ssmin: f64,
    ssmax: f64,
    csl: f64,
    snl: f64,
    csr: f64,
    snr: f64,
}

/// Singular value decomposition of [[f, g], [0, h]]:
/// [csl, snl; -snl, csl]·[f, g; 0, h]·[csr, -snr; snr, csr] = diag(ssmax, ssmin).
fn svd_upper_2x2(f: f64, g: f64, h: f64) -> TwoByTwoSvd {
    let sign = |a: f64, b: f64| if b >= 0.0 { a.abs() } else { -a.abs() };

    let mut ft = f;
    let mut fa = f.abs();
    let mut ht = h;
    let mut ha = h.abs();
    // Which magnitude dominates: 1 = |f|, 2 = |g|, 3 = |h|.
    let mut pmax = 1;
    let swap = ha > fa;
    if swap {
        pmax = 3;
        std::mem::swap(&mut ft, &mut ht);
        std::mem::swap(&mut fa, &mut ha);
    }
    let gt = g;
    let ga = g.abs();

    let (ssmin, ssmax, clt, slt, crt, srt);
    if ga == 0.0 {
        ssmin = ha;
        ssmax = fa;
        clt = 1.0;
        crt = 1.0;
        slt = 0.0;
        srt = 0.0;
    } else {
        let mut gasmal = true;
        let mut out: Option<(f64, f64, f64, f64, f64, f64)> = None;
        if ga > fa {
            pmax = 2;
            if fa / ga < f64::EPSILON {
                gasmal = false;
                let ssmax_l = ga;
                let ssmin_l = if ha > 1.0 { fa / (ga / ha) } else { (fa / ga) * ha };
                out = Some((ssmin_l, ssmax_l, 1.0, ht / gt, ft / gt, 1.0));
            }
        }
        if gasmal {
            let d = fa - ha;
            let l = if d == fa { 1.0 } else { d / fa };
            let m = gt / ft;
            let t = 2.0 - l;
            let mm = m * m;
            let tt = t * t;
            let s = (tt + mm).sqrt();
            let r = if l == 0.0 { m.abs() } else { (l * l + mm).sqrt() };
            let a = 0.5 * (s + r);
            let ssmin_l = ha / a;
            let ssmax_l = fa * a;
            let tv = if mm == 0.0 {
                if l == 0.0 {
                    sign(2.0, ft) * sign(1.0, gt)
                } else {
                    gt / sign(d, ft) + m / t
                }
            } else {
                (m / (s + t) + m / (r + l)) * (1.0 + a)
            };
            let lv = (tv * tv + 4.0).sqrt();
            let crt_l = 2.0 / lv;
            let srt_l = tv / lv;
            let clt_l = (crt_l + srt_l * m) / a;
            let slt_l = (ht / ft) * srt_l / a;
            out = Some((ssmin_l, ssmax_l, clt_l, slt_l, crt_l, srt_l));
        }
        let (a, b, c, d2, e, f2) = out.expect("one branch filled");
        ssmin = a;
        ssmax = b;
        clt = c;
        slt = d2;
        crt = e;
        srt = f2;
    }
    let (csl, snl, csr, snr) = if swap {
        (srt, crt, slt, clt)
    } else {
        (clt, slt, crt, srt)
    };
    let tsign = match pmax {
        1 => sign(1.0, csr) * sign(1.0, csl) * sign(1.0, f),
        2 => sign(1.0, snr) * sign(1.0, csl) * sign(1.0, g),
        _ => sign(1.0, snr) * sign(1.0, snl) * sign(1.0, h),
    };
    TwoByTwoSvd {
        ssmax: sign(ssmax, tsign),
        ssmin: sign(ssmin, tsign * sign(1.0, f) * sign(1.0, h)),
        csl,
        snl,
        csr,
        snr,
    }
}

/// Right-multiply by the 2-column reflector acting on columns (j, j+1).
fn apply_pair_right(m: &mut DenseMatrix, j: usize, h: &HouseholderReflector) {
    let u = h.unit_vector();
    for r in 0..m.n_rows() {
        let a = m.get(r, j);
        let b = m.get(r, j + 1);
        let dot2 = 2.0 * (a * u[0] + b * u[1]);
        m.set(r, j, a - dot2 * u[0]);
        m.set(r, j + 1, b - dot2 * u[1]);
    }
}

/// Left-multiply by the 2-row reflector acting on rows (i, i+1).
fn apply_pair_left(m: &mut DenseMatrix, i: usize, h: &HouseholderReflector) {
    let u = h.unit_vector();
    let n = m.n_cols();
    for c in 0..n {
        let a = m.get(i, c);
        let b = m.get(i + 1, c);
        let dot2 = 2.0 * (a * u[0] + b * u[1]);
        m.set(i, c, a - dot2 * u[0]);
        m.set(i + 1, c, b - dot2 * u[1]);
    }
}

/// Full dense SVD: bidiagonalize then diagonalize, transposing internally
/// when the input is wider than tall.
pub fn svd_dense(a: &DenseMatrix, tol: f64) -> Result<EconomySvd> {
    svd_dense_with(a, tol, DEFAULT_MAX_SWEEPS)
}

pub fn svd_dense_with(a: &DenseMatrix, tol: f64, max_sweeps: usize) -> Result<EconomySvd> {
    if a.n_rows() < a.n_cols() {
        let svd = svd_dense_with(&a.transpose(), tol, max_sweeps)?;
        return Ok(EconomySvd {
            u_slice: svd.v_slice,
            d: svd.d,
            v_slice: svd.u_slice,
        });
    }
    if a.n_cols() == 0 || a.frobenius_sq() == 0.0 {
        return Ok(EconomySvd {
            u_slice: DenseMatrix::zeros(a.n_rows(), 0),
            d: Diagonal::new(vec![]),
            v_slice: DenseMatrix::zeros(a.n_cols(), 0),
        });
    }
    let b = bidiagonalize(a)?;
    qr_diagonalize(&b, tol, max_sweeps)
}

/// Economy SVD by the Gram route: diagonalize AᵗA and set U = A·V·D^(-1/2).
///
/// Eigenvalues at or below the rank cutoff are discarded, so D is always
/// invertible even when AᵗA is singular.
pub fn economy_svd_gram(a: &DenseMatrix) -> Result<EconomySvd> {
    if a.n_rows() < a.n_cols() {
        return Err(Error::Dimension(format!(
            "gram route needs rows >= cols, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let gram = a.matmul_at_b(a)?;
    gram_route(&gram, |v| a.matmul(v))
}

/// Gram route over a sparse matrix; A is never densified.
pub fn economy_svd_gram_sparse(a: &SparseTriplets, budget: &MemoryBudget) -> Result<EconomySvd> {
    if a.n_rows() < a.n_cols() {
        return Err(Error::Dimension(format!(
            "gram route needs rows >= cols, got {}x{}",
            a.n_rows(),
            a.n_cols()
        )));
    }
    let gram = a.gram_full(budget)?;
    gram_route(&gram, |v| a.mul_dense(v))
}

fn gram_route<F>(gram: &DenseMatrix, apply_a: F) -> Result<EconomySvd>
where
    F: Fn(&DenseMatrix) -> Result<DenseMatrix>,
{
    let (q, eigvals) = jacobi_eigh(gram, 1e-14)?;
    let max_eig = eigvals.values().first().copied().unwrap_or(0.0).max(0.0);
    let rank = eigvals
        .values()
        .iter()
        .take_while(|&&l| l > TOL_RANK * max_eig && l > 0.0)
        .count();
    let n = gram.n_rows();
    let mut v_slice = DenseMatrix::zeros(n, rank);
    let mut d = Vec::with_capacity(rank);
    for j in 0..rank {
        d.push(eigvals.get(j).sqrt());
        v_slice.set_column(j, &q.column(j));
    }
    let av = apply_a(&v_slice)?;
    let inv_d: Vec<f64> = d.iter().map(|s| 1.0 / s).collect();
    let u_slice = av.scale_columns(&inv_d)?;
    Ok(EconomySvd {
        u_slice,
        d: Diagonal::new(d),
        v_slice,
    })
}
