//! Generalized Householder transformations on 2-block splits.
//!
//! A block reflector is built from orthonormal slices U (n×m), V ((N−n)×m)
//! and diagonal α, β with α² + β² = I:
//!
//! ```text
//! H = [ I − U(I−α)Uᵗ    U β Vᵗ        ]
//!     [ V β Uᵗ          I − V(I+α)Vᵗ  ]
//! ```
//!
//! H is symmetric and involutive, and with (α, β) = (C, S) from the GSVD of
//! a block column it annihilates the lower block. Applications are always
//! block products against the slices; the N×N matrix is only materialized
//! by diagnostics and tests.

use crate::baseline::householder_qr;
use crate::dense::{DenseMatrix, Diagonal};
use crate::eigen::jacobi_eigh;
use crate::error::{Error, Result};

/// Relative eigenvalue cutoff declaring a factor rank-deficient.
const TOL_RANK: f64 = 1e-12;

/// Orthonormality tolerance accepted at construction.
const ORTHO_TOL: f64 = 1e-11;

/// A two-block transformation defined by its action on a stacked pair.
pub trait TwoBlockTransform {
    fn apply_left(&self, top: &DenseMatrix, bottom: &DenseMatrix)
        -> Result<(DenseMatrix, DenseMatrix)>;

    /// Row split (n, N − n) this transformation acts on.
    fn split(&self) -> (usize, usize);
}

/// Generalized Householder reflector (symmetric, involutive).
#[derive(Debug, Clone)]
pub struct BlockReflector {
    u_slice: DenseMatrix,
    v_slice: DenseMatrix,
    alpha: Diagonal,
    beta: Diagonal,
}

impl BlockReflector {
    pub fn new(
        u_slice: DenseMatrix,
        v_slice: DenseMatrix,
        alpha: Diagonal,
        beta: Diagonal,
    ) -> Result<Self> {
        let m = alpha.len();
        if beta.len() != m || u_slice.n_cols() != m || v_slice.n_cols() != m {
            return Err(Error::Dimension("reflector slice widths disagree".into()));
        }
        if u_slice.n_rows() < m || v_slice.n_rows() < m {
            return Err(Error::Dimension(
                "reflector slices need at least as many rows as columns".into(),
            ));
        }
        let u_defect = u_slice.orthonormality_defect();
        if u_defect > ORTHO_TOL {
            return Err(Error::Orthogonality(u_defect));
        }
        let v_defect = v_slice.orthonormality_defect();
        if v_defect > ORTHO_TOL {
            return Err(Error::Orthogonality(v_defect));
        }
        for i in 0..m {
            let unit = alpha.get(i) * alpha.get(i) + beta.get(i) * beta.get(i);
            if (unit - 1.0).abs() > 1e-12 {
                return Err(Error::Dimension(format!(
                    "alpha^2 + beta^2 deviates from identity by {:e}",
                    (unit - 1.0).abs()
                )));
            }
        }
        Ok(Self {
            u_slice,
            v_slice,
            alpha,
            beta,
        })
    }

    pub fn u_slice(&self) -> &DenseMatrix {
        &self.u_slice
    }

    pub fn v_slice(&self) -> &DenseMatrix {
        &self.v_slice
    }

    pub fn alpha(&self) -> &Diagonal {
        &self.alpha
    }

    pub fn beta(&self) -> &Diagonal {
        &self.beta
    }

    pub fn rank(&self) -> usize {
        self.alpha.len()
    }

    /// Full H as a dense matrix — diagnostics and algebra tests only.
    pub fn materialize(&self) -> DenseMatrix {
        let n = self.u_slice.n_rows();
        let q = self.v_slice.n_rows();
        let mut h = DenseMatrix::identity(n + q);
        let m = self.rank();
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.u_slice.get(a, k) * (1.0 - self.alpha.get(k)) * self.u_slice.get(b, k);
                }
                h.set(a, b, h.get(a, b) - acc);
            }
            for b in 0..q {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.u_slice.get(a, k) * self.beta.get(k) * self.v_slice.get(b, k);
                }
                h.set(a, n + b, acc);
                h.set(n + b, a, acc);
            }
        }
        for a in 0..q {
            for b in 0..q {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.v_slice.get(a, k) * (1.0 + self.alpha.get(k)) * self.v_slice.get(b, k);
                }
                h.set(n + a, n + b, h.get(n + a, n + b) - acc);
            }
        }
        h
    }
}

impl TwoBlockTransform for BlockReflector {
    /// Block products only: top' = top + U(β·Vᵗbottom − (I−α)·Uᵗtop),
    /// bottom' = bottom + V(β·Uᵗtop − (I+α)·Vᵗbottom).
    fn apply_left(
        &self,
        top: &DenseMatrix,
        bottom: &DenseMatrix,
    ) -> Result<(DenseMatrix, DenseMatrix)> {
        if top.n_rows() != self.u_slice.n_rows() || bottom.n_rows() != self.v_slice.n_rows() {
            return Err(Error::Dimension(format!(
                "stacked rows ({}, {}) do not match reflector split ({}, {})",
                top.n_rows(),
                bottom.n_rows(),
                self.u_slice.n_rows(),
                self.v_slice.n_rows()
            )));
        }
        if top.n_cols() != bottom.n_cols() {
            return Err(Error::Dimension("stacked blocks must share columns".into()));
        }
        let w1 = self.u_slice.matmul_at_b(top)?;
        let w2 = self.v_slice.matmul_at_b(bottom)?;
        let mut top_mix = DenseMatrix::zeros(self.rank(), top.n_cols());
        let mut bottom_mix = DenseMatrix::zeros(self.rank(), top.n_cols());
        for k in 0..self.rank() {
            let a = self.alpha.get(k);
            let b = self.beta.get(k);
            for c in 0..top.n_cols() {
                top_mix.set(k, c, b * w2.get(k, c) - (1.0 - a) * w1.get(k, c));
                bottom_mix.set(k, c, b * w1.get(k, c) - (1.0 + a) * w2.get(k, c));
            }
        }
        let top_out = top.add(&self.u_slice.matmul(&top_mix)?)?;
        let bottom_out = bottom.add(&self.v_slice.matmul(&bottom_mix)?)?;
        Ok((top_out, bottom_out))
    }

    fn split(&self) -> (usize, usize) {
        (self.u_slice.n_rows(), self.v_slice.n_rows())
    }
}

/// Proper-rotation variant built from the same GSVD factors; annihilates
/// the lower block when multiplied from the left and tends to the identity
/// as β → 0, which the damped trace iteration relies on.
#[derive(Debug, Clone)]
pub struct BlockRotation {
    u_slice: DenseMatrix,
    v_slice: DenseMatrix,
    alpha: Diagonal,
    beta: Diagonal,
}

impl BlockRotation {
    pub fn rank(&self) -> usize {
        self.alpha.len()
    }

    /// Full R as a dense matrix — diagnostics and tests only.
    pub fn materialize(&self) -> DenseMatrix {
        let n = self.u_slice.n_rows();
        let q = self.v_slice.n_rows();
        let mut r = DenseMatrix::identity(n + q);
        let m = self.rank();
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.u_slice.get(a, k) * (1.0 - self.alpha.get(k)) * self.u_slice.get(b, k);
                }
                r.set(a, b, r.get(a, b) - acc);
            }
            for b in 0..q {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.u_slice.get(a, k) * self.beta.get(k) * self.v_slice.get(b, k);
                }
                r.set(a, n + b, acc);
                r.set(n + b, a, -acc);
            }
        }
        for a in 0..q {
            for b in 0..q {
                let mut acc = 0.0;
                for k in 0..m {
                    acc += self.v_slice.get(a, k) * (1.0 - self.alpha.get(k)) * self.v_slice.get(b, k);
                }
                r.set(n + a, n + b, r.get(n + a, n + b) - acc);
            }
        }
        r
    }
}

impl TwoBlockTransform for BlockRotation {
    fn apply_left(
        &self,
        top: &DenseMatrix,
        bottom: &DenseMatrix,
    ) -> Result<(DenseMatrix, DenseMatrix)> {
        if top.n_rows() != self.u_slice.n_rows() || bottom.n_rows() != self.v_slice.n_rows() {
            return Err(Error::Dimension("stacked rows do not match rotation split".into()));
        }
        let w1 = self.u_slice.matmul_at_b(top)?;
        let w2 = self.v_slice.matmul_at_b(bottom)?;
        let mut top_mix = DenseMatrix::zeros(self.rank(), top.n_cols());
        let mut bottom_mix = DenseMatrix::zeros(self.rank(), top.n_cols());
        for k in 0..self.rank() {
            let a = self.alpha.get(k);
            let b = self.beta.get(k);
            for c in 0..top.n_cols() {
                top_mix.set(k, c, b * w2.get(k, c) - (1.0 - a) * w1.get(k, c));
                bottom_mix.set(k, c, -b * w1.get(k, c) - (1.0 - a) * w2.get(k, c));
            }
        }
        let top_out = top.add(&self.u_slice.matmul(&top_mix)?)?;
        let bottom_out = bottom.add(&self.v_slice.matmul(&bottom_mix)?)?;
        Ok((top_out, bottom_out))
    }

    fn split(&self) -> (usize, usize) {
        (self.u_slice.n_rows(), self.v_slice.n_rows())
    }
}

/// Unitary-symmetric factorization a = unitary · symmetric.
#[derive(Debug)]
pub struct PolarPair {
    pub unitary: DenseMatrix,
    pub symmetric: DenseMatrix,
}

/// Polar factors via the eigendecomposition of aᵗa.
pub fn polar_factor(a: &DenseMatrix) -> Result<PolarPair> {
    let gram = a.matmul_at_b(a)?.symmetrized();
    let (q, eigvals) = jacobi_eigh(&gram, 1e-14)?;
    let max_eig = eigvals.values().first().copied().unwrap_or(0.0);
    let min_eig = eigvals.values().last().copied().unwrap_or(0.0);
    if max_eig <= 0.0 || min_eig <= TOL_RANK * max_eig {
        return Err(Error::Rank(format!(
            "polar factor needs full column rank (eigenvalue range {:e}..{:e})",
            min_eig, max_eig
        )));
    }
    let roots: Vec<f64> = eigvals.values().iter().map(|l| l.sqrt()).collect();
    let inv_roots: Vec<f64> = roots.iter().map(|r| 1.0 / r).collect();
    let symmetric = q
        .scale_columns(&roots)?
        .matmul_a_bt(&q)?
        .symmetrized();
    let unitary = a.matmul(&q.scale_columns(&inv_roots)?)?.matmul_a_bt(&q)?;
    Ok(PolarPair { unitary, symmetric })
}

/// Simultaneous factorization a11 = U·C·Xᵗ, a21 = V·S·Xᵗ with C² + S² = I.
#[derive(Debug)]
pub struct GsvdPair {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
    pub c: Diagonal,
    pub s: Diagonal,
    pub x: DenseMatrix,
}

/// GSVD of a block column via the orthonormal factor of the stacked matrix
/// and a CS-style splitting: C comes from the eigenvalues of Q₁ᵗQ₁, the
/// factor slices from Householder orthonormalizations so they stay exactly
/// orthonormal whatever the conditioning.
pub fn gsvd_pair(a11: &DenseMatrix, a21: &DenseMatrix) -> Result<GsvdPair> {
    let m = a11.n_cols();
    if a21.n_cols() != m {
        return Err(Error::Dimension("blocks must share a column count".into()));
    }
    if a21.n_rows() < m || a11.n_rows() < m {
        return Err(Error::Dimension(format!(
            "each block needs at least {} rows for orthonormal slices",
            m
        )));
    }
    let stacked = a11.vcat(a21)?;
    let (q_st, r_st) = householder_qr(&stacked);
    // Rank of the stack from the triangular factor's Gram spectrum.
    let r_gram = r_st.matmul_at_b(&r_st)?.symmetrized();
    let (_, r_eigs) = jacobi_eigh(&r_gram, 1e-14)?;
    let max_eig = r_eigs.values().first().copied().unwrap_or(0.0);
    let min_eig = r_eigs.values().last().copied().unwrap_or(0.0);
    if max_eig <= 0.0 || min_eig <= TOL_RANK * max_eig {
        return Err(Error::Rank(format!(
            "stacked block column is rank deficient (eigenvalue range {:e}..{:e})",
            min_eig, max_eig
        )));
    }

    let p = a11.n_rows();
    let q1 = q_st.submatrix(0, p, 0, m);
    let q2 = q_st.submatrix(p, p + a21.n_rows(), 0, m);

    let e1 = q1.matmul_at_b(&q1)?.symmetrized();
    let (wc, lambdas) = jacobi_eigh(&e1, 1e-14)?;
    let c: Vec<f64> = lambdas
        .values()
        .iter()
        .map(|l| l.clamp(0.0, 1.0).sqrt())
        .collect();

    // u_i ≈ (Q₁·wc)_i / c_i: Householder QR orthonormalizes in descending-c
    // order, completing directions whose cosine is too small to resolve.
    let bu = q1.matmul(&wc)?;
    let (u, _) = householder_qr(&bu);

    // s_i is measured as the column norm of Q₂·wc, which stays accurate for
    // sines far below sqrt(machine epsilon).
    let bv = q2.matmul(&wc)?;
    let s: Vec<f64> = (0..m)
        .map(|j| bv.column(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    // Orthonormalize largest sine first so unresolved columns cannot
    // contaminate the resolved ones, then restore the pairing order.
    let mut bv_rev = DenseMatrix::zeros(bv.n_rows(), m);
    for j in 0..m {
        bv_rev.set_column(j, &bv.column(m - 1 - j));
    }
    let (v_rev, _) = householder_qr(&bv_rev);
    let mut v = DenseMatrix::zeros(bv.n_rows(), m);
    for j in 0..m {
        v.set_column(j, &v_rev.column(m - 1 - j));
    }

    // a11 = Q₁·R = (Q₁·wc)(wcᵗ·R) ≈ U·C·Xᵗ with Xᵗ = wcᵗ·R.
    let x = r_st.matmul_at_b(&wc)?;
    Ok(GsvdPair {
        u,
        v,
        c: Diagonal::new(c),
        s: Diagonal::new(s),
        x,
    })
}

/// Reflector annihilating the lower block of the stacked column:
/// the GSVD factors are used directly as (U, V, α, β) = (U, V, C, S).
pub fn annihilating_reflector(a11: &DenseMatrix, a21: &DenseMatrix) -> Result<BlockReflector> {
    let gsvd = gsvd_pair(a11, a21)?;
    BlockReflector::new(gsvd.u, gsvd.v, gsvd.c, gsvd.s)
}

/// Rotation annihilating the lower block; unlike the reflector it tends to
/// the identity as the lower block tends to zero.
pub fn annihilating_rotation(a11: &DenseMatrix, a21: &DenseMatrix) -> Result<BlockRotation> {
    let gsvd = gsvd_pair(a11, a21)?;
    Ok(BlockRotation {
        u_slice: gsvd.u,
        v_slice: gsvd.v,
        alpha: gsvd.c,
        beta: gsvd.s,
    })
}

/// Free-function form of applying a reflector to a stacked block pair.
pub fn apply_reflector_left(
    h: &BlockReflector,
    top: &DenseMatrix,
    bottom: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix)> {
    h.apply_left(top, bottom)
}

/// Two-sided similarity T·G·Tᵗ on a symmetric 2x2-blocked matrix given by
/// (g11, g12, g22), computed entirely through block products.
pub fn similarity_on_gram(
    t: &dyn TwoBlockTransform,
    g11: &DenseMatrix,
    g12: &DenseMatrix,
    g22: &DenseMatrix,
) -> Result<(DenseMatrix, DenseMatrix, DenseMatrix)> {
    let g21 = g12.transpose();
    let (z11, z21) = t.apply_left(g11, &g21)?;
    let (z12, z22) = t.apply_left(g12, g22)?;
    // Right factor via transposes: (Z·Tᵗ)ᵗ = T·Zᵗ.
    let (y11, y12) = t.apply_left(&z11.transpose(), &z12.transpose())?;
    let (_, y22) = t.apply_left(&z21.transpose(), &z22.transpose())?;
    Ok((
        y11.transpose().symmetrized(),
        y12.transpose(),
        y22.transpose().symmetrized(),
    ))
}

/// Candidate (α, β) for the polar-route annihilation, as symmetric
/// matrices, along with the achieved residual ‖β·S11 − α·S21‖_F.
#[derive(Debug)]
pub struct PolarRouteParams {
    pub alpha: DenseMatrix,
    pub beta: DenseMatrix,
    pub residual: f64,
}

/// The polar route's parameter formula with both exponent conventions;
/// the one with the smaller annihilation residual is returned. Scalar and
/// commuting inputs annihilate exactly; noncommuting ones generally leave a
/// residual, which is why the GSVD route is the canonical one.
pub fn polar_route_alpha(s11: &DenseMatrix, s21: &DenseMatrix) -> Result<PolarRouteParams> {
    let m = s11.n_rows();
    if s11.n_cols() != m || s21.n_rows() != m || s21.n_cols() != m {
        return Err(Error::Dimension("polar route needs square symmetric blocks".into()));
    }
    let (q11, l11) = jacobi_eigh(&s11.symmetrized(), 1e-14)?;
    let max11 = l11.values().first().copied().unwrap_or(0.0);
    let min11 = l11.values().last().copied().unwrap_or(0.0);
    if max11 <= 0.0 || min11 <= TOL_RANK * max11 {
        return Err(Error::Rank("polar route needs invertible S11".into()));
    }

    let powered = |exponent: f64| -> Result<DenseMatrix> {
        let powers: Vec<f64> = l11.values().iter().map(|l| l.powf(exponent)).collect();
        Ok(q11.scale_columns(&powers)?.matmul_a_bt(&q11)?.symmetrized())
    };
    let mut best: Option<PolarRouteParams> = None;
    for exponent in [2.0, -2.0] {
        let s11_pow = powered(exponent)?;
        let inner = s21.matmul(&s11_pow)?.matmul(s21)?;
        let argument = DenseMatrix::identity(m).add(&inner)?.symmetrized();
        let (qa, la) = jacobi_eigh(&argument, 1e-14)?;
        let alpha_vals: Vec<f64> = la.values().iter().map(|l| 1.0 / l.sqrt()).collect();
        let beta_vals: Vec<f64> = la
            .values()
            .iter()
            .map(|l| (1.0 - 1.0 / l).max(0.0).sqrt())
            .collect();
        let alpha = qa.scale_columns(&alpha_vals)?.matmul_a_bt(&qa)?.symmetrized();
        let beta = qa.scale_columns(&beta_vals)?.matmul_a_bt(&qa)?.symmetrized();
        let residual = beta.matmul(s11)?.sub(&alpha.matmul(s21)?)?.frobenius();
        if best.as_ref().is_none_or(|b| residual < b.residual) {
            best = Some(PolarRouteParams { alpha, beta, residual });
        }
    }
    Ok(best.expect("both candidates evaluated"))
}

/// Result of the complete (not economy) blockwise decomposition.
#[derive(Debug)]
pub struct FullBlockSvd {
    pub left_history: Vec<BlockReflector>,
    pub right_history: Vec<BlockReflector>,
    pub a11: DenseMatrix,
    pub a12: DenseMatrix,
    pub a21: DenseMatrix,
    pub a22: DenseMatrix,
    pub rounds: usize,
}

impl FullBlockSvd {
    pub fn off_diagonal_fraction(&self) -> f64 {
        let off = self.a12.frobenius_sq() + self.a21.frobenius_sq();
        let total = off + self.a11.frobenius_sq() + self.a22.frobenius_sq();
        if total == 0.0 {
            0.0
        } else {
            (off / total).sqrt()
        }
    }
}

/// Alternate left-annihilation of block 21 and right-annihilation of block
/// 12 until both off-diagonal blocks are negligible. The transformation
/// history is returned; the full N×N product never exists.
pub fn full_block_svd(
    a11: DenseMatrix,
    a12: DenseMatrix,
    a21: DenseMatrix,
    a22: DenseMatrix,
    tol: f64,
    max_rounds: usize,
) -> Result<FullBlockSvd> {
    let mut state = FullBlockSvd {
        left_history: Vec::new(),
        right_history: Vec::new(),
        a11,
        a12,
        a21,
        a22,
        rounds: 0,
    };
    loop {
        if state.off_diagonal_fraction() <= tol {
            return Ok(state);
        }
        if state.rounds >= max_rounds {
            return Err(Error::Convergence {
                what: "full blockwise decomposition".into(),
                residual: state.off_diagonal_fraction(),
            });
        }
        // Left: annihilate block 21.
        if state.a21.frobenius_sq() > 0.0 {
            let h = annihilating_reflector(&state.a11, &state.a21)?;
            let (n11, n21) = h.apply_left(&state.a11, &state.a21)?;
            let (n12, n22) = h.apply_left(&state.a12, &state.a22)?;
            state.a11 = n11;
            state.a21 = n21;
            state.a12 = n12;
            state.a22 = n22;
            state.left_history.push(h);
        }
        // Right: annihilate block 12 by acting on the transposed split.
        if state.a12.frobenius_sq() > 0.0 {
            let h = annihilating_reflector(&state.a11.transpose(), &state.a12.transpose())?;
            let (t11, t12) = h.apply_left(&state.a11.transpose(), &state.a12.transpose())?;
            let (t21, t22) = h.apply_left(&state.a21.transpose(), &state.a22.transpose())?;
            state.a11 = t11.transpose();
            state.a12 = t12.transpose();
            state.a21 = t21.transpose();
            state.a22 = t22.transpose();
            state.right_history.push(h);
        }
        state.rounds += 1;
    }
}
