//! Trace-maximizing subspace iteration on the Gram blocks.
//!
//! Each step isolates the subspace coupling the two diagonal Gram blocks
//! (the SVD of the off-diagonal block), diagonalizes a small reduced
//! matrix, and applies the resulting orthogonal map so that the trace
//! captured by block 11 never decreases. Damped annihilation steps are
//! mixed in on square iteration counts to accelerate convergence, measured
//! as the nondiagonality (nuclear norm) of the off-diagonal block.

use std::time::Instant;

use crate::baseline::{householder_qr, qr_reflectors};
use crate::dense::{DenseMatrix, Diagonal};
pub use crate::eigen::jacobi_eigh;
use crate::error::{Error, Result};
use crate::reflector::{annihilating_rotation, similarity_on_gram, TwoBlockTransform};

/// Relative singular-value cutoff for the working-subspace rank.
const TOL_RANK: f64 = 1e-12;

/// Closed form for the 2x2 symmetric eigenproblem: returns
/// x ∈ [0, 1] such that [[√(1−x²), x], [x, −√(1−x²)]] diagonalizes
/// [[a, b], [b, c]], satisfying α·b = ½·√(1−α²)·(a−c) with α = 1−2x².
pub fn two_by_two_x(a: f64, b: f64, c: f64) -> f64 {
    let delta = a - c;
    let radius = (delta * delta + 4.0 * b * b).sqrt();
    if radius == 0.0 {
        // Degenerate a = c, b = 0: any rotation works; 0 by convention.
        return 0.0;
    }
    if b >= 0.0 {
        ((radius - delta) / (2.0 * radius)).sqrt()
    } else {
        ((radius + delta) / (2.0 * radius)).sqrt()
    }
}

/// Apply the 2x2 rotation-reflection for a given x; returns the
/// transformed (d0, off, d1).
pub fn two_by_two_apply(a: f64, b: f64, c: f64, x: f64) -> (f64, f64, f64) {
    let y = (1.0 - x * x).max(0.0).sqrt();
    let u = [[y, x], [x, -y]];
    let m = [[a, b], [b, c]];
    let mut um = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for (k, row) in m.iter().enumerate() {
                um[i][j] += u[i][k] * row[j];
            }
        }
    }
    let mut umu = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            for (k, col) in u.iter().enumerate() {
                umu[i][j] += um[i][k] * col[j];
            }
        }
    }
    (umu[0][0], umu[0][1], umu[1][1])
}

/// SVD slices of the off-diagonal Gram block: orthonormal u1, u2 spanning
/// its row and column spaces and the nonzero singular values, rank-cut at
/// the relative tolerance.
#[derive(Debug, Clone)]
pub struct OffdiagSvd {
    pub u1: DenseMatrix,
    pub u2: DenseMatrix,
    pub d_n: Diagonal,
}

/// SVD of g12 by the small-side Gram route: eigenvectors of the smaller of
/// g12·g12ᵗ and g12ᵗ·g12, the other side orthonormalized by Householder QR
/// so both slices are exactly orthonormal.
pub fn offdiag_svd(g12: &DenseMatrix) -> Result<OffdiagSvd> {
    let k = g12.n_rows();
    let r = g12.n_cols();
    let empty = |m: usize| OffdiagSvd {
        u1: DenseMatrix::zeros(k, m),
        u2: DenseMatrix::zeros(r, m),
        d_n: Diagonal::new(vec![]),
    };
    if k == 0 || r == 0 || g12.frobenius_sq() == 0.0 {
        return Ok(empty(0));
    }
    if k <= r {
        let gram = g12.matmul_a_bt(g12)?.symmetrized();
        let (q, lambdas) = jacobi_eigh(&gram, 1e-14)?;
        let sigmas: Vec<f64> = lambdas.values().iter().map(|l| l.max(0.0).sqrt()).collect();
        let m = rank_of(&sigmas);
        if m == 0 {
            return Ok(empty(0));
        }
        let u1 = q.submatrix(0, k, 0, m);
        let b = g12.matmul_at_b(&u1)?;
        let (u2, _) = householder_qr(&b);
        Ok(OffdiagSvd {
            u1,
            u2,
            d_n: Diagonal::new(sigmas[..m].to_vec()),
        })
    } else {
        let gram = g12.matmul_at_b(g12)?.symmetrized();
        let (q, lambdas) = jacobi_eigh(&gram, 1e-14)?;
        let sigmas: Vec<f64> = lambdas.values().iter().map(|l| l.max(0.0).sqrt()).collect();
        let m = rank_of(&sigmas);
        if m == 0 {
            return Ok(empty(0));
        }
        let u2 = q.submatrix(0, r, 0, m);
        let b = g12.matmul(&u2)?;
        let (u1, _) = householder_qr(&b);
        Ok(OffdiagSvd {
            u1,
            u2,
            d_n: Diagonal::new(sigmas[..m].to_vec()),
        })
    }
}

fn rank_of(sigmas: &[f64]) -> usize {
    let max = sigmas.first().copied().unwrap_or(0.0);
    if max <= 0.0 {
        return 0;
    }
    sigmas.iter().take_while(|&&s| s > TOL_RANK * max).count()
}

/// Nondiagonality: the sum of the singular values (nuclear norm) of the
/// off-diagonal block; the iteration's convergence metric.
pub fn nondiagonality(g12: &DenseMatrix) -> f64 {
    let k = g12.n_rows();
    let r = g12.n_cols();
    if k == 0 || r == 0 || g12.frobenius_sq() == 0.0 {
        return 0.0;
    }
    let gram = if k <= r {
        g12.matmul_a_bt(g12)
    } else {
        g12.matmul_at_b(g12)
    };
    let gram = gram.expect("same matrix").symmetrized();
    let (_, lambdas) = jacobi_eigh(&gram, 1e-13).expect("symmetric by construction");
    lambdas.values().iter().map(|l| l.max(0.0).sqrt()).sum()
}

/// Orthonormal complement: columns completing `u` to a square orthogonal
/// matrix; zero-width when `u` is already square.
pub fn complement_basis(u: &DenseMatrix) -> Result<DenseMatrix> {
    let rows = u.n_rows();
    let cols = u.n_cols();
    if cols > rows {
        return Err(Error::Dimension(format!(
            "complement needs column count <= row count, got {}x{}",
            rows, cols
        )));
    }
    if cols > 0 {
        let defect = u.orthonormality_defect();
        if defect > 1e-8 {
            return Err(Error::Orthogonality(defect));
        }
    }
    if cols == rows {
        return Ok(DenseMatrix::zeros(rows, 0));
    }
    // Q from the QR of u spans u in its leading columns; the trailing ones
    // are the complement.
    let (reflectors, _) = qr_reflectors(u);
    let mut tail = DenseMatrix::zeros(rows, rows - cols);
    for j in 0..rows - cols {
        tail.set(cols + j, j, 1.0);
    }
    for h in reflectors.iter().rev() {
        h.apply_left(&mut tail);
    }
    Ok(tail)
}

/// The embedding bases of one trace step: u1, u2 with their orthonormal
/// complements and the coupling singular values.
#[derive(Debug)]
pub struct SubspaceBasis {
    pub u1: DenseMatrix,
    pub u1_bar: DenseMatrix,
    pub u2: DenseMatrix,
    pub u2_bar: DenseMatrix,
    pub d_n: Diagonal,
}

impl SubspaceBasis {
    pub fn from_offdiag(g12: &DenseMatrix) -> Result<Self> {
        let off = offdiag_svd(g12)?;
        let u1_bar = complement_basis(&off.u1)?;
        let u2_bar = complement_basis(&off.u2)?;
        Ok(Self {
            u1: off.u1,
            u1_bar,
            u2: off.u2,
            u2_bar,
            d_n: off.d_n,
        })
    }
}

/// The 2m×2m reduced matrix [[m̃11, d_n], [d_n, m̃22]] whose
/// eigendecomposition drives one trace step.
#[derive(Debug)]
pub struct ReducedMatrix {
    pub m11_tilde: DenseMatrix,
    pub m22_tilde: DenseMatrix,
    pub d_n: Diagonal,
}

impl ReducedMatrix {
    pub fn assemble(&self) -> DenseMatrix {
        let m = self.d_n.len();
        let mut out = DenseMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            for j in 0..m {
                out.set(i, j, self.m11_tilde.get(i, j));
                out.set(m + i, m + j, self.m22_tilde.get(i, j));
            }
            out.set(i, m + i, self.d_n.get(i));
            out.set(m + i, i, self.d_n.get(i));
        }
        out
    }
}

/// Accumulated orthogonal factor and current Gram blocks of the iteration.
#[derive(Debug, Clone)]
pub struct TraceIterState {
    /// First block-column slice of the accumulated factor (n × cut).
    pub v1: DenseMatrix,
    /// Second block-column slice (n × (n − cut)).
    pub v2: DenseMatrix,
    pub g11: DenseMatrix,
    pub g12: DenseMatrix,
    pub g22: DenseMatrix,
    pub iteration: usize,
    pub trace11: f64,
    pub nondiag: f64,
}

impl TraceIterState {
    /// Start from Gram blocks with the identity as accumulated factor.
    pub fn new(g11: DenseMatrix, g12: DenseMatrix, g22: DenseMatrix) -> Result<Self> {
        let k = g11.n_rows();
        let rest = g22.n_rows();
        if g11.n_cols() != k || g22.n_cols() != rest || g12.n_rows() != k || g12.n_cols() != rest {
            return Err(Error::Dimension("gram block shapes disagree".into()));
        }
        let n = k + rest;
        let v1 = DenseMatrix::eye(n, k);
        let mut v2 = DenseMatrix::zeros(n, rest);
        for j in 0..rest {
            v2.set(k + j, j, 1.0);
        }
        let trace11 = g11.trace();
        let nondiag = nondiagonality(&g12);
        Ok(Self {
            v1,
            v2,
            g11,
            g12,
            g22,
            iteration: 0,
            trace11,
            nondiag,
        })
    }

    pub fn cut(&self) -> usize {
        self.g11.n_rows()
    }

    pub fn size(&self) -> usize {
        self.g11.n_rows() + self.g22.n_rows()
    }

    pub fn trace22(&self) -> f64 {
        self.g22.trace()
    }

    pub fn total_trace(&self) -> f64 {
        self.trace11 + self.g22.trace()
    }

    /// Apply an orthogonal two-block similarity G ← T·G·Tᵗ and accumulate
    /// the factor into the block-column slices.
    pub fn apply_similarity(&self, t: &dyn TwoBlockTransform) -> Result<TraceIterState> {
        let (g11, g12, g22) = similarity_on_gram(t, &self.g11, &self.g12, &self.g22)?;
        // v ← v·Tᵗ, computed as (T·vᵗ)ᵗ on the stacked row blocks.
        let (w1, w2) = t.apply_left(&self.v1.transpose(), &self.v2.transpose())?;
        let trace11 = g11.trace();
        let nondiag = nondiagonality(&g12);
        Ok(TraceIterState {
            v1: w1.transpose(),
            v2: w2.transpose(),
            g11,
            g12,
            g22,
            iteration: self.iteration,
            trace11,
            nondiag,
        })
    }
}

/// One trace-maximization step.
///
/// The off-diagonal block's SVD picks the coupled subspaces, the reduced
/// matrix is diagonalized with the top-m eigenvalues routed to block 1,
/// and the composite orthogonal map (acting as the identity on the
/// complements) updates the Gram blocks and the accumulated factor.
pub fn trace_step(state: &TraceIterState) -> Result<TraceIterState> {
    let off = offdiag_svd(&state.g12)?;
    let m = off.d_n.len();
    if m == 0 {
        let mut next = state.clone();
        next.iteration += 1;
        next.nondiag = 0.0;
        return Ok(next);
    }
    let u1 = &off.u1;
    let u2 = &off.u2;

    let m11 = u1.matmul_at_b(&state.g11.matmul(u1)?)?.symmetrized();
    let m22 = u2.matmul_at_b(&state.g22.matmul(u2)?)?.symmetrized();
    let reduced = ReducedMatrix {
        m11_tilde: m11,
        m22_tilde: m22,
        d_n: off.d_n.clone(),
    };
    let (q, _) = jacobi_eigh(&reduced.assemble(), 1e-14)?;
    // Eigenvalues arrive descending, so the first m columns carry the top
    // eigenvalues into block 1; ties keep the earlier index.
    let alpha1 = q.submatrix(0, m, 0, m);
    let beta1 = q.submatrix(m, 2 * m, 0, m);
    let beta2 = q.submatrix(0, m, m, 2 * m);
    let alpha2 = q.submatrix(m, 2 * m, m, 2 * m);

    let map = CompositeMap {
        u1,
        u2,
        alpha1: &alpha1,
        beta1: &beta1,
        beta2: &beta2,
        alpha2: &alpha2,
    };

    // Z = Tᵗ·G, one stacked column block at a time.
    let g21 = state.g12.transpose();
    let (z11, z21) = map.left_t(&state.g11, &g21)?;
    let (z12, z22) = map.left_t(&state.g12, &state.g22)?;
    // G' = Z·T, one row block at a time.
    let (g11, g12) = map.right(&z11, &z12)?;
    let (_, g22) = map.right(&z21, &z22)?;
    let (v1, v2) = map.right(&state.v1, &state.v2)?;

    let g11 = g11.symmetrized();
    let g22 = g22.symmetrized();
    let trace11 = g11.trace();
    let nondiag = nondiagonality(&g12);
    Ok(TraceIterState {
        v1,
        v2,
        g11,
        g12,
        g22,
        iteration: state.iteration + 1,
        trace11,
        nondiag,
    })
}

/// The step's orthogonal map in within-block coordinates:
/// T = [[I − u1(I−α1)u1ᵗ, u1·β2·u2ᵗ], [u2·β1·u1ᵗ, I − u2(I−α2)u2ᵗ]].
/// Equal to the embedding S·Ũ up to an orthogonal change of basis inside
/// each block column, so traces, spectra and the coupling block's singular
/// values match the embedded form while the complements never materialize.
struct CompositeMap<'a> {
    u1: &'a DenseMatrix,
    u2: &'a DenseMatrix,
    alpha1: &'a DenseMatrix,
    beta1: &'a DenseMatrix,
    beta2: &'a DenseMatrix,
    alpha2: &'a DenseMatrix,
}

impl CompositeMap<'_> {
    /// Tᵗ·[x1; x2] via thin products.
    fn left_t(
        &self,
        x1: &DenseMatrix,
        x2: &DenseMatrix,
    ) -> Result<(DenseMatrix, DenseMatrix)> {
        let w1 = self.u1.matmul_at_b(x1)?;
        let w2 = self.u2.matmul_at_b(x2)?;
        let mix1 = self
            .alpha1
            .matmul_at_b(&w1)?
            .sub(&w1)?
            .add(&self.beta1.matmul_at_b(&w2)?)?;
        let mix2 = self
            .alpha2
            .matmul_at_b(&w2)?
            .sub(&w2)?
            .add(&self.beta2.matmul_at_b(&w1)?)?;
        Ok((
            x1.add(&self.u1.matmul(&mix1)?)?,
            x2.add(&self.u2.matmul(&mix2)?)?,
        ))
    }

    /// [z1 | z2]·T via thin products.
    fn right(&self, z1: &DenseMatrix, z2: &DenseMatrix) -> Result<(DenseMatrix, DenseMatrix)> {
        let t1 = z1.matmul(self.u1)?;
        let t2 = z2.matmul(self.u2)?;
        let mix1 = t1.matmul(self.alpha1)?.sub(&t1)?.add(&t2.matmul(self.beta1)?)?;
        let mix2 = t2.matmul(self.alpha2)?.sub(&t2)?.add(&t1.matmul(self.beta2)?)?;
        Ok((
            z1.add(&mix1.matmul_a_bt(self.u1)?)?,
            z2.add(&mix2.matmul_a_bt(self.u2)?)?,
        ))
    }
}

/// Outcome of a damped annihilation step; `applied` is false when the
/// construction was impossible and the state passed through unchanged.
#[derive(Debug)]
pub struct DampedOutcome {
    pub state: TraceIterState,
    pub applied: bool,
}

/// Annihilation of the off-diagonal block damped by 1/n: the rotation is
/// built as if the whole block were divided by n, then applied (unscaled)
/// as a two-sided orthogonal similarity.
pub fn damped_annihilation_step(state: &TraceIterState, n: usize) -> Result<DampedOutcome> {
    if n == 0 {
        return Err(Error::Usage("damping factor must be at least 1".into()));
    }
    if state.g12.frobenius_sq() == 0.0 {
        return Ok(DampedOutcome {
            state: state.clone(),
            applied: false,
        });
    }
    let scaled_g21 = state.g12.transpose().scale(1.0 / n as f64);
    match annihilating_rotation(&state.g11, &scaled_g21) {
        Ok(rotation) => Ok(DampedOutcome {
            state: state.apply_similarity(&rotation)?,
            applied: true,
        }),
        // Rank or shape trouble degrades to an identity step.
        Err(Error::Rank(_)) | Err(Error::Dimension(_)) => Ok(DampedOutcome {
            state: state.clone(),
            applied: false,
        }),
        Err(e) => Err(e),
    }
}

/// One row of the iteration log: the block traces, the
/// nondiagonality, and the wall time of the step.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub trace11: f64,
    pub trace22: f64,
    pub nondiag: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default)]
pub struct IterationLog {
    pub records: Vec<IterationRecord>,
    pub notices: Vec<String>,
}

/// Iteration failure carrying the state and log accumulated so far.
#[derive(Debug)]
pub enum TraceError {
    Convergence {
        state: Box<TraceIterState>,
        log: IterationLog,
        ratio: f64,
    },
    Inner(Error),
}

impl From<TraceError> for Error {
    fn from(e: TraceError) -> Self {
        match e {
            TraceError::Convergence { ratio, .. } => Error::Convergence {
                what: "trace maximization".into(),
                residual: ratio,
            },
            TraceError::Inner(inner) => inner,
        }
    }
}

/// Repeat trace steps, adding a damped annihilation with n = i at every
/// perfect-square iteration count i, until nondiagonality/trace11 falls to
/// ratio_tol times its initial value.
pub fn iterate(
    state0: TraceIterState,
    ratio_tol: f64,
    max_iters: usize,
) -> std::result::Result<(TraceIterState, IterationLog), TraceError> {
    if !(ratio_tol > 0.0 && ratio_tol < 1.0) {
        return Err(TraceError::Inner(Error::Usage(
            "ratio_tol must lie in (0, 1)".into(),
        )));
    }
    let mut log = IterationLog::default();
    let mut state = state0;
    log.records.push(IterationRecord {
        iteration: state.iteration,
        trace11: state.trace11,
        trace22: state.trace22(),
        nondiag: state.nondiag,
        seconds: 0.0,
    });
    if state.nondiag == 0.0 || state.trace11 <= 0.0 {
        return Ok((state, log));
    }
    let initial_ratio = state.nondiag / state.trace11;

    for step in 1..=max_iters {
        let started = Instant::now();
        state = trace_step(&state).map_err(TraceError::Inner)?;
        if is_perfect_square(step) {
            let outcome = damped_annihilation_step(&state, step).map_err(TraceError::Inner)?;
            if !outcome.applied {
                log.notices
                    .push(format!("iteration {}: damped annihilation skipped", step));
            }
            state = outcome.state;
        }
        log.records.push(IterationRecord {
            iteration: step,
            trace11: state.trace11,
            trace22: state.trace22(),
            nondiag: state.nondiag,
            seconds: started.elapsed().as_secs_f64(),
        });
        let ratio = state.nondiag / state.trace11;
        if ratio <= ratio_tol * initial_ratio {
            return Ok((state, log));
        }
    }
    let ratio = state.nondiag / state.trace11;
    Err(TraceError::Convergence {
        state: Box::new(state),
        log,
        ratio,
    })
}

fn is_perfect_square(n: usize) -> bool {
    let r = (n as f64).sqrt().round() as usize;
    r * r == n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded_matrix(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut x = seed.wrapping_mul(0x9E3779B97F4A7C15) | 1;
        let mut v = Vec::with_capacity(rows * cols);
        for _ in 0..rows * cols {
            x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            v.push(((x >> 11) as f64) / ((1u64 << 53) as f64) * 2.0 - 1.0);
        }
        DenseMatrix::from_vec(rows, cols, v).unwrap()
    }

    /// Gram blocks of AᵗA for a random A, split at `cut`.
    fn gram_state(rows: usize, cols: usize, cut: usize, seed: u64) -> TraceIterState {
        let a = seeded_matrix(rows, cols, seed);
        let g = a.matmul_at_b(&a).unwrap().symmetrized();
        TraceIterState::new(
            g.submatrix(0, cut, 0, cut),
            g.submatrix(0, cut, cut, cols),
            g.submatrix(cut, cols, cut, cols),
        )
        .unwrap()
    }

    fn assemble(state: &TraceIterState) -> DenseMatrix {
        let top = state.g11.hcat(&state.g12).unwrap();
        let bottom = state.g12.transpose().hcat(&state.g22).unwrap();
        top.vcat(&bottom).unwrap()
    }

    #[test]
    fn two_by_two_x_symmetric_case() {
        let x = two_by_two_x(2.0, 1.0, 2.0);
        assert!((x - 0.5f64.sqrt()).abs() <= 1e-15);
    }

    #[test]
    fn two_by_two_x_already_diagonal() {
        assert_eq!(two_by_two_x(3.0, 0.0, 1.0), 0.0);
        assert_eq!(two_by_two_x(1.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn two_by_two_x_diagonalizes_known_triple() {
        let x = two_by_two_x(3.0, 1.0, 1.0);
        let (_, off, _) = two_by_two_apply(3.0, 1.0, 1.0, x);
        assert!(off.abs() <= 1e-12);
        // Consistency with the alpha-form of the condition.
        let alpha = 1.0 - 2.0 * x * x;
        let lhs = alpha * 1.0;
        let rhs = 0.5 * (1.0 - alpha * alpha).max(0.0).sqrt() * (3.0 - 1.0);
        assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn two_by_two_x_random_including_negative_b() {
        let mut x = 7u64;
        for _ in 0..200 {
            let mut next = || {
                x = x.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((x >> 11) as f64) / ((1u64 << 53) as f64) * 6.0 - 3.0
            };
            let (a, b, c) = (next(), next(), next());
            let xs = two_by_two_x(a, b, c);
            assert!((0.0..=1.0).contains(&xs));
            let (d0, off, d1) = two_by_two_apply(a, b, c, xs);
            let scale = a.abs().max(b.abs()).max(c.abs()).max(1.0);
            assert!(off.abs() <= 1e-12 * scale, "off {off} for ({a}, {b}, {c})");
            // Eigenvalues agree with the closed form.
            let mean = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let mut got = [d0, d1];
            got.sort_by(|p, q| q.partial_cmp(p).unwrap());
            assert!((got[0] - (mean + rad)).abs() <= 1e-12 * scale);
            assert!((got[1] - (mean - rad)).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn offdiag_svd_zero_block() {
        let out = offdiag_svd(&DenseMatrix::zeros(3, 5)).unwrap();
        assert_eq!(out.d_n.len(), 0);
        assert_eq!(out.u1.n_cols(), 0);
        assert_eq!(out.u2.n_cols(), 0);
    }

    #[test]
    fn offdiag_svd_padded_diagonal() {
        let mut g12 = DenseMatrix::zeros(2, 4);
        g12.set(0, 0, 3.0);
        g12.set(1, 1, 1.0);
        let out = offdiag_svd(&g12).unwrap();
        assert_eq!(out.d_n.len(), 2);
        assert!((out.d_n.get(0) - 3.0).abs() <= 1e-12);
        assert!((out.d_n.get(1) - 1.0).abs() <= 1e-12);
        assert!((out.u1.get(0, 0).abs() - 1.0).abs() <= 1e-12);
        assert!((out.u2.get(1, 1).abs() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn offdiag_svd_diagonalizes_random_block() {
        let g12 = seeded_matrix(5, 9, 17);
        let out = offdiag_svd(&g12).unwrap();
        assert!(out.u1.orthonormality_defect() <= 1e-12);
        assert!(out.u2.orthonormality_defect() <= 1e-12);
        assert!(out.d_n.is_non_increasing());
        let coupled = out.u1.matmul_at_b(&g12.matmul(&out.u2).unwrap()).unwrap();
        let scale = g12.max_abs();
        for i in 0..out.d_n.len() {
            for j in 0..out.d_n.len() {
                let want = if i == j { out.d_n.get(i) } else { 0.0 };
                assert!((coupled.get(i, j) - want).abs() <= 1e-10 * scale);
            }
        }
        // Values cross-checked against the dense SVD oracle.
        let oracle = crate::baseline::svd_dense(&g12, 1e-13).unwrap();
        for i in 0..out.d_n.len() {
            assert!((out.d_n.get(i) - oracle.d.get(i)).abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn complement_of_coordinate_vector() {
        let mut u = DenseMatrix::zeros(2, 1);
        u.set(0, 0, 1.0);
        let c = complement_basis(&u).unwrap();
        assert_eq!((c.n_rows(), c.n_cols()), (2, 1));
        assert!((c.get(1, 0).abs() - 1.0).abs() <= 1e-14);
        assert!(c.get(0, 0).abs() <= 1e-14);
    }

    #[test]
    fn complement_of_square_orthogonal_is_empty() {
        let (q, _) = householder_qr(&seeded_matrix(4, 4, 3));
        let c = complement_basis(&q).unwrap();
        assert_eq!((c.n_rows(), c.n_cols()), (4, 0));
    }

    #[test]
    fn complement_completes_random_slice() {
        let (q, _) = householder_qr(&seeded_matrix(8, 3, 5));
        let c = complement_basis(&q).unwrap();
        let full = q.hcat(&c).unwrap();
        assert!(full.orthonormality_defect() <= 1e-11);
    }

    #[test]
    fn complement_rejects_non_orthonormal() {
        let u = seeded_matrix(5, 2, 9);
        assert!(matches!(complement_basis(&u), Err(Error::Orthogonality(_))));
    }

    #[test]
    fn subspace_basis_invariants() {
        let g12 = seeded_matrix(6, 4, 21);
        let basis = SubspaceBasis::from_offdiag(&g12).unwrap();
        let full1 = basis.u1.hcat(&basis.u1_bar).unwrap();
        let full2 = basis.u2.hcat(&basis.u2_bar).unwrap();
        assert!(full1.orthonormality_defect() <= 1e-11);
        assert!(full2.orthonormality_defect() <= 1e-11);
        let coupled = basis.u1.matmul_at_b(&g12.matmul(&basis.u2).unwrap()).unwrap();
        for i in 0..basis.d_n.len() {
            for j in 0..basis.d_n.len() {
                let want = if i == j { basis.d_n.get(i) } else { 0.0 };
                assert!((coupled.get(i, j) - want).abs() <= 1e-10 * g12.max_abs());
            }
        }
    }

    #[test]
    fn nondiagonality_examples() {
        assert_eq!(nondiagonality(&DenseMatrix::zeros(4, 2)), 0.0);
        let mut padded = DenseMatrix::zeros(3, 4);
        padded.set(0, 0, 1.0);
        padded.set(1, 1, 2.0);
        assert!((nondiagonality(&padded) - 3.0).abs() <= 1e-12);
    }

    #[test]
    fn trace_step_fixed_point_on_block_diagonal() {
        let mut state = gram_state(12, 8, 3, 31);
        state.g12 = DenseMatrix::zeros(3, 5);
        state.nondiag = 0.0;
        let next = trace_step(&state).unwrap();
        assert_eq!(next.iteration, state.iteration + 1);
        assert_eq!(next.g11, state.g11);
        assert_eq!(next.g22, state.g22);
        assert_eq!(next.nondiag, 0.0);
    }

    #[test]
    fn trace_step_scalar_blocks_match_closed_form() {
        // cut = 1 of a 2x2 Gram: one step must capture the top eigenvalue,
        // exactly like the closed-form 2x2 diagonalization.
        let a = seeded_matrix(6, 2, 37);
        let g = a.matmul_at_b(&a).unwrap().symmetrized();
        let (a11, b, c22) = (g.get(0, 0), g.get(0, 1), g.get(1, 1));
        let state = TraceIterState::new(
            g.submatrix(0, 1, 0, 1),
            g.submatrix(0, 1, 1, 2),
            g.submatrix(1, 2, 1, 2),
        )
        .unwrap();
        let next = trace_step(&state).unwrap();
        let x = two_by_two_x(a11, b, c22);
        let (d0, _, d1) = two_by_two_apply(a11, b, c22, x);
        assert!((next.trace11 - d0.max(d1)).abs() <= 1e-10 * state.total_trace());
        assert!(next.nondiag <= 1e-10 * state.total_trace());
    }

    #[test]
    fn trace_step_monotone_and_conservative() {
        let mut state = gram_state(14, 10, 4, 41);
        let total0 = state.total_trace();
        let spectrum0 = jacobi_eigh(&assemble(&state), 1e-13).unwrap().1;
        for _ in 0..20 {
            let next = trace_step(&state).unwrap();
            assert!(next.trace11 >= state.trace11 - 1e-9 * total0);
            assert!((next.total_trace() - total0).abs() <= 1e-9 * total0);
            state = next;
        }
        // The assembled Gram spectrum is preserved across all steps.
        let spectrum1 = jacobi_eigh(&assemble(&state), 1e-13).unwrap().1;
        for (a, b) in spectrum0.values().iter().zip(spectrum1.values()) {
            assert!((a - b).abs() <= 1e-8 * spectrum0.get(0).abs());
        }
        // The accumulated factor stays orthogonal.
        let v = state.v1.hcat(&state.v2).unwrap();
        assert!(v.orthonormality_defect() <= 1e-10);
    }

    #[test]
    fn damped_step_identity_on_block_diagonal() {
        let mut state = gram_state(12, 8, 3, 43);
        state.g12 = DenseMatrix::zeros(3, 5);
        state.nondiag = 0.0;
        let out = damped_annihilation_step(&state, 4).unwrap();
        assert!(!out.applied);
        assert_eq!(out.state.g11, state.g11);
    }

    #[test]
    fn damped_step_tends_to_identity() {
        let state = gram_state(14, 9, 3, 47);
        let before = assemble(&state);
        let out = damped_annihilation_step(&state, 1_000_000).unwrap();
        assert!(out.applied);
        let after = assemble(&out.state);
        let drift = after.sub(&before).unwrap().frobenius();
        assert!(drift <= 1e-6 * before.frobenius(), "drift {drift}");
    }

    #[test]
    fn damped_step_scalar_reduces_offdiagonal() {
        let g = DenseMatrix::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let state = TraceIterState::new(
            g.submatrix(0, 1, 0, 1),
            g.submatrix(0, 1, 1, 2),
            g.submatrix(1, 2, 1, 2),
        )
        .unwrap();
        let out = damped_annihilation_step(&state, 1).unwrap();
        assert!(out.applied);
        assert!(out.state.g12.get(0, 0).abs() < 1.0);
        let total0 = state.total_trace();
        assert!((out.state.total_trace() - total0).abs() <= 1e-9 * total0);
    }

    #[test]
    fn iterate_block_diagonal_stops_immediately() {
        let mut state = gram_state(12, 8, 3, 53);
        state.g12 = DenseMatrix::zeros(3, 5);
        state.nondiag = 0.0;
        let (final_state, log) = iterate(state, 1e-4, 100).unwrap();
        assert_eq!(final_state.iteration, 0);
        assert_eq!(log.records.len(), 1);
    }

    #[test]
    fn iterate_converges_and_logs() {
        let state = gram_state(40, 16, 5, 59);
        let total0 = state.total_trace();
        let (final_state, log) = iterate(state, 1e-3, 200).unwrap();
        assert!(final_state.nondiag / final_state.trace11 <= 1e-3 * (log.records[0].nondiag / log.records[0].trace11));
        // trace11 monotone over trace steps; damped steps are exempt but in
        // practice the logged sequence is checked to never fall measurably.
        for pair in log.records.windows(2) {
            assert!(pair[1].trace11 >= pair[0].trace11 - 1e-6 * total0);
        }
        assert!((final_state.total_trace() - total0).abs() <= 1e-9 * total0);
        assert_eq!(log.records.last().unwrap().iteration, final_state.iteration);
    }

    #[test]
    fn iterate_reports_convergence_failure_with_log() {
        let state = gram_state(40, 16, 5, 61);
        match iterate(state, 1e-9, 2) {
            Err(TraceError::Convergence { log, ratio, .. }) => {
                assert_eq!(log.records.len(), 3);
                assert!(ratio > 0.0);
            }
            other => panic!("expected convergence failure, got {other:?}"),
        }
    }
}
