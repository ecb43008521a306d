//! Cyclic Jacobi eigensolver for symmetric matrices.
//!
//! Reused by the Gram-route economy SVD, the reduced-matrix step of the
//! trace maximizer, polar factors and the GSVD splitting.

use crate::dense::{DenseMatrix, Diagonal};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Relative asymmetry allowed before the input is rejected.
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigendecomposition a = q·diag(eigvals)·qᵗ with eigvals non-increasing.
pub fn jacobi_eigh(a: &DenseMatrix, tol: f64) -> Result<(DenseMatrix, Diagonal)> {
    let n = a.n_rows();
    if n != a.n_cols() {
        return Err(Error::Dimension(format!(
            "eigensolve needs a square matrix, got {}x{}",
            n,
            a.n_cols()
        )));
    }
    let scale = a.max_abs();
    let asym = a.max_asymmetry();
    if asym > SYMMETRY_TOL * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::Symmetry(asym));
    }
    if n == 0 {
        return Ok((DenseMatrix::zeros(0, 0), Diagonal::new(vec![])));
    }

    let mut w = a.symmetrized();
    // Accumulate Vᵗ so rotations touch contiguous rows.
    let mut vt = DenseMatrix::identity(n);
    let fro = w.frobenius();
    if fro == 0.0 {
        return Ok((DenseMatrix::identity(n), Diagonal::new(vec![0.0; n])));
    }
    let target = tol * fro;
    let rot_eps = target / (2.0 * n as f64);

    let mut converged = false;
    let mut residual = off_mass(&w);
    for _ in 0..MAX_SWEEPS {
        residual = off_mass(&w);
        if residual <= target {
            converged = true;
            break;
        }
        for p in 0..n - 1 {
            for q in p + 1..n {
                let apq = w.get(p, q);
                if apq.abs() <= rot_eps {
                    continue;
                }
                let app = w.get(p, p);
                let aqq = w.get(q, q);
                let theta = 0.5 * (aqq - app) / apq;
                let t = if theta == 0.0 {
                    1.0
                } else {
                    let sgn = if theta > 0.0 { 1.0 } else { -1.0 };
                    sgn / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                rotate_rows(&mut w, p, q, s, tau);
                // Restore columns from rows; the similarity keeps symmetry.
                for j in 0..n {
                    let wpj = w.get(p, j);
                    let wqj = w.get(q, j);
                    w.set(j, p, wpj);
                    w.set(j, q, wqj);
                }
                w.set(p, p, app - t * apq);
                w.set(q, q, aqq + t * apq);
                w.set(p, q, 0.0);
                w.set(q, p, 0.0);

                rotate_rows(&mut vt, p, q, s, tau);
            }
        }
    }
    if !converged {
        return Err(Error::Convergence {
            what: "jacobi eigensolve".into(),
            residual,
        });
    }

    // Sort descending; ties keep the earlier index first.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        w.get(j, j)
            .partial_cmp(&w.get(i, i))
            .expect("finite eigenvalues")
            .then(i.cmp(&j))
    });
    let eigvals = Diagonal::new(order.iter().map(|&i| w.get(i, i)).collect());
    let mut q = DenseMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        for r in 0..n {
            q.set(r, dst, vt.get(src, r));
        }
    }
    Ok((q, eigvals))
}

/// Apply the (p, q) rotation to rows p and q using the rearranged update
/// g - s(h + g·tau), h + s(g - h·tau).
fn rotate_rows(m: &mut DenseMatrix, p: usize, q: usize, s: f64, tau: f64) {
    let n = m.n_cols();
    debug_assert!(p < q);
    let (head, tail) = m.values_mut().split_at_mut(q * n);
    let row_p = &mut head[p * n..(p + 1) * n];
    let row_q = &mut tail[..n];
    for (g, h) in row_p.iter_mut().zip(row_q.iter_mut()) {
        let gp = *g;
        let hq = *h;
        *g = gp - s * (hq + gp * tau);
        *h = hq + s * (gp - hq * tau);
    }
}

fn off_mass(w: &DenseMatrix) -> f64 {
    let n = w.n_rows();
    let mut sum = 0.0;
    for p in 0..n {
        for q in 0..n {
            if p != q {
                let x = w.get(p, q);
                sum += x * x;
            }
        }
    }
    sum.sqrt()
}
