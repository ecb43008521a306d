//! Synthetic term-document style matrices.
//!
//! Column (term) popularity follows a Zipf law, rows (documents) are
//! uniform, and values are small positive counts that grow with term
//! popularity, so after norm-sorting the squared mass concentrates in the
//! leading columns the way a real occurrence matrix does.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::sparse::SparseTriplets;

/// Deterministic sparse count matrix with Zipf-distributed column
/// popularity; `density` is the fraction of cells that end up nonzero.
pub fn gen_synthetic(
    rows: usize,
    cols: usize,
    density: f64,
    zipf_exponent: f64,
    seed: u64,
) -> Result<SparseTriplets> {
    if rows == 0 || cols == 0 {
        return Err(Error::Usage("matrix dimensions must be positive".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::Usage(format!(
            "density must lie in (0, 1], got {}",
            density
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Zipf weights over popularity ranks, assigned to shuffled column ids
    // so sorting by norm is not a no-op.
    let weights: Vec<f64> = (0..cols).map(|r| 1.0 / ((r + 1) as f64).powf(zipf_exponent)).collect();
    let mut cumulative = Vec::with_capacity(cols);
    let mut acc = 0.0;
    for w in &weights {
        acc += w;
        cumulative.push(acc);
    }
    let total_weight = acc;
    let mut rank_to_col: Vec<usize> = (0..cols).collect();
    for i in (1..cols).rev() {
        let j = rng.gen_range(0..=i);
        rank_to_col.swap(i, j);
    }

    let target = ((rows * cols) as f64 * density).round().max(1.0) as usize;
    let mut taken = vec![false; rows * cols];
    let mut cells: Vec<(usize, usize, usize)> = Vec::with_capacity(target);
    let mut attempts = 0usize;
    while cells.len() < target && attempts < 64 * target + 1024 {
        attempts += 1;
        let u: f64 = rng.gen_range(0.0..total_weight);
        let rank = cumulative.partition_point(|&c| c < u).min(cols - 1);
        let col = rank_to_col[rank];
        let row = rng.gen_range(0..rows);
        if !taken[row * cols + col] {
            taken[row * cols + col] = true;
            cells.push((row, col, rank));
        }
    }
    // Highly skewed draws can stall on the last few distinct cells; fill
    // deterministically from the free cells.
    if cells.len() < target {
        for (idx, slot) in taken.iter_mut().enumerate() {
            if cells.len() >= target {
                break;
            }
            if !*slot {
                *slot = true;
                let (row, col) = (idx / cols, idx % cols);
                let rank = rank_to_col.iter().position(|&c| c == col).unwrap_or(cols - 1);
                cells.push((row, col, rank));
            }
        }
    }

    let entries = cells
        .into_iter()
        .map(|(row, col, rank)| {
            let mut count = 1.0 + geometric(&mut rng, 0.45);
            // Popular terms repeat within a document more often.
            if rng.gen::<f64>() < weights[rank] / weights[0] {
                count += geometric(&mut rng, 0.25);
            }
            (row, col, count)
        })
        .collect();
    SparseTriplets::new(rows, cols, entries)
}

fn geometric(rng: &mut ChaCha8Rng, p_continue: f64) -> f64 {
    let mut n = 0.0;
    while n < 40.0 && rng.gen::<f64>() < p_continue {
        n += 1.0;
    }
    n
}
