//! End-to-end orchestration of the blockwise decomposition:
//! orient → sort → cut → Gram blocks → initial annihilation →
//! trace iteration → dense SVD of the dominant block → economy assembly.

use std::time::Instant;

use crate::baseline::{economy_svd_gram_sparse, svd_dense};
use crate::dense::DenseMatrix;
use crate::eigen::jacobi_eigh;
use crate::error::{Error, Result};
use crate::memory::MemoryBudget;
use crate::partition::{choose_cut, ensure_portrait, partition_report, sort_by_norms, PartitionReport};
use crate::report::ConfigEcho;
use crate::routes;
use crate::sparse::{BlockId, G22Block, Permutation, SparseTriplets};
use crate::trace::{iterate, IterationLog, IterationRecord, TraceError, TraceIterState};

/// Knobs of a decomposition run.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub one_based: bool,
    /// Squared-norm share the first column block must hold.
    pub fraction: f64,
    /// Stop when nondiagonality/trace11 falls to this times its initial value.
    pub ratio_tol: f64,
    pub max_iters: usize,
    pub tol_rank: f64,
    pub budget: MemoryBudget,
    pub seed: u64,
    /// Additionally run the complete blockwise decomposition.
    pub full: bool,
    /// Annihilation route name from the registry.
    pub route: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            one_based: false,
            fraction: 2.0 / 3.0,
            ratio_tol: 1e-4,
            max_iters: 500,
            tol_rank: 1e-12,
            budget: MemoryBudget::new(1 << 30),
            seed: 0,
            full: false,
            route: "gsvd".into(),
        }
    }
}

impl RunConfig {
    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            fraction: self.fraction,
            ratio_tol: self.ratio_tol,
            max_iters: self.max_iters,
            tol_rank: self.tol_rank,
            budget_bytes: self.budget.bytes(),
            seed: self.seed,
            route: self.route.clone(),
        }
    }
}

/// Everything a run produces. Factor slices live in the sorted portrait
/// frame; the permutations and flag map them back to the input order.
#[derive(Debug)]
pub struct DecomposeResult {
    pub singular_values: Vec<f64>,
    pub u_slice: DenseMatrix,
    pub v_slice: DenseMatrix,
    pub iteration_log: IterationLog,
    pub partition_report: Option<PartitionReport>,
    pub row_permutation: Permutation,
    pub col_permutation: Permutation,
    pub transposed: bool,
    pub converged: bool,
    pub full_spectrum: Option<Vec<f64>>,
    pub notices: Vec<String>,
}

/// The nine-step blockwise decomposition of the dominant block.
pub fn run_decompose(input: &SparseTriplets, cfg: &RunConfig) -> Result<DecomposeResult> {
    let (portrait, transposed) = ensure_portrait(input);
    let (row_p, col_p) = sort_by_norms(&portrait);
    let sorted = portrait.permute(&row_p, &col_p)?;
    let mut notices = Vec::new();

    let partition = match choose_cut(&sorted, cfg.fraction) {
        Ok(p) => p,
        Err(Error::DegenerateCut { fraction, n_cols }) => {
            // No useful 2x2 split exists; fall back to the plain baseline.
            notices.push(format!(
                "degenerate cut (fraction {} needs all {} columns); falling back to the gram-route baseline",
                fraction, n_cols
            ));
            let svd = economy_svd_gram_sparse(&sorted, &cfg.budget)?;
            return Ok(DecomposeResult {
                singular_values: svd.d.values().to_vec(),
                u_slice: svd.u_slice,
                v_slice: svd.v_slice,
                iteration_log: IterationLog::default(),
                partition_report: None,
                row_permutation: row_p,
                col_permutation: col_p,
                transposed,
                converged: true,
                full_spectrum: None,
                notices,
            });
        }
        Err(e) => return Err(e),
    };
    let report = partition_report(&sorted, &partition)?;

    let grams = sorted.gram_blockwise(&partition, &cfg.budget)?;
    let g22 = match grams.g22 {
        G22Block::Full(m) => m,
        G22Block::Diagonal(_) => {
            return Err(Error::MemoryBudget {
                block: "G22 (the trace iteration needs the dense block)".into(),
                needed: crate::memory::bytes_for(
                    sorted.n_cols() - partition.col_cut,
                    sorted.n_cols() - partition.col_cut,
                ),
                available: cfg.budget.bytes().saturating_sub(crate::memory::current_bytes()),
            })
        }
    };
    let mut state = TraceIterState::new(grams.g11, grams.g12, g22)?;

    let mut driver_log = IterationLog::default();
    driver_log.records.push(IterationRecord {
        iteration: 0,
        trace11: state.trace11,
        trace22: state.trace22(),
        nondiag: state.nondiag,
        seconds: 0.0,
    });

    // Initial Householder annihilation of the off-diagonal Gram block.
    let cut = partition.col_cut;
    let rest = sorted.n_cols() - cut;
    let mut log_offset = 0;
    if cut <= rest && state.g12.frobenius_sq() > 0.0 {
        let started = Instant::now();
        let route = routes::lookup(&cfg.route)?;
        match route.build(&state.g11, &state.g12.transpose()) {
            Ok(outcome) => {
                if let Some(note) = outcome.note {
                    notices.push(note);
                }
                state = state.apply_similarity(&outcome.reflector)?;
                driver_log.records.push(IterationRecord {
                    iteration: 1,
                    trace11: state.trace11,
                    trace22: state.trace22(),
                    nondiag: state.nondiag,
                    seconds: started.elapsed().as_secs_f64(),
                });
                log_offset = 1;
            }
            Err(Error::Rank(why)) => {
                notices.push(format!("initial annihilation skipped: {}", why));
            }
            Err(e) => return Err(e),
        }
    } else if cut > rest {
        notices.push(format!(
            "initial annihilation skipped: cut {} exceeds remaining columns {}",
            cut, rest
        ));
    }

    let (final_state, converged) = match iterate(state, cfg.ratio_tol, cfg.max_iters) {
        Ok((s, tlog)) => {
            merge_log(&mut driver_log, tlog, log_offset);
            (s, true)
        }
        Err(TraceError::Convergence { state, log, ratio }) => {
            merge_log(&mut driver_log, log, log_offset);
            notices.push(format!(
                "trace iteration stopped at max_iters {} with ratio {:.3e} of initial",
                cfg.max_iters, ratio
            ));
            (*state, false)
        }
        Err(TraceError::Inner(e)) => return Err(e),
    };

    // Dense SVD of the dominant block: the eigendecomposition of the k×k
    // Gram block gives the squared singular values and the V rotation.
    let (w, lambdas) = jacobi_eigh(&final_state.g11, 1e-14)?;
    let max_eig = lambdas.values().first().copied().unwrap_or(0.0);
    let rank = lambdas
        .values()
        .iter()
        .take_while(|&&l| l > cfg.tol_rank * max_eig && l > 0.0)
        .count();
    let sigmas: Vec<f64> = lambdas.values()[..rank].iter().map(|l| l.sqrt()).collect();
    let v_slice = final_state.v1.matmul(&w.submatrix(0, w.n_rows(), 0, rank))?;
    let u_slice = assemble_economy(&sorted, &v_slice, &sigmas)?;

    let full_spectrum = if cfg.full {
        Some(full_spectrum(&sorted, &partition, cfg)?)
    } else {
        None
    };

    Ok(DecomposeResult {
        singular_values: sigmas,
        u_slice,
        v_slice,
        iteration_log: driver_log,
        partition_report: Some(report),
        row_permutation: row_p,
        col_permutation: col_p,
        transposed,
        converged,
        full_spectrum,
        notices,
    })
}

fn merge_log(driver_log: &mut IterationLog, tlog: IterationLog, offset: usize) {
    driver_log.notices.extend(tlog.notices);
    for rec in tlog.records.into_iter().skip(1) {
        driver_log.records.push(IterationRecord {
            iteration: rec.iteration + offset,
            ..rec
        });
    }
}

/// U = A·V·D^(-1/2), sparse-times-dense; A never exists densely. The d
/// values here are the Gram eigenvalues' square roots, i.e. the singular
/// values, so each product column is scaled by 1/σ.
pub fn assemble_economy(
    a: &SparseTriplets,
    v_slice: &DenseMatrix,
    sigmas: &[f64],
) -> Result<DenseMatrix> {
    if sigmas.iter().any(|&s| s <= 0.0) {
        return Err(Error::Rank(
            "economy assembly needs strictly positive singular values".into(),
        ));
    }
    let av = a.mul_dense(v_slice)?;
    let inv: Vec<f64> = sigmas.iter().map(|s| 1.0 / s).collect();
    av.scale_columns(&inv)
}

/// Complete (not economy) spectrum through the full blockwise
/// decomposition of the densified blocks, at oracle scale only.
fn full_spectrum(
    sorted: &SparseTriplets,
    partition: &crate::sparse::BlockPartition,
    cfg: &RunConfig,
) -> Result<Vec<f64>> {
    let dense_block = |id: BlockId| -> Result<DenseMatrix> {
        sorted.extract_block(partition, id)?.to_dense(&cfg.budget)
    };
    // Repeated singular values (common in count matrices) slow the tail of
    // the alternating annihilation; 1e-9 of the total norm still leaves the
    // assembled spectrum well inside the reported accuracy.
    let out = crate::reflector::full_block_svd(
        dense_block(BlockId::B11)?,
        dense_block(BlockId::B12)?,
        dense_block(BlockId::B21)?,
        dense_block(BlockId::B22)?,
        1e-9,
        cfg.max_iters.max(1000),
    )?;
    let mut values = svd_dense(&out.a11, 1e-12)?.d.values().to_vec();
    values.extend(crate::baseline::economy_svd_gram(&out.a22)?.d.values());
    values.sort_by(|a, b| b.partial_cmp(a).expect("finite singular values"));
    Ok(values)
}

/// Oracle wrapper: full economy SVD by the Gram route, same result shape.
pub fn run_baseline(input: &SparseTriplets, cfg: &RunConfig) -> Result<DecomposeResult> {
    let (portrait, transposed) = ensure_portrait(input);
    let svd = economy_svd_gram_sparse(&portrait, &cfg.budget)?;
    Ok(DecomposeResult {
        singular_values: svd.d.values().to_vec(),
        u_slice: svd.u_slice,
        v_slice: svd.v_slice,
        iteration_log: IterationLog::default(),
        partition_report: None,
        row_permutation: Permutation::identity(portrait.n_rows()),
        col_permutation: Permutation::identity(portrait.n_cols()),
        transposed,
        converged: true,
        full_spectrum: None,
        notices: Vec::new(),
    })
}

impl DecomposeResult {
    /// Write the run artifacts into a directory: `singular_values.txt`,
    /// `u_slice.csv`, `v_slice.csv`, `iterations.tsv`, `partition.tsv`,
    /// `provenance.json`, and `full_spectrum.txt` when computed.
    pub fn write_to(&self, dir: &std::path::Path, cfg: &RunConfig) -> Result<()> {
        use crate::report;
        std::fs::create_dir_all(dir)?;
        std::fs::write(
            dir.join("singular_values.txt"),
            report::singular_values_text(&self.singular_values),
        )?;
        std::fs::write(dir.join("u_slice.csv"), report::dense_csv(&self.u_slice))?;
        std::fs::write(dir.join("v_slice.csv"), report::dense_csv(&self.v_slice))?;
        std::fs::write(
            dir.join("iterations.tsv"),
            report::iterations_tsv(&self.iteration_log),
        )?;
        if let Some(ref rep) = self.partition_report {
            std::fs::write(dir.join("partition.tsv"), rep.to_tsv())?;
        }
        if let Some(ref full) = self.full_spectrum {
            std::fs::write(
                dir.join("full_spectrum.txt"),
                report::singular_values_text(full),
            )?;
        }
        let provenance = report::Provenance {
            transposed: self.transposed,
            row_permutation: self.row_permutation.map().to_vec(),
            col_permutation: self.col_permutation.map().to_vec(),
            converged: self.converged,
            notices: self.notices.clone(),
            config: cfg.echo(),
        };
        let json = serde_json::to_string_pretty(&provenance)
            .map_err(|e| Error::Usage(format!("provenance serialization failed: {e}")))?;
        std::fs::write(dir.join("provenance.json"), json)?;
        Ok(())
    }
}

/// Per-index difference of two singular value lists.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub index: usize,
    pub a: f64,
    pub b: f64,
    pub abs_diff: f64,
    pub rel_diff: f64,
}

#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub rows: Vec<CompareRow>,
}

impl ComparisonReport {
    pub fn max_abs(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.abs_diff))
    }

    pub fn max_rel(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.rel_diff))
    }

    /// Largest relative difference over a sub-range of indices.
    pub fn max_rel_in(&self, range: std::ops::Range<usize>) -> f64 {
        self.rows[range].iter().fold(0.0, |m, r| m.max(r.rel_diff))
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("INDEX\tA\tB\tABS DIFF\tREL DIFF\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                r.index,
                crate::report::fmt_g17(r.a),
                crate::report::fmt_g17(r.b),
                crate::report::fmt_g17(r.abs_diff),
                crate::report::fmt_g17(r.rel_diff)
            ));
        }
        out
    }
}

/// Top-k singular value comparison; the reference (denominator) is `b`.
pub fn compare(a: &[f64], b: &[f64], k: usize) -> Result<ComparisonReport> {
    if k > a.len() || k > b.len() {
        return Err(Error::Usage(format!(
            "cannot compare top {} values of lists with {} and {} entries",
            k,
            a.len(),
            b.len()
        )));
    }
    let rows = (0..k)
        .map(|i| {
            let abs_diff = (a[i] - b[i]).abs();
            let denom = b[i].abs().max(f64::MIN_POSITIVE);
            CompareRow {
                index: i,
                a: a[i],
                b: b[i],
                abs_diff,
                rel_diff: abs_diff / denom,
            }
        })
        .collect();
    Ok(ComparisonReport { rows })
}
