//! Blockwise singular value decomposition toolkit.
//!
//! Decomposes a large sparse matrix without ever materializing a working
//! matrix larger than its largest block: the input is sorted and cut into a
//! 2x2 block view, the dominant subspace is separated by block-Householder
//! annihilation and trace-maximizing rotations on the Gram blocks, and the
//! dominant block is finished with a self-hosted dense SVD that doubles as
//! the verification oracle.

pub mod baseline;
pub mod dense;
pub mod driver;
pub mod eigen;
pub mod error;
pub mod memory;
pub mod partition;
pub mod reflector;
pub mod report;
pub mod routes;
pub mod sparse;
pub mod synth;
pub mod trace;

pub use baseline::{economy_svd_gram, svd_dense, EconomySvd};
pub use dense::{DenseMatrix, Diagonal};
pub use driver::{compare, run_baseline, run_decompose, DecomposeResult, RunConfig};
pub use error::{Error, Result};
pub use memory::MemoryBudget;
pub use sparse::{parse_triplets, BlockId, BlockPartition, Permutation, SparseTriplets};
pub use synth::gen_synthetic;
