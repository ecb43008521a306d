//! Accounting for dense allocations.
//!
//! Every `DenseMatrix` registers its payload here on construction and
//! releases it on drop, so tests can assert that a run never holds more
//! dense storage than the configured budget allows, and the Gram builder
//! can refuse to materialize a block that would not fit.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

static CURRENT: AtomicUsize = AtomicUsize::new(0);
static PEAK: AtomicUsize = AtomicUsize::new(0);
static LARGEST: AtomicUsize = AtomicUsize::new(0);

pub(crate) fn register(bytes: usize) {
    let now = CURRENT.fetch_add(bytes, Ordering::SeqCst) + bytes;
    PEAK.fetch_max(now, Ordering::SeqCst);
    LARGEST.fetch_max(bytes, Ordering::SeqCst);
}

pub(crate) fn release(bytes: usize) {
    CURRENT.fetch_sub(bytes, Ordering::SeqCst);
}

/// Dense bytes currently live.
pub fn current_bytes() -> usize {
    CURRENT.load(Ordering::SeqCst)
}

/// High-water mark of live dense bytes since the last reset.
pub fn peak_bytes() -> usize {
    PEAK.load(Ordering::SeqCst)
}

/// Largest single dense allocation since the last reset.
pub fn largest_alloc_bytes() -> usize {
    LARGEST.load(Ordering::SeqCst)
}

/// Restart peak tracking from the currently live amount.
pub fn reset_peak() {
    PEAK.store(CURRENT.load(Ordering::SeqCst), Ordering::SeqCst);
    LARGEST.store(0, Ordering::SeqCst);
}

/// A cap on live dense storage, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryBudget {
    bytes: usize,
}

impl MemoryBudget {
    pub fn new(bytes: usize) -> Self {
        Self { bytes }
    }

    /// No practical limit.
    pub fn unlimited() -> Self {
        Self { bytes: usize::MAX }
    }

    pub fn bytes(&self) -> usize {
        self.bytes
    }

    /// Whether an additional allocation of `bytes` would still fit.
    pub fn fits(&self, bytes: usize) -> bool {
        current_bytes().saturating_add(bytes) <= self.bytes
    }

    /// Error carrying the offending block name when `bytes` does not fit.
    pub fn check(&self, block: &str, bytes: usize) -> Result<()> {
        if self.fits(bytes) {
            Ok(())
        } else {
            Err(Error::MemoryBudget {
                block: block.to_string(),
                needed: bytes,
                available: self.bytes.saturating_sub(current_bytes()),
            })
        }
    }
}

impl Default for MemoryBudget {
    fn default() -> Self {
        Self::unlimited()
    }
}

pub(crate) fn bytes_for(rows: usize, cols: usize) -> usize {
    rows * cols * std::mem::size_of::<f64>()
}
