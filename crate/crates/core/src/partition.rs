use alloc::vec::Vec;
use core::fmt;
use core::ops::Range;

use crate::error::{Error, Result};

/// Block structure `(n_1, ..., n_t)` of an `n x n` matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    sizes: Vec<usize>,
    offsets: Vec<usize>,
    n: usize,
}

impl Partition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidPartition("at least one block is required"));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidPartition("block sizes must be positive"));
        }
        let mut offsets = Vec::with_capacity(sizes.len());
        let mut n = 0;
        for &s in &sizes {
            offsets.push(n);
            n += s;
        }
        Ok(Self { sizes, offsets, n })
    }

    /// The all-ones partition of `n`.
    pub fn ones(n: usize) -> Result<Self> {
        Self::new(alloc::vec![1; n])
    }

    /// `p` repetitions of `base`, e.g. `3 x (1,2,3) = (1,2,3,1,2,3,1,2,3)`.
    pub fn repeated(base: &Partition, p: usize) -> Result<Self> {
        let mut sizes = Vec::with_capacity(base.t() * p);
        for _ in 0..p {
            sizes.extend_from_slice(base.sizes());
        }
        Self::new(sizes)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Total dimension.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of blocks (cardinality).
    pub fn t(&self) -> usize {
        self.sizes.len()
    }

    pub fn size(&self, j: usize) -> usize {
        self.sizes[j]
    }

    pub fn offset(&self, j: usize) -> usize {
        self.offsets[j]
    }

    pub fn range(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j] + self.sizes[j]
    }

    /// Block index owning row/column `idx`.
    pub fn block_of(&self, idx: usize) -> usize {
        match self.offsets.binary_search(&idx) {
            Ok(j) => j,
            Err(j) => j - 1,
        }
    }

    /// Block index of every coordinate `0..n`.
    pub fn labels(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.n);
        for (j, &s) in self.sizes.iter().enumerate() {
            out.extend(core::iter::repeat_n(j, s));
        }
        out
    }

    pub fn is_all_ones(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }

    /// Checks that a `rows x cols` matrix is `n x n`.
    pub fn check_square(&self, rows: usize, cols: usize) -> Result<()> {
        if rows != cols {
            return Err(Error::DimensionMismatch {
                expected: rows,
                found: cols,
            });
        }
        if rows != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: rows,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, s) in self.sizes.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{s}")?;
        }
        Ok(())
    }
}
