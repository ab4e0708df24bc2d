use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// The phenotype lattice `E = [-L, L] ∩ ℤ`.
///
/// Sites are stored at indices `0..2L+1`; index `i` is phenotype `i - L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PhenotypeSpace {
    half_width: usize,
}

impl PhenotypeSpace {
    pub fn new(half_width: usize) -> Result<Self> {
        if half_width == 0 {
            return Err(invalid("half_width", "must be at least 1"));
        }
        Ok(Self { half_width })
    }

    /// `L`.
    #[inline]
    pub fn half_width(&self) -> usize {
        self.half_width
    }

    /// `|E| = 2L + 1`.
    #[inline]
    pub fn len(&self) -> usize {
        2 * self.half_width + 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    /// Phenotype at storage index `i`.
    #[inline]
    pub fn site(&self, index: usize) -> i64 {
        index as i64 - self.half_width as i64
    }

    /// Storage index of phenotype `x`, if it lies in `E`.
    #[inline]
    pub fn index(&self, x: i64) -> Option<usize> {
        let l = self.half_width as i64;
        (-l..=l).contains(&x).then(|| (x + l) as usize)
    }

    /// Storage index of `x`; panics when `x` is outside the lattice.
    #[inline]
    pub fn idx(&self, x: i64) -> usize {
        self.index(x)
            .unwrap_or_else(|| panic!("site {x} outside [-{0}, {0}]", self.half_width))
    }

    pub fn sites(&self) -> impl Iterator<Item = i64> + '_ {
        let l = self.half_width as i64;
        -l..=l
    }

    /// Index of the mirror image `-x` of the site stored at `index`.
    #[inline]
    pub fn mirror(&self, index: usize) -> usize {
        self.len() - 1 - index
    }
}
