//! Probability vectors over the phenotype lattice.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::space::PhenotypeSpace;

/// Drift from unit mass that is silently renormalized away.
pub const RENORMALIZE_TOL: f64 = 1e-12;
/// Drift from unit mass beyond which weights are rejected outright.
pub const REJECT_TOL: f64 = 1e-6;

/// A point `π` of the simplex `Δ` over `E`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexDistribution {
    space: PhenotypeSpace,
    weights: Vec<f64>,
}

impl SimplexDistribution {
    /// Validates `weights` and renormalizes small drift.
    pub fn new(space: PhenotypeSpace, mut weights: Vec<f64>) -> Result<Self> {
        if weights.len() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                actual: weights.len(),
            });
        }
        for (i, &w) in weights.iter().enumerate() {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidWeight {
                    site: space.site(i),
                    value: w,
                });
            }
        }
        let sum: f64 = weights.iter().sum();
        let drift = (sum - 1.0).abs();
        if drift > REJECT_TOL {
            return Err(Error::NotNormalized { sum });
        }
        if drift > RENORMALIZE_TOL {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(Self { space, weights })
    }

    /// Normalizes arbitrary nonnegative mass to a probability vector.
    pub fn from_mass(space: PhenotypeSpace, mut mass: Vec<f64>) -> Result<Self> {
        let sum: f64 = mass.iter().sum();
        if !(sum > 0.0 && sum.is_finite()) {
            return Err(Error::NotNormalized { sum });
        }
        mass.iter_mut().for_each(|w| *w /= sum);
        Self::new(space, mass)
    }

    /// Point mass `δ_x`.
    pub fn delta(space: PhenotypeSpace, x: i64) -> Self {
        let mut weights = vec![0.0; space.len()];
        weights[space.idx(x)] = 1.0;
        Self { space, weights }
    }

    pub fn uniform(space: PhenotypeSpace) -> Self {
        let n = space.len();
        Self {
            space,
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// `(1 - eps) * self + eps * other`.
    pub fn mix(&self, other: &Self, eps: f64) -> Self {
        assert_eq!(self.space, other.space, "mixing points on different lattices");
        let weights = self
            .weights
            .iter()
            .zip(&other.weights)
            .map(|(a, b)| (1.0 - eps) * a + eps * b)
            .collect();
        Self::new(self.space, weights).expect("convex combination stays on the simplex")
    }

    #[inline]
    pub fn space(&self) -> PhenotypeSpace {
        self.space
    }

    #[inline]
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Mass at phenotype `x`.
    pub fn at(&self, x: i64) -> f64 {
        self.weights[self.space.idx(x)]
    }

    /// True when every coordinate is strictly positive.
    pub fn is_interior(&self) -> bool {
        self.weights.iter().all(|&w| w > 0.0)
    }

    /// First site with zero mass, if any.
    pub fn first_empty_site(&self) -> Option<i64> {
        self.weights
            .iter()
            .position(|&w| w <= 0.0)
            .map(|i| self.space.site(i))
    }

    /// `Σ_x log π_x`; negative infinity on the boundary.
    pub fn log_sum(&self) -> f64 {
        if !self.is_interior() {
            return f64::NEG_INFINITY;
        }
        self.weights.iter().map(|w| w.ln()).sum()
    }

    /// `x ↦ -x` image.
    pub fn mirrored(&self) -> Self {
        let mut weights = self.weights.clone();
        weights.reverse();
        Self {
            space: self.space,
            weights,
        }
    }

    /// Sites carrying more than `threshold` mass.
    pub fn support(&self, threshold: f64) -> Vec<i64> {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > threshold)
            .map(|(i, _)| self.space.site(i))
            .collect()
    }

    /// Mean and variance of the phenotype under `π`.
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * self.space.site(i) as f64)
            .sum();
        let var = self
            .weights
            .iter()
            .enumerate()
            .map(|(i, w)| w * (self.space.site(i) as f64 - mean).powi(2))
            .sum();
        (mean, var)
    }
}

impl Index<usize> for SimplexDistribution {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.weights[i]
    }
}

/// `d(a, b) = max_x |a_x - b_x|`.
pub fn sup_distance(a: &SimplexDistribution, b: &SimplexDistribution) -> f64 {
    assert_eq!(a.space, b.space, "sup_distance across different lattices");
    sup_distance_slices(a.weights(), b.weights())
}

pub(crate) fn sup_distance_slices(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "sup_distance across different lattices");
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Clips coordinates below `floor` up to it and renormalizes in place.
pub(crate) fn repair(weights: &mut [f64], floor: f64) {
    for w in weights.iter_mut() {
        if !(*w >= floor) {
            *w = floor;
        }
    }
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);
}
