//! Fitness `m_x(π) = K_x Σ_z B_{x-z} K_z π_z`, mean fitness and the potential
//! `V_π = m̄_π + μ̃ Σ_x log π_x`.

use crate::kernels::KernelSet;
use crate::simplex::SimplexDistribution;

/// Fitness of every site under `pi`.
pub fn fitness(pi: &SimplexDistribution, kernels: &KernelSet) -> Vec<f64> {
    assert_eq!(pi.space(), kernels.space(), "fitness: lattice mismatch");
    fitness_of(pi.weights(), kernels)
}

/// [`fitness`] on a raw weight slice (not necessarily normalized).
pub fn fitness_of(weights: &[f64], kernels: &KernelSet) -> Vec<f64> {
    let mut m = vec![0.0; weights.len()];
    fitness_into(weights, kernels, &mut m);
    m
}

pub(crate) fn fitness_into(weights: &[f64], kernels: &KernelSet, out: &mut [f64]) {
    let n = kernels.len();
    assert_eq!(weights.len(), n, "fitness: dimension mismatch");
    for (x, slot) in out.iter_mut().enumerate() {
        *slot = dot(kernels.interaction_row(x), weights);
    }
}

/// `m̄ = Σ_x π_x m_x`.
pub fn mean_fitness(pi: &SimplexDistribution, m: &[f64]) -> f64 {
    assert_eq!(pi.len(), m.len(), "mean_fitness: dimension mismatch");
    dot(pi.weights(), m)
}

/// `V_π`, or negative infinity when some coordinate is zero.
pub fn potential(pi: &SimplexDistribution, kernels: &KernelSet, mu_tilde: f64) -> f64 {
    potential_of(pi.weights(), kernels, mu_tilde)
}

pub fn potential_of(weights: &[f64], kernels: &KernelSet, mu_tilde: f64) -> f64 {
    if weights.iter().any(|&w| w <= 0.0) {
        return f64::NEG_INFINITY;
    }
    let m = fitness_of(weights, kernels);
    dot(weights, &m) + mu_tilde * weights.iter().map(|w| w.ln()).sum::<f64>()
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
