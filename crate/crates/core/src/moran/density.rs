//! Unnormalized stationary law of the Fleming–Viot limit,
//!
//! ```text
//! ν̃(π) = Π_x π_x^{(N/2)μ - 1} · exp((N/2) m̄_π) = exp((N/2) V_π),
//! ```
//!
//! with `V` evaluated at `μ̃ = μ - 2/N`.

use crate::error::{Error, Result};
use crate::fitness::{dot, fitness_into, potential_of};
use crate::kernels::KernelSet;
use crate::params::ModelParams;
use crate::simplex::SimplexDistribution;

#[derive(Debug, Clone)]
pub struct StationaryDensity {
    kernels: KernelSet,
    params: ModelParams,
}

impl StationaryDensity {
    pub fn new(kernels: KernelSet, params: ModelParams) -> Result<Self> {
        params.validate()?;
        Ok(Self { kernels, params })
    }

    pub fn kernels(&self) -> &KernelSet {
        &self.kernels
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// `((N/2)μ - 1) Σ log π + (N/2) m̄`; `-∞` off the open simplex.
    pub fn log_density(&self, weights: &[f64]) -> f64 {
        if weights.iter().any(|&w| !(w > 0.0)) {
            return f64::NEG_INFINITY;
        }
        let mut m = vec![0.0; weights.len()];
        fitness_into(weights, &self.kernels, &mut m);
        let half_n = 0.5 * self.params.population as f64;
        let log_sum: f64 = weights.iter().map(|w| w.ln()).sum();
        (self.params.half_n_mu() - 1.0) * log_sum + half_n * dot(weights, &m)
    }

    /// The same quantity written as `(N/2) V_π`.
    pub fn log_density_via_potential(&self, weights: &[f64]) -> f64 {
        0.5 * self.params.population as f64 * potential_of(weights, &self.kernels, self.params.mu_tilde())
    }
}

/// Log of the unnormalized stationary density at `pi`.
pub fn log_stationary_density(pi: &SimplexDistribution, density: &StationaryDensity) -> Result<f64> {
    if pi.space() != density.kernels.space() {
        return Err(Error::DimensionMismatch {
            expected: density.kernels.len(),
            actual: pi.len(),
        });
    }
    Ok(density.log_density(pi.weights()))
}
