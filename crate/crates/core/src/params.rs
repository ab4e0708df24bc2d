use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Selection strength `σ`, mutation rate `μ` and population size `N`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    pub mu: f64,
    #[serde(rename = "N", alias = "population")]
    pub population: u64,
}

fn default_sigma() -> f64 {
    0.5
}

impl ModelParams {
    /// Validates `σ ∈ (0, 1/2]`, `μ >= 0`, `N >= 1`.
    ///
    /// `μ = 0` is allowed for the particle simulator; operations that need
    /// `μ̃ > 0` check it themselves.
    pub fn new(sigma: f64, mu: f64, population: u64) -> Result<Self> {
        let p = Self {
            sigma,
            mu,
            population,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma <= 0.5) {
            return Err(invalid("sigma", "must lie in (0, 1/2]"));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(invalid("mu", "must be nonnegative and finite"));
        }
        if self.population == 0 {
            return Err(invalid("N", "must be at least 1"));
        }
        Ok(())
    }

    /// `μ̃ = μ - 2/N`.
    pub fn mu_tilde(&self) -> f64 {
        self.mu - 2.0 / self.population as f64
    }

    /// `(N/2) μ`, the Dirichlet concentration of the neutral stationary law.
    pub fn half_n_mu(&self) -> f64 {
        0.5 * self.population as f64 * self.mu
    }

    pub fn require_positive_mu_tilde(&self) -> Result<f64> {
        let mt = self.mu_tilde();
        if mt > 0.0 {
            Ok(mt)
        } else {
            Err(invalid("mu", format!("mu - 2/N = {mt:e} must be positive")))
        }
    }
}
