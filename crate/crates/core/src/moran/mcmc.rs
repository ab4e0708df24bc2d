//! Metropolis–Hastings sampling of the stationary density on the open
//! simplex.
//!
//! Proposals are `Dirichlet(κ π)` around the current point. That kernel is
//! not symmetric, so the acceptance ratio carries the Hastings correction.
//! `κ` is adapted during burn-in only; sampling runs with it frozen.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use statrs::function::gamma::ln_gamma;

use crate::error::{invalid, Result};
use crate::moran::density::StationaryDensity;
use crate::sampling::unit;
use crate::seed::{stream, StreamTag};
use crate::simplex::SimplexDistribution;

/// Acceptance band targeted during burn-in.
pub const TARGET_ACCEPTANCE: (f64, f64) = (0.2, 0.4);
/// Below this post-burn-in acceptance the result carries a tuning warning.
pub const LOW_ACCEPTANCE: f64 = 0.01;
const ADAPT_EVERY: usize = 100;

#[derive(Debug, Clone)]
pub struct McmcOptions {
    /// Retained samples per chain.
    pub samples: usize,
    pub burn_in: usize,
    pub chains: usize,
    /// Keep every `thin`-th state.
    pub thin: usize,
    /// Starting proposal concentration.
    pub kappa: f64,
    pub seed: u64,
    /// Starting point of every chain; uniform when absent.
    pub init: Option<SimplexDistribution>,
}

impl Default for McmcOptions {
    fn default() -> Self {
        Self {
            samples: 10_000,
            burn_in: 5_000,
            chains: 4,
            thin: 1,
            kappa: 100.0,
            seed: 0,
            init: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Chain {
    pub samples: Vec<Vec<f64>>,
    pub log_density: Vec<f64>,
    /// Frozen proposal concentration used after burn-in.
    pub kappa: f64,
    pub accepted: usize,
    pub proposed: usize,
}

impl Chain {
    pub fn acceptance(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct McmcResult {
    pub chains: Vec<Chain>,
    /// Post-burn-in acceptance over all chains.
    pub acceptance: f64,
    /// Split-chain potential scale reduction per coordinate.
    pub rhat: Vec<f64>,
    pub warning: Option<String>,
}

impl McmcResult {
    pub fn max_rhat(&self) -> f64 {
        self.rhat.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn samples(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.chains.iter().flat_map(|c| c.samples.iter())
    }

    pub fn len(&self) -> usize {
        self.chains.iter().map(|c| c.samples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pooled mean of `f` and its batch-means standard error (20 batches
    /// per chain).
    pub fn estimate<F: Fn(&[f64]) -> f64>(&self, f: F) -> (f64, f64) {
        let series: Vec<Vec<f64>> = self
            .chains
            .iter()
            .map(|c| c.samples.iter().map(|s| f(s)).collect())
            .collect();
        pooled_batch_means(&series, 20)
    }

    /// Fraction of samples within sup-distance `radius` of `center`.
    pub fn fraction_within(&self, center: &[f64], radius: f64) -> f64 {
        let hits = self
            .samples()
            .filter(|s| crate::simplex::sup_distance_slices(s, center) <= radius)
            .count();
        hits as f64 / self.len().max(1) as f64
    }
}

/// Mean over all series and the standard error from `batches` batch means
/// per series.
pub fn pooled_batch_means(series: &[Vec<f64>], batches: usize) -> (f64, f64) {
    let mut means = Vec::new();
    let mut total = 0.0;
    let mut count = 0usize;
    for s in series {
        total += s.iter().sum::<f64>();
        count += s.len();
        let size = s.len() / batches.max(1);
        if size == 0 {
            continue;
        }
        for b in s.chunks_exact(size).take(batches) {
            means.push(b.iter().sum::<f64>() / size as f64);
        }
    }
    let mean = total / count.max(1) as f64;
    let k = means.len();
    if k < 2 {
        return (mean, f64::INFINITY);
    }
    let bm = means.iter().sum::<f64>() / k as f64;
    let var = means.iter().map(|m| (m - bm).powi(2)).sum::<f64>() / (k - 1) as f64;
    (mean, (var / k as f64).sqrt())
}

/// Split-chain `R̂` of one scalar series per chain.
pub fn split_rhat(series: &[Vec<f64>]) -> f64 {
    let halves: Vec<&[f64]> = series
        .iter()
        .flat_map(|s| {
            let h = s.len() / 2;
            [&s[..h], &s[h..2 * h]]
        })
        .filter(|s| !s.is_empty())
        .collect();
    let m = halves.len();
    if m < 2 {
        return f64::NAN;
    }
    let n = halves[0].len() as f64;
    let means: Vec<f64> = halves.iter().map(|s| s.iter().sum::<f64>() / n).collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    let w = halves
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m as f64;
    if w == 0.0 {
        return if b == 0.0 { 1.0 } else { f64::INFINITY };
    }
    (((n - 1.0) / n * w + b / n) / w).sqrt()
}

fn dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R, out: &mut [f64]) -> bool {
    let mut sum = 0.0;
    for (o, &a) in out.iter_mut().zip(alpha) {
        *o = match Gamma::new(a, 1.0) {
            Ok(g) => g.sample(rng),
            Err(_) => return false,
        };
        sum += *o;
    }
    if !(sum > 0.0 && sum.is_finite()) {
        return false;
    }
    out.iter_mut().for_each(|o| *o /= sum);
    true
}

/// `log Dirichlet(to; κ from)` without the `ln Γ(κ)` term, which cancels.
fn log_proposal(from: &[f64], to: &[f64], kappa: f64) -> f64 {
    from.iter()
        .zip(to)
        .map(|(&f, &t)| {
            let a = kappa * f;
            (a - 1.0) * t.ln() - ln_gamma(a)
        })
        .sum()
}

fn run_chain(density: &StationaryDensity, options: &McmcOptions, index: usize) -> Chain {
    let mut rng = stream(options.seed, index as u64, StreamTag::Mcmc);
    let space = density.kernels().space();
    let mut x = options
        .init
        .clone()
        .unwrap_or_else(|| SimplexDistribution::uniform(space))
        .into_weights();
    let mut lp = density.log_density(&x);
    let mut y = vec![0.0; x.len()];
    let mut alpha = vec![0.0; x.len()];
    let mut kappa = options.kappa;
    let mut window_accepted = 0;
    let mut chain = Chain {
        samples: Vec::with_capacity(options.samples),
        log_density: Vec::with_capacity(options.samples),
        kappa,
        accepted: 0,
        proposed: 0,
    };
    let thin = options.thin.max(1);
    let total = options.burn_in + options.samples * thin;
    for step in 0..total {
        let burning = step < options.burn_in;
        alpha.iter_mut().zip(&x).for_each(|(a, &p)| *a = kappa * p);
        let mut accepted = false;
        if dirichlet(&alpha, &mut rng, &mut y) {
            let lq = density.log_density(&y);
            if lq > f64::NEG_INFINITY {
                let log_ratio = lq - lp + log_proposal(&y, &x, kappa) - log_proposal(&x, &y, kappa);
                if log_ratio >= 0.0 || unit(&mut rng).ln() < log_ratio {
                    std::mem::swap(&mut x, &mut y);
                    lp = lq;
                    accepted = true;
                }
            }
        }
        if burning {
            window_accepted += usize::from(accepted);
            if (step + 1) % ADAPT_EVERY == 0 {
                let rate = window_accepted as f64 / ADAPT_EVERY as f64;
                if rate < TARGET_ACCEPTANCE.0 {
                    kappa *= 1.5;
                } else if rate > TARGET_ACCEPTANCE.1 {
                    kappa = (kappa / 1.5).max(1.0);
                }
                window_accepted = 0;
            }
        } else {
            chain.proposed += 1;
            chain.accepted += usize::from(accepted);
            if (step - options.burn_in + 1) % thin == 0 {
                chain.samples.push(x.clone());
                chain.log_density.push(lp);
            }
        }
    }
    chain.kappa = kappa;
    chain
}

/// Runs `options.chains` independent chains in parallel.
///
/// The density is proper whenever `(N/2)μ > 0`, which is all this needs;
/// it does not require `μ̃ > 0`.
pub fn mcmc_sample_stationary(density: &StationaryDensity, options: &McmcOptions) -> Result<McmcResult> {
    if !(density.params().half_n_mu() > 0.0) {
        return Err(invalid("mu", "stationary density is improper unless (N/2)μ > 0"));
    }
    if options.chains == 0 || options.samples < 4 {
        return Err(invalid("samples", "need at least one chain and four samples"));
    }
    if !(options.kappa > 0.0) {
        return Err(invalid("kappa", "must be positive"));
    }
    if let Some(init) = &options.init {
        if init.space() != density.kernels().space() || !init.is_interior() {
            return Err(invalid("init", "must be an interior point of the model's simplex"));
        }
    }
    let chains: Vec<Chain> = (0..options.chains)
        .into_par_iter()
        .map(|i| run_chain(density, options, i))
        .collect();
    let proposed: usize = chains.iter().map(|c| c.proposed).sum();
    let accepted: usize = chains.iter().map(|c| c.accepted).sum();
    let acceptance = accepted as f64 / proposed.max(1) as f64;
    let dim = density.kernels().len();
    let rhat = (0..dim)
        .map(|i| {
            let series: Vec<Vec<f64>> = chains
                .iter()
                .map(|c| c.samples.iter().map(|s| s[i]).collect())
                .collect();
            split_rhat(&series)
        })
        .collect();
    let warning = (acceptance < LOW_ACCEPTANCE)
        .then(|| format!("acceptance rate {acceptance:.4} is below {LOW_ACCEPTANCE}; proposal needs retuning"));
    if let Some(w) = &warning {
        log::warn!("{w}");
    }
    Ok(McmcResult {
        chains,
        acceptance,
        rhat,
        warning,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rhat_of_identical_iid_chains_is_near_one() {
        let series: Vec<Vec<f64>> = (0..4)
            .map(|c| (0..2000).map(|i| (((i * 7919 + c * 31) % 1000) as f64) / 1000.0).collect())
            .collect();
        assert!((split_rhat(&series) - 1.0).abs() < 0.05);
        let shifted = vec![vec![0.0; 100], vec![1.0; 100]];
        assert_eq!(split_rhat(&shifted), f64::INFINITY);
    }

    #[test]
    fn batch_means_of_constant_series() {
        let (m, se) = pooled_batch_means(&[vec![2.0; 400], vec![2.0; 400]], 20);
        assert_eq!(m, 2.0);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn hastings_term_is_zero_for_equal_points() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(log_proposal(&p, &p, 10.0) - log_proposal(&p, &p, 10.0), 0.0);
    }
}
