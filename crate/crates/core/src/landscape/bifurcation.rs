//! Persistence of an `m̄` maximum as a `V` maximum, and where it breaks in `μ`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::kernels::KernelSet;
use crate::moran::ode::{integrate_eq9, IntegrateOptions};
use crate::params::ModelParams;
use crate::simplex::{sup_distance, SimplexDistribution};

use super::{newton_polish, Classification, StationaryPoint};

/// Sup-distance within which the flow's limit still counts as "near".
pub const NEAR_RADIUS: f64 = 0.1;

fn flow_options() -> IntegrateOptions {
    IntegrateOptions {
        horizon: 1e6,
        velocity_tol: Some(1e-10),
        max_step: 1.0,
        ..Default::default()
    }
}

/// Follows `eq9` from a slightly mixed `π̃` and returns the limit if it is a
/// local maximum of `V` within [`NEAR_RADIUS`] of `π̃`.
pub fn v_local_max_near(
    pi_tilde: &SimplexDistribution,
    kernels: &KernelSet,
    mu_tilde: f64,
) -> Result<Option<StationaryPoint>> {
    v_local_max_within(pi_tilde, kernels, mu_tilde, NEAR_RADIUS)
}

/// [`v_local_max_near`] with an explicit radius.
pub fn v_local_max_within(
    pi_tilde: &SimplexDistribution,
    kernels: &KernelSet,
    mu_tilde: f64,
    radius: f64,
) -> Result<Option<StationaryPoint>> {
    if !(mu_tilde > 0.0) {
        return Err(invalid("mu_tilde", "must be positive"));
    }
    let eps = 1e-3f64.min(mu_tilde.sqrt());
    let start = pi_tilde.mix(&SimplexDistribution::uniform(pi_tilde.space()), eps);
    let sol = integrate_eq9(kernels, mu_tilde, &start, &flow_options())?;
    let terminal = &sol.terminal;
    if sup_distance(terminal, pi_tilde) > radius {
        return Ok(None);
    }
    // A slow flow may stop short; Newton finishes from wherever it ended.
    let Some(polished) = newton_polish(terminal.weights(), kernels, mu_tilde, 100) else {
        return Ok(None);
    };
    let Ok(pi) = SimplexDistribution::new(pi_tilde.space(), polished) else {
        return Ok(None);
    };
    if sup_distance(&pi, pi_tilde) > radius {
        return Ok(None);
    }
    let point = StationaryPoint::assess(pi, kernels, mu_tilde)?;
    Ok((point.classification == Classification::LocalMaxV).then_some(point))
}

/// How a scanned `μ` maps to the mutation weight of `eq9`.
///
/// With selection strength `σ`, the stationary points of `eq7` are those of
/// `eq9` at `μ/σ`; the stationary law's potential `σ m̄ + μ̃ Σ log π` peaks
/// where `eq9` at `(μ - 2/N)/σ` rests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationScale {
    /// Infinite-population drift `eq7`: `μ/σ`.
    Drift,
    /// Finite-`N` potential: `(μ - 2/N)/σ`.
    Stationary,
}

impl MutationScale {
    pub fn effective(self, mu: f64, params: &ModelParams) -> f64 {
        match self {
            MutationScale::Drift => mu / params.sigma,
            MutationScale::Stationary => (mu - 2.0 / params.population as f64) / params.sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanOptions {
    /// Bisection stops once the bracket is this narrow relative to its midpoint.
    pub rel_width: f64,
    pub max_bisections: usize,
    pub scale: MutationScale,
    /// Sup-distance from `π̃` within which a maximum counts. The branch
    /// born at a boundary maximum can drift far before it disappears, so
    /// this is wider than [`NEAR_RADIUS`].
    pub radius: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        Self {
            rel_width: 1e-3,
            max_bisections: 100,
            scale: MutationScale::Drift,
            radius: 0.75,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationReport {
    /// `(μ, local max of V near π̃)` on the input grid.
    pub grid: Vec<(f64, bool)>,
    /// Refined bracket `[lo, hi]` in `μ` around the first flip.
    pub bracket: Option<(f64, f64)>,
    /// Midpoint of the bracket.
    pub threshold: Option<f64>,
    /// The `eq9` mutation weight at the threshold.
    pub effective_threshold: Option<f64>,
    /// Whether the maximum exists on the small-`μ` side of the flip.
    pub max_below: Option<bool>,
    pub note: String,
}

/// Scans `μ` for the value at which `π̃` stops having a nearby maximum of
/// `V`. `σ` and `N` come from `params`; its `μ` is ignored.
pub fn bifurcation_scan(
    pi_tilde: &SimplexDistribution,
    kernels: &KernelSet,
    params: &ModelParams,
    mu_grid: &[f64],
    options: &ScanOptions,
) -> Result<BifurcationReport> {
    if mu_grid.len() < 2 {
        return Err(invalid("mu_grid", "needs at least two values"));
    }
    let increasing = mu_grid.windows(2).all(|w| w[0] < w[1]);
    let decreasing = mu_grid.windows(2).all(|w| w[0] > w[1]);
    if !(increasing || decreasing) {
        return Err(invalid("mu_grid", "must be strictly monotone"));
    }
    if !(params.sigma > 0.0) || params.population == 0 {
        return Err(invalid("params", "need sigma > 0 and N > 0"));
    }
    let eff = |mu: f64| options.scale.effective(mu, params);
    if let Some(&mu) = mu_grid.iter().find(|&&mu| !(eff(mu) > 0.0)) {
        return Err(invalid("mu_grid", format!("mu = {mu} gives a non-positive mutation weight")));
    }
    let probe = |mu: f64| -> Result<bool> { Ok(v_local_max_within(pi_tilde, kernels, eff(mu), options.radius)?.is_some()) };
    let grid = mu_grid
        .iter()
        .map(|&mu| Ok((mu, probe(mu)?)))
        .collect::<Result<Vec<_>>>()?;
    let Some(pair) = grid.windows(2).find(|w| w[0].1 != w[1].1) else {
        return Ok(BifurcationReport {
            grid,
            bracket: None,
            threshold: None,
            effective_threshold: None,
            max_below: None,
            note: "no bifurcation in range".into(),
        });
    };
    let (mut lo, mut hi) = (pair[0], pair[1]);
    if lo.0 > hi.0 {
        std::mem::swap(&mut lo, &mut hi);
    }
    let max_below = lo.1;
    let mut steps = 0;
    while (hi.0 - lo.0) > options.rel_width * 0.5 * (hi.0 + lo.0) && steps < options.max_bisections {
        let mid = 0.5 * (lo.0 + hi.0);
        let v = probe(mid)?;
        if v == lo.1 {
            lo = (mid, v);
        } else {
            hi = (mid, v);
        }
        steps += 1;
    }
    let flips = grid.windows(2).filter(|w| w[0].1 != w[1].1).count();
    let threshold = 0.5 * (lo.0 + hi.0);
    Ok(BifurcationReport {
        grid,
        bracket: Some((lo.0, hi.0)),
        threshold: Some(threshold),
        effective_threshold: Some(eff(threshold)),
        max_below: Some(max_below),
        note: if flips > 1 {
            format!("{flips} flips on the grid; refined the first")
        } else {
            format!("refined in {steps} bisections")
        },
    })
}
