//! Stationary points of the `eq9` flow and local maxima of `m̄` and `V`.
//!
//! At a stationary point `π̂` of `eq9`, `m_x(π̂) + μ̃/(2π̂_x)` is the same
//! constant `c` at every site. [`find_stationary_points`] follows the flow
//! from many starts, polishes each terminal point with Newton's method on
//! those equations and classifies it by the spectrum of the flow's Jacobian
//! on the tangent space of the simplex.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fitness::{dot, fitness_of, potential_of};
use crate::kernels::KernelSet;
use crate::linalg::{max_real_eigenvalue, solve, tangent_basis};
use crate::moran::ode::{eq9_jacobian, eq9_rhs, integrate_eq9, sup_norm, IntegrateOptions};
use crate::seed::{stream, StreamTag};
use crate::simplex::{sup_distance_slices, SimplexDistribution};

pub mod audit;
pub mod bifurcation;
pub mod face;

pub use audit::{bound_audit, gap_audit, AuditRow, BoundAuditOptions, GapReport};
pub use bifurcation::{
    bifurcation_scan, v_local_max_near, v_local_max_within, BifurcationReport, MutationScale, ScanOptions,
};
pub use face::{face_local_max, three_point_formula, two_point_formula, FaceCandidate, FaceSpec};

/// Eigenvalues within this distance of zero are not trusted for a verdict.
pub const EIGEN_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    LocalMaxV,
    SaddleOrUnstable,
    Unresolved,
}

impl Classification {
    /// From the largest tangent-space eigenvalue of the `eq9` Jacobian.
    pub fn from_eigenvalue(lambda: f64) -> Self {
        if lambda < -EIGEN_TOL {
            Classification::LocalMaxV
        } else if lambda > EIGEN_TOL {
            Classification::SaddleOrUnstable
        } else {
            Classification::Unresolved
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Classification::LocalMaxV => "local_max_V",
            Classification::SaddleOrUnstable => "saddle_or_unstable",
            Classification::Unresolved => "unresolved",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StationaryPoint {
    pub pi_hat: SimplexDistribution,
    pub fitness: Vec<f64>,
    /// `max - min` of `m_x + μ̃/(2π̂_x)`.
    pub constancy_residual: f64,
    /// Mean of `m_x + μ̃/(2π̂_x)`.
    pub constant: f64,
    pub classification: Classification,
    /// Largest real part in the tangent-space spectrum of the Jacobian.
    pub max_eigenvalue: f64,
    /// Index of the multistart cluster.
    pub basin_tag: usize,
    /// Sup-norm of the `eq9` velocity at `pi_hat`.
    pub velocity: f64,
    /// Number of starts that landed in this cluster.
    pub members: usize,
}

impl StationaryPoint {
    /// Builds and classifies a point assumed to be stationary.
    pub fn assess(pi_hat: SimplexDistribution, kernels: &KernelSet, mu_tilde: f64) -> Result<Self> {
        if let Some(site) = pi_hat.first_empty_site() {
            return Err(Error::NotInterior { site });
        }
        let w = pi_hat.weights();
        let fitness = fitness_of(w, kernels);
        let (constant, constancy_residual) = constancy(w, &fitness, mu_tilde);
        let max_eigenvalue = tangent_max_eigenvalue(w, kernels, mu_tilde);
        let velocity = sup_norm(&eq9_rhs(w, kernels, mu_tilde));
        Ok(Self {
            fitness,
            constancy_residual,
            constant,
            classification: Classification::from_eigenvalue(max_eigenvalue),
            max_eigenvalue,
            basin_tag: 0,
            velocity,
            members: 1,
            pi_hat,
        })
    }

    pub fn mean_fitness(&self) -> f64 {
        dot(self.pi_hat.weights(), &self.fitness)
    }
}

fn constancy(w: &[f64], m: &[f64], mu_tilde: f64) -> (f64, f64) {
    let vals: Vec<f64> = w.iter().zip(m).map(|(p, mx)| mx + 0.5 * mu_tilde / p).collect();
    let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (vals.iter().sum::<f64>() / vals.len() as f64, hi - lo)
}

/// Largest real eigenvalue of `QᵀJQ`, `Q` an orthonormal basis of the
/// tangent space `{Σ v = 0}`.
pub fn tangent_max_eigenvalue(weights: &[f64], kernels: &KernelSet, mu_tilde: f64) -> f64 {
    let j = eq9_jacobian(weights, kernels, mu_tilde);
    let q = tangent_basis(weights.len());
    max_real_eigenvalue(&(q.transpose() * j * &q))
}

/// Newton's method on `m_x(π) + μ̃/(2π_x) = c`, `Σ π = 1`, in the unknowns
/// `(π, c)`, with backtracking that keeps `π` positive.
pub fn newton_polish(weights: &[f64], kernels: &KernelSet, mu_tilde: f64, max_iter: usize) -> Option<Vec<f64>> {
    let n = weights.len();
    let s = kernels.interaction();
    let residual = |pi: &[f64], c: f64| -> Vec<f64> {
        let m = fitness_of(pi, kernels);
        let mut f: Vec<f64> = (0..n).map(|x| m[x] + 0.5 * mu_tilde / pi[x] - c).collect();
        f.push(pi.iter().sum::<f64>() - 1.0);
        f
    };
    let norm = |f: &[f64]| sup_norm(f);
    let mut pi = weights.to_vec();
    let m = fitness_of(&pi, kernels);
    let mut c = dot(&pi, &m) + 0.5 * mu_tilde * n as f64;
    let mut f = residual(&pi, c);
    for _ in 0..max_iter {
        if norm(&f) < 1e-14 {
            break;
        }
        let jac = DMatrix::from_fn(n + 1, n + 1, |r, col| {
            if r == n {
                if col < n { 1.0 } else { 0.0 }
            } else if col == n {
                -1.0
            } else {
                let d = if r == col { 0.5 * mu_tilde / (pi[r] * pi[r]) } else { 0.0 };
                s[r * n + col] - d
            }
        });
        let rhs = DVector::from_iterator(n + 1, f.iter().map(|v| -v));
        let step = solve(jac, rhs)?;
        let mut alpha: f64 = 1.0;
        for x in 0..n {
            if step[x] < 0.0 {
                alpha = alpha.min(-0.9 * pi[x] / step[x]);
            }
        }
        let current = norm(&f);
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = (0..n).map(|x| pi[x] + alpha * step[x]).collect();
            let tc = c + alpha * step[n];
            let tf = residual(&trial, tc);
            if norm(&tf) < current {
                pi = trial;
                c = tc;
                f = tf;
                improved = true;
                break;
            }
            alpha *= 0.5;
        }
        if !improved {
            break;
        }
    }
    let total: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|p| *p /= total);
    pi.iter().all(|&p| p > 0.0 && p.is_finite()).then_some(pi)
}

/// How starting points for the multistart search are generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceSeeding {
    /// Only uniform random interior points.
    None,
    /// Plus every `δ_x`, pulled slightly inward.
    Singletons,
    /// Plus the equal-fitness candidate of every admissible 2- and 3-point
    /// face with support spacing at least `M`.
    All,
}

#[derive(Debug, Clone)]
pub struct SearchOptions {
    /// Random interior starts, `Dirichlet(1, ..., 1)`.
    pub n_starts: usize,
    /// Velocity sup-norm at which a flow is considered converged; terminal
    /// points within `10 tol` are merged.
    pub tol: f64,
    pub seed: u64,
    pub faces: FaceSeeding,
    /// Weight of the uniform distribution mixed into face seeds.
    pub face_inset: f64,
    /// Flow time limit per start.
    pub horizon: f64,
    /// Acceptable constancy residual after polishing.
    pub residual_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            n_starts: 32,
            tol: 1e-9,
            seed: 0,
            faces: FaceSeeding::Singletons,
            face_inset: 1e-3,
            horizon: 1e7,
            residual_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SearchReport {
    /// Deduplicated points, ordered by decreasing `V`.
    pub points: Vec<StationaryPoint>,
    /// Starts whose flow or polish did not converge.
    pub unresolved_starts: Vec<usize>,
    pub starts: usize,
}

impl SearchReport {
    pub fn local_maxima(&self) -> impl Iterator<Item = &StationaryPoint> {
        self.points
            .iter()
            .filter(|p| p.classification == Classification::LocalMaxV)
    }
}

fn random_interior<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let s: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

fn face_seeds(kernels: &KernelSet, level: FaceSeeding) -> Vec<Vec<i64>> {
    let space = kernels.space();
    let sites: Vec<i64> = space.sites().collect();
    let mut faces: Vec<Vec<i64>> = Vec::new();
    if level == FaceSeeding::None {
        return faces;
    }
    faces.extend(sites.iter().map(|&x| vec![x]));
    if level == FaceSeeding::All {
        let spacing = kernels.step().map_or(1, |s| s.m.max(1)) as i64;
        for &a in &sites {
            for &b in sites.iter().filter(|&&b| b - a >= spacing) {
                faces.push(vec![a, b]);
                for &c in sites.iter().filter(|&&c| c - b >= spacing) {
                    faces.push(vec![a, b, c]);
                }
            }
        }
    }
    faces
}

/// Polishes and classifies the terminal point of one flow.
fn settle(start: &[f64], kernels: &KernelSet, mu_tilde: f64, options: &SearchOptions) -> Option<StationaryPoint> {
    let space = kernels.space();
    let pi0 = SimplexDistribution::from_mass(space, start.to_vec()).ok()?;
    let flow = IntegrateOptions {
        horizon: options.horizon,
        velocity_tol: Some(options.tol),
        max_step: 1.0,
        ..Default::default()
    };
    let sol = integrate_eq9(kernels, mu_tilde, &pi0, &flow).ok()?;
    if !sol.succeeded() {
        return None;
    }
    let polished = newton_polish(sol.terminal.weights(), kernels, mu_tilde, 50)?;
    if sup_distance_slices(&polished, sol.terminal.weights()) > 1e-3 {
        // Newton wandered to a different root; not the flow's limit.
        return None;
    }
    let pi = SimplexDistribution::new(space, polished).ok()?;
    let point = StationaryPoint::assess(pi, kernels, mu_tilde).ok()?;
    (point.constancy_residual < options.residual_tol).then_some(point)
}

/// Multistart search for the stationary points of `eq9`.
pub fn find_stationary_points(kernels: &KernelSet, mu_tilde: f64, options: &SearchOptions) -> Result<SearchReport> {
    if !(mu_tilde > 0.0) {
        return Err(invalid("mu_tilde", "the landscape search needs μ̃ > 0"));
    }
    if options.n_starts == 0 && options.faces == FaceSeeding::None {
        return Err(invalid("n_starts", "must be at least 1"));
    }
    if !(options.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let space = kernels.space();
    let n = space.len();
    let uniform = vec![1.0 / n as f64; n];
    let mut starts: Vec<Vec<f64>> = (0..options.n_starts)
        .map(|i| random_interior(n, &mut stream(options.seed, i as u64, StreamTag::Setup)))
        .collect();
    for support in face_seeds(kernels, options.faces) {
        let Ok(face) = FaceSpec::new(space, support) else { continue };
        let candidate = match face_local_max(&face, kernels) {
            Ok(c) if c.positive => c,
            _ => continue,
        };
        let eps = options.face_inset;
        starts.push(
            candidate
                .weights
                .iter()
                .zip(&uniform)
                .map(|(p, u)| (1.0 - eps) * p + eps * u)
                .collect(),
        );
    }
    let settled: Vec<Option<StationaryPoint>> = starts
        .par_iter()
        .map(|s| settle(s, kernels, mu_tilde, options))
        .collect();
    let mut unresolved_starts = Vec::new();
    let mut found: Vec<StationaryPoint> = Vec::new();
    for (i, p) in settled.into_iter().enumerate() {
        match p {
            Some(p) => found.push(p),
            None => unresolved_starts.push(i),
        }
    }
    found.sort_by(|a, b| a.velocity.total_cmp(&b.velocity));
    let radius = 10.0 * options.tol;
    let mut points: Vec<StationaryPoint> = Vec::new();
    for p in found {
        match points
            .iter_mut()
            .find(|q| sup_distance_slices(q.pi_hat.weights(), p.pi_hat.weights()) < radius)
        {
            Some(q) => q.members += 1,
            None => points.push(p),
        }
    }
    let v = |p: &StationaryPoint| potential_of(p.pi_hat.weights(), kernels, mu_tilde);
    points.sort_by(|a, b| v(b).total_cmp(&v(a)));
    for (i, p) in points.iter_mut().enumerate() {
        p.basin_tag = i;
    }
    Ok(SearchReport {
        points,
        unresolved_starts,
        starts: starts.len(),
    })
}

/// Result of [`verify_stationarity`].
#[derive(Debug, Clone, PartialEq)]
pub struct StationarityDiagnostics {
    pub constancy_residual: f64,
    pub constant: f64,
    /// Largest deviation of the subset identity from `c` over the subsets
    /// checked.
    pub subset_deviation: f64,
    /// Same, for the identity without the `|J|` factor on the mutation
    /// term; only exact for singletons.
    pub subset_deviation_without_count: f64,
    pub subsets_checked: usize,
    /// `m_x >= m̄` exactly when `π̂_x >= 1/(2L+1)`.
    pub sign_coupling: bool,
    /// `m` and `π̂` induce the same order.
    pub order_coupling: bool,
}

impl StationarityDiagnostics {
    pub fn passes(&self, tol: f64) -> bool {
        self.constancy_residual < tol && self.subset_deviation < tol && self.sign_coupling && self.order_coupling
    }
}

/// Pure diagnostics of a candidate stationary point.
///
/// Summing `π_x (m_x + μ̃/(2π_x)) = c π_x` over `J` gives
///
/// ```text
/// Σ_J m_x π̂_x / Σ_J π̂_x + |J| μ̃ / (2 Σ_J π̂_x) = c,
/// ```
///
/// which is checked on `subsets` random nonempty `J`.
pub fn verify_stationarity(
    pi_hat: &SimplexDistribution,
    kernels: &KernelSet,
    mu_tilde: f64,
    subsets: usize,
    seed: u64,
) -> Result<StationarityDiagnostics> {
    if let Some(site) = pi_hat.first_empty_site() {
        return Err(Error::NotInterior { site });
    }
    let w = pi_hat.weights();
    let n = w.len();
    let m = fitness_of(w, kernels);
    let (constant, constancy_residual) = constancy(w, &m, mu_tilde);
    let mut rng = stream(seed, 0, StreamTag::Setup);
    let mut dev: f64 = 0.0;
    let mut dev_plain: f64 = 0.0;
    for _ in 0..subsets {
        let mut members: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if members.is_empty() {
            members.push(rng.random_range(0..n));
        }
        let mass: f64 = members.iter().map(|&x| w[x]).sum();
        let weighted: f64 = members.iter().map(|&x| m[x] * w[x]).sum();
        let lhs = weighted / mass + members.len() as f64 * mu_tilde / (2.0 * mass);
        dev = dev.max((lhs - constant).abs());
        let plain = weighted / mass + mu_tilde / (2.0 * mass);
        dev_plain = dev_plain.max((plain - constant).abs());
    }
    let mbar = dot(w, &m);
    let mean = 1.0 / n as f64;
    let tol = EIGEN_TOL;
    let sign_coupling = (0..n).all(|x| {
        let a = m[x] - mbar;
        let d = w[x] - mean;
        !((a > tol && d < -tol) || (a < -tol && d > tol))
    });
    let order_coupling = (0..n).all(|x| {
        (0..n).all(|y| {
            let dm = m[x] - m[y];
            let dp = w[x] - w[y];
            !((dm > tol && dp <= 0.0) || (dp > tol && dm <= 0.0))
        })
    });
    Ok(StationarityDiagnostics {
        constancy_residual,
        constant,
        subset_deviation: dev,
        subset_deviation_without_count: dev_plain,
        subsets_checked: subsets,
        sign_coupling,
        order_coupling,
    })
}
