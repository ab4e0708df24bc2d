//! Fixed-population discrete-time model: each generation resamples `N`
//! individuals from
//!
//! ```text
//! p_x = Σ_y A(y, x) π_y W_y(π) / Σ_z π_z W_z(π)
//! ```
//!
//! with `W` one of two competition-driven fitness functions. The same
//! formula with `π^N` replaced by `π` is the deterministic map iterated by
//! [`iterate_to_fixed_point`].

use rand::Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::dd::PopulationCounts;
use crate::error::{invalid, Error, Result};
use crate::fitness::dot;
use crate::kernels::KernelSet;
use crate::simplex::{sup_distance_slices, SimplexDistribution};
use crate::space::PhenotypeSpace;

/// Which fitness function drives selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitnessKind {
    /// `max(0, 1 - (C * π)_x / K_x)`.
    W1,
    /// `K_x / (C * π)_x`.
    W2,
}

/// Row-stochastic mutation matrix `A(y, x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MutationMatrix {
    n: usize,
    /// Row-major; `None` is the identity.
    dense: Option<Vec<f64>>,
}

impl MutationMatrix {
    pub fn identity(space: PhenotypeSpace) -> Self {
        Self {
            n: space.len(),
            dense: None,
        }
    }

    /// `μⁿ δ_{-1} + (1 - 2μⁿ) δ_0 + μⁿ δ_{+1}`, with a step off either end
    /// of the lattice reflected back inside.
    pub fn tridiagonal(space: PhenotypeSpace, rate: f64) -> Result<Self> {
        if !(0.0..=0.5).contains(&rate) {
            return Err(invalid("mutation_rate", "must lie in [0, 1/2]"));
        }
        let n = space.len();
        let mut a = vec![0.0; n * n];
        for y in 0..n {
            a[y * n + y] = 1.0 - 2.0 * rate;
            let left = if y == 0 { 1 } else { y - 1 };
            let right = if y == n - 1 { n - 2 } else { y + 1 };
            a[y * n + left] += rate;
            a[y * n + right] += rate;
        }
        Self::from_rows(space, a)
    }

    /// Validates a dense row-major matrix.
    pub fn from_rows(space: PhenotypeSpace, rows: Vec<f64>) -> Result<Self> {
        let n = space.len();
        if rows.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: rows.len(),
            });
        }
        for y in 0..n {
            let row = &rows[y * n..(y + 1) * n];
            if row.iter().any(|&v| !(v >= 0.0)) {
                return Err(invalid("mutation_matrix", format!("negative entry in row {}", space.site(y))));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(invalid(
                    "mutation_matrix",
                    format!("row {} sums to {s}", space.site(y)),
                ));
            }
        }
        Ok(Self {
            n,
            dense: Some(rows),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.dense.is_none()
    }

    /// `A(y, x)` by storage index.
    pub fn entry(&self, y: usize, x: usize) -> f64 {
        match &self.dense {
            None => f64::from(u8::from(x == y)),
            Some(a) => a[y * self.n + x],
        }
    }

    /// `out_x = Σ_y A(y, x) q_y`.
    fn push_forward(&self, q: &[f64]) -> Vec<f64> {
        match &self.dense {
            None => q.to_vec(),
            Some(a) => {
                let n = self.n;
                let mut out = vec![0.0; n];
                for (y, &qy) in q.iter().enumerate() {
                    if qy == 0.0 {
                        continue;
                    }
                    for (o, &ayx) in out.iter_mut().zip(&a[y * n..(y + 1) * n]) {
                        *o += ayx * qy;
                    }
                }
                out
            }
        }
    }
}

/// `(C * π)_x = Σ_z C_{x-z} π_z`.
pub fn competition_pressure(weights: &[f64], kernels: &KernelSet) -> Vec<f64> {
    (0..kernels.len())
        .map(|x| dot(kernels.competition_row(x), weights))
        .collect()
}

/// `W_x(π)` for every site.
pub fn fitness_w(pi: &SimplexDistribution, kernels: &KernelSet, kind: FitnessKind) -> Result<Vec<f64>> {
    if pi.space() != kernels.space() {
        return Err(Error::DimensionMismatch {
            expected: kernels.len(),
            actual: pi.len(),
        });
    }
    fitness_w_of(pi.weights(), kernels, kind)
}

fn fitness_w_of(weights: &[f64], kernels: &KernelSet, kind: FitnessKind) -> Result<Vec<f64>> {
    let conv = competition_pressure(weights, kernels);
    let k = kernels.capacity();
    match kind {
        FitnessKind::W1 => Ok(conv
            .iter()
            .zip(k)
            .map(|(c, k)| (1.0 - c / k).max(0.0))
            .collect()),
        FitnessKind::W2 => conv
            .iter()
            .zip(k)
            .enumerate()
            .map(|(x, (&c, &k))| {
                if c > 0.0 {
                    Ok(k / c)
                } else {
                    Err(Error::Domain {
                        site: kernels.space().site(x),
                        reason: "competition pressure is zero".into(),
                    })
                }
            })
            .collect(),
    }
}

/// Resampling law `p` for the current empirical distribution.
pub fn resampling_law(
    pi: &SimplexDistribution,
    kernels: &KernelSet,
    kind: FitnessKind,
    mutation: &MutationMatrix,
) -> Result<Vec<f64>> {
    let w = fitness_w(pi, kernels, kind)?;
    let mean = dot(pi.weights(), &w);
    if !(mean > 0.0) {
        return Err(Error::DegenerateState { mean });
    }
    let q: Vec<f64> = pi.weights().iter().zip(&w).map(|(p, w)| p * w / mean).collect();
    Ok(mutation.push_forward(&q))
}

/// One step of the deterministic map.
///
/// Subnormal masses are flushed to zero: they carry no information at
/// double precision and make every later dot product very slow.
pub fn det_map_step(
    pi: &SimplexDistribution,
    kernels: &KernelSet,
    kind: FitnessKind,
    mutation: &MutationMatrix,
) -> Result<SimplexDistribution> {
    let mut p = resampling_law(pi, kernels, kind, mutation)?;
    p.iter_mut().filter(|v| **v < f64::MIN_POSITIVE).for_each(|v| *v = 0.0);
    SimplexDistribution::from_mass(pi.space(), p)
}

/// One generation of finite-`N` multinomial resampling.
pub fn wf_sample_step<R: Rng + ?Sized>(
    counts: &PopulationCounts,
    kernels: &KernelSet,
    kind: FitnessKind,
    mutation: &MutationMatrix,
    rng: &mut R,
) -> Result<PopulationCounts> {
    let n = counts.total();
    if n == 0 {
        return Err(invalid("counts", "population must be nonempty"));
    }
    let pi = SimplexDistribution::from_mass(kernels.space(), counts.frequencies())?;
    let p = resampling_law(&pi, kernels, kind, mutation)?;
    Ok(PopulationCounts::new(multinomial(n, &p, rng)))
}

/// Multinomial draw by sequential conditional binomials.
pub fn multinomial<R: Rng + ?Sized>(n: u64, p: &[f64], rng: &mut R) -> Vec<u64> {
    let mut out = vec![0; p.len()];
    let mut remaining = n;
    let mut mass_left: f64 = p.iter().sum();
    for (i, &pi) in p.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if i == p.len() - 1 || pi >= mass_left {
            out[i] = remaining;
            break;
        }
        let q = (pi / mass_left).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("valid binomial").sample(rng);
        out[i] = k;
        remaining -= k;
        mass_left -= pi;
    }
    out
}

/// Stopping rule and bookkeeping for [`iterate_to_fixed_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPointOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Record every this many iterates (0 records only the ends).
    pub snapshot_every: usize,
    /// Sites with more mass than this count as support for the residual.
    pub support_threshold: f64,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 1_000_000,
            snapshot_every: 0,
            support_threshold: 1e-9,
        }
    }
}

/// Outcome of iterating the deterministic map.
#[derive(Debug, Clone)]
pub struct FixedPointRun {
    pub pi_hat: SimplexDistribution,
    /// `(iteration, π)` pairs.
    pub snapshots: Vec<(usize, SimplexDistribution)>,
    pub converged: bool,
    pub iterations: usize,
    /// `max - min` of `W` over the support of the last iterate.
    pub residual: f64,
}

/// Iterates the deterministic map until successive iterates are within
/// `tol` in sup-distance. `observe` sees every iterate, including the start.
pub fn iterate_with<F>(
    pi0: &SimplexDistribution,
    kernels: &KernelSet,
    kind: FitnessKind,
    mutation: &MutationMatrix,
    options: FixedPointOptions,
    mut observe: F,
) -> Result<FixedPointRun>
where
    F: FnMut(usize, &SimplexDistribution),
{
    if !(options.tol > 0.0) {
        return Err(invalid("tol", "must be positive"));
    }
    let mut snapshots = vec![(0, pi0.clone())];
    let mut current = pi0.clone();
    observe(0, &current);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        let next = det_map_step(&current, kernels, kind, mutation)?;
        iterations += 1;
        observe(iterations, &next);
        let moved = sup_distance_slices(next.weights(), current.weights());
        current = next;
        if options.snapshot_every > 0 && iterations % options.snapshot_every == 0 {
            snapshots.push((iterations, current.clone()));
        }
        if moved < options.tol {
            converged = true;
            break;
        }
    }
    if snapshots.last().map(|s| s.0) != Some(iterations) {
        snapshots.push((iterations, current.clone()));
    }
    let residual = stationarity_residual(&current, kernels, kind, options.support_threshold)?;
    Ok(FixedPointRun {
        pi_hat: current,
        snapshots,
        converged,
        iterations,
        residual,
    })
}

/// [`iterate_with`] without an observer.
pub fn iterate_to_fixed_point(
    pi0: &SimplexDistribution,
    kernels: &KernelSet,
    kind: FitnessKind,
    mutation: &MutationMatrix,
    options: FixedPointOptions,
) -> Result<FixedPointRun> {
    iterate_with(pi0, kernels, kind, mutation, options, |_, _| {})
}

/// Spread `max - min` of `W_x(π)` over sites with `π_x > threshold`; zero
/// exactly when the equal-fitness stationarity condition holds there.
pub fn stationarity_residual(
    pi: &SimplexDistribution,
    kernels: &KernelSet,
    kind: FitnessKind,
    threshold: f64,
) -> Result<f64> {
    let w = fitness_w(pi, kernels, kind)?;
    let (lo, hi) = pi
        .weights()
        .iter()
        .zip(&w)
        .filter(|(p, _)| **p > threshold)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, &w)| (lo.min(w), hi.max(w)));
    Ok(if hi >= lo { hi - lo } else { 0.0 })
}

/// `(1 - ε) δ_0 + ε · uniform`, the polymorphic start used for the
/// identity-mutation experiments.
pub fn near_delta_start(space: PhenotypeSpace, eps: f64) -> SimplexDistribution {
    SimplexDistribution::delta(space, 0).mix(&SimplexDistribution::uniform(space), eps)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;

    use super::*;
    use crate::kernels::{CapacitySpec, InteractionSpec, KernelSpec};
    use crate::seed::StreamRng;

    fn gaussian_kernels(l: usize, var_k: f64, var_c: f64) -> KernelSet {
        KernelSet::from_spec(&KernelSpec {
            half_width: l,
            capacity: CapacitySpec::Gaussian {
                variance: var_k,
                center: 0,
                exponent: None,
            },
            cooperation: InteractionSpec::Constant { value: 1.0 },
            competition: InteractionSpec::Gaussian { variance: var_c },
            assumption1: false,
        })
        .unwrap()
    }

    #[test]
    fn delta_zero_fitness_values() {
        let ks = gaussian_kernels(5, 9.0, 4.0);
        let d0 = SimplexDistribution::delta(ks.space(), 0);
        let w1 = fitness_w(&d0, &ks, FitnessKind::W1).unwrap();
        let w2 = fitness_w(&d0, &ks, FitnessKind::W2).unwrap();
        assert_eq!(w1[5], 0.0);
        assert_eq!(w2[5], 1.0);
    }

    #[test]
    fn w2_zero_pressure_is_domain_error() {
        let e = PhenotypeSpace::new(2).unwrap();
        let ks = KernelSet::new(
            e,
            vec![1.0; 5],
            vec![1.0; 9],
            InteractionSpec::Rectangular { radius: 0 }.fill(e).unwrap(),
        )
        .unwrap();
        let d0 = SimplexDistribution::delta(e, 0);
        let err = fitness_w(&d0, &ks, FitnessKind::W2).unwrap_err();
        assert!(matches!(err, Error::Domain { site: -2, .. }));
    }

    #[test]
    fn two_site_map_matches_hand_expansion() {
        // L = 1, K = (0.5, 1, 0.5), C_0 = 1, C_1 = 0.5, C_2 = 0, π = (0.5, 0.5, 0)
        let e = PhenotypeSpace::new(1).unwrap();
        let ks = KernelSet::new(
            e,
            vec![0.5, 1.0, 0.5],
            vec![1.0; 5],
            vec![0.0, 0.5, 1.0, 0.5, 0.0],
        )
        .unwrap();
        let pi = SimplexDistribution::new(e, vec![0.5, 0.5, 0.0]).unwrap();
        // (C*π) = (0.75, 0.75, 0.25); W2 = (2/3, 4/3, 2); mean = 1
        let next = det_map_step(&pi, &ks, FitnessKind::W2, &MutationMatrix::identity(e)).unwrap();
        assert!((next[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((next[1] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(next[2], 0.0);
        // W1 = (0, 0.25, 0.5); mean = 0.125
        let next = det_map_step(&pi, &ks, FitnessKind::W1, &MutationMatrix::identity(e)).unwrap();
        assert_eq!(next[0], 0.0);
        assert!((next[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn equal_fitness_on_support_is_fixed() {
        // Uniform π with constant K and constant C gives constant W.
        let e = PhenotypeSpace::new(3).unwrap();
        let ks = KernelSet::new(e, vec![0.8; 7], vec![1.0; 13], vec![0.5; 13]).unwrap();
        let u = SimplexDistribution::uniform(e);
        for kind in [FitnessKind::W1, FitnessKind::W2] {
            let next = det_map_step(&u, &ks, kind, &MutationMatrix::identity(e)).unwrap();
            assert!(crate::simplex::sup_distance(&next, &u) < 1e-15);
        }
        let run = iterate_to_fixed_point(
            &u,
            &ks,
            FitnessKind::W2,
            &MutationMatrix::identity(e),
            FixedPointOptions::default(),
        )
        .unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations, 1);
    }

    #[test]
    fn degenerate_w1_state_is_reported() {
        // Competition saturates capacity everywhere: W1 = 0 at every site.
        let e = PhenotypeSpace::new(1).unwrap();
        let ks = KernelSet::new(e, vec![0.5; 3], vec![1.0; 5], vec![1.0; 5]).unwrap();
        let u = SimplexDistribution::uniform(e);
        let err = det_map_step(&u, &ks, FitnessKind::W1, &MutationMatrix::identity(e)).unwrap_err();
        assert!(matches!(err, Error::DegenerateState { .. }));
    }

    #[test]
    fn tridiagonal_rows_are_stochastic() {
        let e = PhenotypeSpace::new(3).unwrap();
        let a = MutationMatrix::tridiagonal(e, 0.1).unwrap();
        for y in 0..7 {
            let s: f64 = (0..7).map(|x| a.entry(y, x)).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert!((a.entry(0, 1) - 0.2).abs() < 1e-15);
        assert!(MutationMatrix::from_rows(e, vec![0.5; 49]).is_err());
    }

    #[test]
    fn pure_resampling_law_is_pi() {
        let e = PhenotypeSpace::new(2).unwrap();
        let ks = KernelSet::new(e, vec![1.0; 5], vec![1.0; 9], vec![1.0; 9]).unwrap();
        let pi = SimplexDistribution::from_mass(e, vec![1.0, 2.0, 3.0, 0.0, 4.0]).unwrap();
        let p = resampling_law(&pi, &ks, FitnessKind::W2, &MutationMatrix::identity(e)).unwrap();
        for (a, b) in p.iter().zip(pi.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn multinomial_conserves_total() {
        let mut rng = StreamRng::seed_from_u64(5);
        for _ in 0..100 {
            let draw = multinomial(1000, &[0.1, 0.0, 0.6, 0.3], &mut rng);
            assert_eq!(draw.iter().sum::<u64>(), 1000);
            assert_eq!(draw[1], 0);
        }
    }
}
