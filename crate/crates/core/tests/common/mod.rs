#![allow(dead_code)]

use proptest::prelude::*;
use sympatric::{KernelSet, PhenotypeSpace, SimplexDistribution};

/// `K_x = exp(-x²/20)`, `B_x = b + (1 - b) 1{|x| >= m}`.
pub fn gaussian_step(l: usize, b: f64, m: usize) -> KernelSet {
    let e = PhenotypeSpace::new(l).unwrap();
    let k = e.sites().map(|x| (-(x * x) as f64 / 20.0).exp()).collect();
    KernelSet::assumption1(e, k, b, m).unwrap()
}

/// Symmetric unimodal capacity with `K_0 = 1` built from positive
/// decrements: `K_{±i} = Π_{j<=i} r_j`.
pub fn capacity_from_ratios(ratios: &[f64]) -> Vec<f64> {
    let mut half = vec![1.0];
    for r in ratios {
        half.push(half.last().unwrap() * r);
    }
    let mut k: Vec<f64> = half.iter().rev().copied().collect();
    k.extend_from_slice(&half[1..]);
    k
}

/// Random kernels satisfying the structural hypothesis on `[-L, L]`.
pub fn assumption1_kernels(max_l: usize) -> impl Strategy<Value = KernelSet> {
    (1..=max_l)
        .prop_flat_map(|l| {
            (
                Just(l),
                prop::collection::vec(0.05f64..1.0, l),
                0.0f64..0.95,
                1..=2 * l,
            )
        })
        .prop_map(|(l, ratios, b, m)| {
            let e = PhenotypeSpace::new(l).unwrap();
            KernelSet::assumption1(e, capacity_from_ratios(&ratios), b, m).unwrap()
        })
}

/// Interior point of the simplex with `n` sites.
pub fn interior(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1.0, n).prop_map(|w| {
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect()
    })
}

pub fn point(kernels: &KernelSet, w: Vec<f64>) -> SimplexDistribution {
    SimplexDistribution::new(kernels.space(), w).unwrap()
}

pub fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
