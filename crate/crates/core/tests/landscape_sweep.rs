mod common;

use common::{assumption1_kernels, gaussian_step};
use proptest::prelude::*;
use rand::Rng;
use sympatric::fitness::potential_of;
use sympatric::landscape::face::face_solve;
use sympatric::landscape::{
    bound_audit, face_local_max, find_stationary_points, three_point_formula, two_point_formula, BoundAuditOptions,
    FaceSpec, SearchOptions,
};
use sympatric::{stream, KernelSet, StreamTag};

fn kernels_with_offset() -> impl Strategy<Value = (KernelSet, i64)> {
    assumption1_kernels(8).prop_flat_map(|k| {
        let m = k.step().unwrap().m as i64;
        (Just(k), -m..=m)
    })
}

/// Kernels with an offset whose two-site support `{-x, -x + M}` fits on
/// the lattice.
fn two_point_cases() -> impl Strategy<Value = (KernelSet, i64)> {
    (3..=8usize)
        .prop_flat_map(|l| (Just(l), 2..l))
        .prop_flat_map(|(l, m)| {
            (
                prop::collection::vec(0.05f64..1.0, l),
                0.0f64..0.95,
                Just(m),
                1..=(m - 1).min(l - m),
            )
        })
        .prop_map(|(ratios, b, m, u)| {
            let e = sympatric::PhenotypeSpace::new(ratios.len()).unwrap();
            let k = KernelSet::assumption1(e, common::capacity_from_ratios(&ratios), b, m).unwrap();
            (k, -(u as i64))
        })
}

/// Like [`two_point_cases`], but with `b` below `min(K_u/K_v, K_v/K_u)`,
/// which is exactly when the formula puts `p` inside `(0, 1)`.
fn two_point_interior_cases() -> impl Strategy<Value = (KernelSet, i64)> {
    (3..=8usize)
        .prop_flat_map(|l| (Just(l), 2..l))
        .prop_flat_map(|(l, m)| {
            (
                prop::collection::vec(0.05f64..1.0, l),
                0.0f64..0.95,
                Just(m),
                1..=(m - 1).min(l - m),
            )
        })
        .prop_map(|(ratios, f, m, u)| {
            let l = ratios.len();
            let e = sympatric::PhenotypeSpace::new(l).unwrap();
            let capacity = common::capacity_from_ratios(&ratios);
            let (ku, kv) = (capacity[l + u], capacity[l + u + m]);
            let b = f * (ku / kv).min(kv / ku);
            let k = KernelSet::assumption1(e, capacity, b, m).unwrap();
            (k, -(u as i64))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    // The side conditions never hold together under the structural
    // hypothesis, so the formula is checked wherever it gives a point
    // inside the face.
    #[test]
    fn two_point_formula_matches_oracle((k, x) in two_point_interior_cases()) {
        let report = two_point_formula(x, &k).unwrap();
        let p = report.p.unwrap();
        prop_assert!(p > 0.0 && p < 1.0, "p = {}", p);
        let (u, v) = report.sites;
        let oracle = face_local_max(&FaceSpec::new(k.space(), vec![u, v]).unwrap(), &k).unwrap();
        prop_assert!((p - oracle.at(u)).abs() < 1e-8);
        prop_assert!((report.mean_fitness.unwrap() - oracle.mean_fitness).abs() < 1e-8);
    }

    #[test]
    fn two_point_side_conditions_are_never_jointly_met((k, x) in two_point_cases()) {
        let report = two_point_formula(x, &k).unwrap();
        prop_assert!(!report.conditions_hold());
    }

    #[test]
    fn three_point_formula_matches_oracle((k, x) in kernels_with_offset()) {
        let Ok(report) = three_point_formula(x, &k) else { return Ok(()) };
        prop_assume!(report.conditions_hold());
        let oracle = report.oracle.as_ref().unwrap();
        let s = report.symmetric.unwrap();
        prop_assert!((s.p - oracle.at(report.sites[0])).abs() < 1e-8);
        prop_assert!((s.q - oracle.at(report.sites[1])).abs() < 1e-8);
        prop_assert!((s.mean_fitness - oracle.mean_fitness).abs() < 1e-8);
        prop_assert!(report.printed_agrees() || report.traced_to_a);
    }

    #[test]
    fn face_solution_scales_with_total_mass((k, x) in kernels_with_offset(), scale in prop::sample::select(vec![0.5, 2.0])) {
        let m = k.step().unwrap().m as i64;
        let support: Vec<i64> = [x - m, x, x + m].into_iter().filter(|y| k.space().index(*y).is_some()).collect();
        let face = FaceSpec::new(k.space(), support).unwrap();
        let Ok((unit, c1)) = face_solve(&face, &k, 1.0) else { return Ok(()) };
        let (scaled, ck) = face_solve(&face, &k, scale).unwrap();
        for (a, b) in unit.iter().zip(&scaled) {
            prop_assert!((scale * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        prop_assert!((scale * c1 - ck).abs() <= 1e-12 * ck.abs().max(1.0));
    }
}

#[test]
fn reported_maxima_beat_nearby_points() {
    let mut rng = stream(1, 0, StreamTag::Setup);
    for (k, mu_tilde) in [(gaussian_step(4, 0.1, 3), 1e-3), (gaussian_step(3, 0.01, 2), 1e-4)] {
        let report = find_stationary_points(&k, mu_tilde, &SearchOptions { n_starts: 16, ..Default::default() }).unwrap();
        let maxima: Vec<_> = report.local_maxima().collect();
        assert!(!maxima.is_empty());
        for p in maxima {
            assert!(p.max_eigenvalue < -1e-10);
            let w = p.pi_hat.weights();
            let v0 = potential_of(w, &k, mu_tilde);
            for _ in 0..100 {
                let mut d: Vec<f64> = (0..w.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mean = d.iter().sum::<f64>() / d.len() as f64;
                d.iter_mut().for_each(|v| *v -= mean);
                let norm = d.iter().fold(0.0f64, |a, v| a.max(v.abs()));
                let moved: Vec<f64> = w.iter().zip(&d).map(|(p, v)| p + 1e-4 * v / norm).collect();
                assert!(potential_of(&moved, &k, mu_tilde) < v0);
            }
        }
    }
}

#[test]
fn audits_hold_on_a_random_sweep() {
    let mut rng = stream(2, 0, StreamTag::Setup);
    let mut audited = 0;
    for _ in 0..12 {
        let l = rng.random_range(2..=5usize);
        let ratios: Vec<f64> = (0..l).map(|_| rng.random_range(0.2..0.95)).collect();
        let b = rng.random_range(0.0..0.5);
        let m = rng.random_range(1..=l);
        let e = sympatric::PhenotypeSpace::new(l).unwrap();
        let k = KernelSet::assumption1(e, common::capacity_from_ratios(&ratios), b, m).unwrap();
        let mu_tilde = 10f64.powf(rng.random_range(-7.0..-4.0));
        let report = find_stationary_points(&k, mu_tilde, &SearchOptions { n_starts: 8, ..Default::default() }).unwrap();
        for p in &report.points {
            let rows = bound_audit(p, &k, mu_tilde, &BoundAuditOptions::default()).unwrap();
            audited += 1;
            for r in rows.iter().filter(|r| r.is_hard_failure()) {
                panic!("{} failed at {:?}: {}", r.theorem, p.pi_hat.weights(), r.reason);
            }
        }
    }
    assert!(audited > 0);
}
