mod common;

use common::{assumption1_kernels, gaussian_step, interior, point, sup};
use proptest::prelude::*;
use sympatric::landscape::{find_stationary_points, verify_stationarity, SearchOptions};
use sympatric::moran::ode::{eq9_rhs, integrate_eq9, potential_gradient, potential_growth, shahshahani_apply};
use sympatric::moran::{run_moran, Complemented, MoranParams, MoranRunOptions, MoranSimulator};
use sympatric::{stream, KernelSet, ModelParams, PhenotypeSpace, StreamTag};

fn kernels_and_point() -> impl Strategy<Value = (KernelSet, Vec<f64>)> {
    assumption1_kernels(6).prop_flat_map(|k| {
        let n = k.len();
        (Just(k), interior(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // The vector field is half the Shahshahani gradient of V.
    #[test]
    fn eq9_is_half_the_shahshahani_gradient((k, w) in kernels_and_point(), mu_tilde in 0.0f64..0.1) {
        let rhs = eq9_rhs(&w, &k, mu_tilde);
        let grad = shahshahani_apply(&w, &potential_gradient(&w, &k, mu_tilde));
        for (r, g) in rhs.iter().zip(&grad) {
            prop_assert!((r - 0.5 * g).abs() < 1e-10);
        }
    }

    #[test]
    fn closed_form_growth_matches_chain_rule((k, w) in kernels_and_point(), mu_tilde in 0.0f64..0.1) {
        let closed = potential_growth(&w, &k, mu_tilde);
        let chain: f64 = potential_gradient(&w, &k, mu_tilde)
            .iter()
            .zip(eq9_rhs(&w, &k, mu_tilde))
            .map(|(g, v)| g * v)
            .sum();
        prop_assert!(closed >= 0.0);
        prop_assert!((closed - chain).abs() <= 1e-9 * closed.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn potential_never_decreases_along_the_flow((k, w) in kernels_and_point(), mu_tilde in 1e-4f64..0.05) {
        let opts = sympatric::moran::IntegrateOptions { horizon: 200.0, ..Default::default() };
        let sol = integrate_eq9(&k, mu_tilde, &point(&k, w), &opts).unwrap();
        prop_assert!(sol.max_v_decrease.unwrap() <= 1e-8);
    }

    #[test]
    fn moran_moves_one_particle_per_event(seed in any::<u64>(), mu in 0.0f64..0.2) {
        let k = gaussian_step(3, 0.2, 2);
        let p = MoranParams::new(k, ModelParams::new(0.5, mu, 60).unwrap()).unwrap();
        let mut sim = MoranSimulator::new(p.clone(), p.monomorphic(0), seed, 0).unwrap();
        let mut before = sim.state().counts().to_vec();
        for _ in 0..500 {
            sim.step();
            let after = sim.state().counts().to_vec();
            let moved: u64 = before.iter().zip(&after).map(|(a, b)| a.abs_diff(*b)).sum();
            prop_assert!(moved == 0 || moved == 2);
            prop_assert_eq!(after.iter().sum::<u64>(), 60);
            before = after;
        }
    }
}

#[test]
fn mirrored_streams_give_mirrored_trajectories() {
    let k = gaussian_step(5, 0.1, 3);
    let p = MoranParams::new(k, ModelParams::new(0.5, 0.05, 400).unwrap()).unwrap();
    let mut start = vec![0u64; 11];
    start[2] = 150;
    start[5] = 200;
    start[9] = 50;
    let mirrored_start: Vec<u64> = start.iter().rev().copied().collect();
    let initial = sympatric::dd::PopulationCounts::new(start);
    let mirrored = sympatric::dd::PopulationCounts::new(mirrored_start);
    let mut a = MoranSimulator::with_streams(
        p.clone(),
        initial,
        stream(4, 0, StreamTag::EventClock),
        stream(4, 0, StreamTag::EventChoice),
    )
    .unwrap();
    let mut b = MoranSimulator::with_streams(
        p,
        mirrored,
        stream(4, 0, StreamTag::EventClock),
        Complemented(stream(4, 0, StreamTag::EventChoice)),
    )
    .unwrap();
    for _ in 0..20_000 {
        a.step();
        b.step();
        let ca = a.state().counts();
        let cb = b.state().counts();
        assert!(ca.iter().eq(cb.iter().rev()), "trajectories diverged at t = {}", a.time());
        assert_eq!(a.time(), b.time());
    }
}

#[test]
fn neutral_chain_visits_sites_evenly() {
    // m ≡ 1 makes selection neutral; the stationary mean of every π_x is
    // 1/(2L+1) by symmetry of the mutation kernel.
    let e = PhenotypeSpace::new(2).unwrap();
    let k = KernelSet::new(e, vec![1.0; 5], vec![1.0; 9], vec![0.0; 9]).unwrap();
    let p = MoranParams::new(k, ModelParams::new(0.5, 0.05, 50).unwrap()).unwrap();
    let every = 5.0;
    let opts = MoranRunOptions {
        horizon: 40_000.0,
        snapshot_times: (1..=8000).map(|i| i as f64 * every).collect(),
        seed: 21,
        ..Default::default()
    };
    let rec = run_moran(&p, p.monomorphic(0), &opts).unwrap();
    let burn = 200;
    let batches = 40;
    let kept = &rec.snapshots[burn..rec.snapshots.len() - 1];
    let size = kept.len() / batches;
    for x in 0..5 {
        let means: Vec<f64> = (0..batches)
            .map(|b| kept[b * size..(b + 1) * size].iter().map(|s| s.frequencies[x]).sum::<f64>() / size as f64)
            .collect();
        let grand = means.iter().sum::<f64>() / batches as f64;
        let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
        let se = (var / batches as f64).sqrt();
        assert!((grand - 0.2).abs() < 3.0 * se, "site {x}: mean {grand}, s.e. {se}");
    }
}

#[test]
fn converged_points_couple_mass_and_fitness() {
    let k = gaussian_step(4, 0.1, 3);
    let mu_tilde = 1e-3;
    let report = find_stationary_points(&k, mu_tilde, &SearchOptions { n_starts: 12, ..Default::default() }).unwrap();
    assert!(!report.points.is_empty());
    for p in &report.points {
        let d = verify_stationarity(&p.pi_hat, &k, mu_tilde, 20, 5).unwrap();
        assert!(d.passes(1e-8), "{d:?}");
        let u = 1.0 / k.len() as f64;
        let mbar = p.mean_fitness();
        for (w, m) in p.pi_hat.weights().iter().zip(&p.fitness) {
            assert_eq!(m >= &mbar, w >= &u);
        }
    }
    let sym = report.points.iter().find(|p| sup(p.pi_hat.weights(), p.pi_hat.mirrored().weights()) < 1e-6);
    assert!(sym.is_some(), "no symmetric stationary point found");
}
