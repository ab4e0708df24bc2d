mod common;

use common::{assumption1_kernels, interior, point};
use proptest::prelude::*;
use sympatric::fitness::{fitness_of, potential_of};
use sympatric::{fitness, mean_fitness, KernelSet, SimplexDistribution};

fn kernels_and_two_points() -> impl Strategy<Value = (KernelSet, Vec<f64>, Vec<f64>)> {
    assumption1_kernels(6).prop_flat_map(|k| {
        let n = k.len();
        (Just(k), interior(n), interior(n))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fitness_is_linear_in_pi((k, a, b) in kernels_and_two_points(), alpha in 0.0f64..=1.0) {
        let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| alpha * x + (1.0 - alpha) * y).collect();
        let lhs = fitness_of(&mixed, &k);
        let (ma, mb) = (fitness_of(&a, &k), fitness_of(&b, &k));
        for x in 0..k.len() {
            prop_assert!((lhs[x] - (alpha * ma[x] + (1.0 - alpha) * mb[x])).abs() < 1e-12);
        }
    }

    #[test]
    fn mean_fitness_gradient_is_twice_fitness((k, a, _b) in kernels_and_two_points()) {
        let m = fitness_of(&a, &k);
        let mbar = |w: &[f64]| w.iter().zip(fitness_of(w, &k)).map(|(p, m)| p * m).sum::<f64>();
        let h = 1e-6;
        for x in 0..k.len() {
            let mut up = a.clone();
            let mut down = a.clone();
            up[x] += h;
            down[x] -= h;
            let fd = (mbar(&up) - mbar(&down)) / (2.0 * h);
            let exact = 2.0 * m[x];
            prop_assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-3), "x={x} fd={fd} exact={exact}");
        }
    }

    #[test]
    fn fitness_is_bounded_by_capacity((k, a, _b) in kernels_and_two_points()) {
        let m = fitness(&point(&k, a), &k);
        for (x, &mx) in m.iter().enumerate() {
            let kx = k.capacity()[x];
            prop_assert!(mx >= 0.0 && mx <= kx + 1e-15 && kx <= 1.0);
        }
    }

    #[test]
    fn symmetric_inputs_give_symmetric_fitness((k, a, _b) in kernels_and_two_points()) {
        let n = k.len();
        let sym: Vec<f64> = (0..n).map(|i| 0.5 * (a[i] + a[n - 1 - i])).collect();
        let m = fitness_of(&sym, &k);
        for i in 0..n {
            prop_assert!((m[i] - m[n - 1 - i]).abs() < 1e-15);
        }
    }

    #[test]
    fn mean_fitness_is_the_pi_average((k, a, _b) in kernels_and_two_points()) {
        let p = point(&k, a);
        let m = fitness(&p, &k);
        let direct: f64 = p.weights().iter().zip(&m).map(|(p, m)| p * m).sum();
        prop_assert!((mean_fitness(&p, &m) - direct).abs() < 1e-15);
        prop_assert!((potential_of(p.weights(), &k, 0.0) - direct).abs() < 1e-15);
    }
}

#[test]
fn log_sum_is_maximal_at_uniform() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, Exp1};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for l in [1usize, 3, 8] {
        let e = sympatric::PhenotypeSpace::new(l).unwrap();
        let n = e.len() as f64;
        let bound = -n * n.ln();
        let u = SimplexDistribution::uniform(e);
        assert!((u.log_sum() - bound).abs() < 1e-12);
        for _ in 0..1000 {
            let w: Vec<f64> = (0..e.len()).map(|_| Exp1.sample(&mut rng)).collect();
            let p = SimplexDistribution::from_mass(e, w).unwrap();
            assert!(p.log_sum() < bound);
        }
    }
}
