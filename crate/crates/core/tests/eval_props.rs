use nalgebra::DMatrix;
use proptest::collection::vec;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sapd_core::datasets::*;
use sapd_core::eval::*;
use sapd_core::linalg::{dist, norm};
use sapd_core::SolverError;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn wcsc(seed: u64, n: usize, m: usize) -> QuadraticSaddle {
    let mut r = rng(seed);
    make_quadratic_saddle(n, m, 1.0, 0.5, 1.5, &mut r).unwrap()
}

fn random_point(dim: usize, scale: f64, r: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| r.gen_range(-scale..scale)).collect()
}

#[test]
fn nested_prox_matches_linear_solve() {
    for seed in 0..5 {
        let q = wcsc(seed, 8, 4);
        let p = q.spec().unwrap();
        let lambda = 0.5 / q.gamma();
        let x = random_point(8, 1.0, &mut rng(100 + seed));
        let est = moreau_stationarity(&p, &x, lambda, DEFAULT_PROX_TOL).unwrap();
        assert!(est.reliable);
        let want = q.moreau_prox(&x, lambda).unwrap();
        assert!(dist(&est.prox_point, &want) <= 1e-6, "seed {seed}");
        assert!((est.norm - q.moreau_grad_norm(&x, lambda).unwrap()).abs() <= 1e-6 / lambda);
        assert!(dist(&est.dual_point, &q.best_response_y(&want)) <= 1e-5);
    }
}

#[test]
fn envelope_gradient_matches_central_differences() {
    let q = wcsc(7, 6, 3);
    let p = q.spec().unwrap();
    let lambda = 0.5;
    let x = random_point(6, 1.0, &mut rng(8));
    let est = moreau_stationarity(&p, &x, lambda, 1e-10).unwrap();
    let grad: Vec<f64> = x.iter().zip(&est.prox_point).map(|(a, b)| (a - b) / lambda).collect();
    let h = 1e-4;
    for i in 0..6 {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        let vp = moreau_stationarity(&p, &xp, lambda, 1e-10).unwrap().envelope_value.unwrap();
        let vm = moreau_stationarity(&p, &xm, lambda, 1e-10).unwrap().envelope_value.unwrap();
        let fd = (vp - vm) / (2.0 * h);
        assert!((fd - grad[i]).abs() <= 1e-3 * norm(&grad), "coord {i}: {fd} vs {}", grad[i]);
    }
}

#[test]
fn minimizer_of_convex_primal_is_stationary() {
    let q = wcsc(9, 5, 3);
    let p = q.spec().unwrap();
    let est = moreau_stationarity(&p, &[0.0; 5], 0.5, 1e-9).unwrap();
    assert!(est.norm <= 1e-12);
    assert!(est.reliable);
}

#[test]
fn merely_concave_toy_matches_clipped_formula() {
    let toy = BilinearToy { dim: 3 };
    let p = toy.spec(1.0).unwrap();
    let lambda = 0.5;
    for x in [[0.2, -0.1, 0.05], [1.5, -0.3, 0.0], [-2.0, 2.0, 0.4]] {
        let est = moreau_stationarity(&p, &x, lambda, 1e-10).unwrap();
        let want = BilinearToy::moreau_grad_norm(&x, lambda);
        assert!((est.norm - want).abs() <= 1e-6, "{x:?}: {} vs {want}", est.norm);
    }
}

#[test]
fn lambda_must_stay_below_inverse_modulus() {
    let q = wcsc(0, 3, 2);
    let p = q.spec().unwrap();
    assert!(matches!(moreau_stationarity(&p, &[0.0; 3], 1.0, 1e-9), Err(SolverError::InvalidInput(_))));
    assert!(moreau_stationarity(&p, &[0.0; 3], 0.0, 1e-9).is_err());
    assert!(moreau_stationarity(&p, &[0.0; 3], 0.5, 0.0).is_err());
}

#[test]
fn tiny_budget_is_flagged_unreliable() {
    let q = wcsc(1, 6, 3);
    let p = q.spec().unwrap();
    let est = moreau_stationarity_with(&p, &[1.0; 6], 0.5, 1e-12, 3, None).unwrap();
    assert!(!est.reliable);
}

#[test]
fn dual_maximizer_is_best_response() {
    let q = wcsc(2, 6, 4);
    let p = q.spec().unwrap();
    let x = random_point(6, 2.0, &mut rng(3));
    let d = maximize_dual(&p, &x, &[0.0; 4], 1e-12, 10_000).unwrap();
    assert!(d.converged);
    assert!(dist(&d.y, &q.best_response_y(&x)) <= 1e-10);
}

/// Fine grid over `[-3, 3]`: `max_y (x^2/2 + xy - y^2/2)` and `min_x (x^2/2 + xy - y^2/2)`.
fn grid_gap(x: f64, y: f64) -> f64 {
    let l = |a: f64, b: f64| 0.5 * a * a + a * b - 0.5 * b * b;
    let grid = (0..=600_000).map(|i| -3.0 + i as f64 * 1e-5);
    let hi = grid.clone().map(|yy| l(x, yy)).fold(f64::NEG_INFINITY, f64::max);
    let lo = grid.map(|xx| l(xx, y)).fold(f64::INFINITY, f64::min);
    hi - lo
}

#[test]
fn scalar_gap_example() {
    let q = QuadraticSaddle::from_matrices(DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0), 1.0, 0.5).unwrap();
    let g = quadratic_gap(&q, &[0.0], 0.0, &[1.0], &[0.0]).unwrap();
    assert!((g - 1.0).abs() < 1e-14);
    assert!((g - grid_gap(1.0, 0.0)).abs() < 1e-8);
    let g2 = quadratic_gap(&q, &[0.0], 0.0, &[0.3], &[-0.7]).unwrap();
    assert!((g2 - grid_gap(0.3, -0.7)).abs() < 1e-8);
}

#[test]
fn gap_vanishes_at_the_saddle() {
    let q = wcsc(4, 6, 3);
    let center = random_point(6, 1.0, &mut rng(5));
    let (xs, ys) = q.subproblem_saddle(&center, 2.0).unwrap();
    assert!(quadratic_gap(&q, &center, 2.0, &xs, &ys).unwrap().abs() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn gap_dominates_best_response_distances(
        seed in 0u64..50, weight in 1.2f64..5.0,
        x in vec(-3.0f64..3.0, 5), y in vec(-3.0f64..3.0, 3), c in vec(-1.0f64..1.0, 5),
    ) {
        let q = wcsc(seed, 5, 3);
        let g = quadratic_gap(&q, &c, weight, &x, &y).unwrap();
        prop_assert!(g >= -1e-10);
        let mu_x = weight - q.gamma();
        let xr = q.subproblem_best_response_x(&c, weight, &y).unwrap();
        let yr = q.best_response_y(&x);
        let lower = mu_x / 4.0 * dist(&xr, &x).powi(2) + q.mu_y() / 4.0 * dist(&yr, &y).powi(2);
        prop_assert!(g >= lower - 1e-10 * (1.0 + g.abs()));
    }

    #[test]
    fn moreau_gradient_norm_is_lipschitz(
        seed in 0u64..50, lam in 0.05f64..0.95,
        x1 in vec(-3.0f64..3.0, 5), x2 in vec(-3.0f64..3.0, 5),
    ) {
        let q = wcsc(seed, 5, 3);
        let lambda = lam / q.gamma();
        let g1 = q.moreau_grad_norm(&x1, lambda).unwrap();
        let g2 = q.moreau_grad_norm(&x2, lambda).unwrap();
        prop_assert!((g1 - g2).abs() <= dist(&x1, &x2) / lambda * (1.0 + 1e-12) + 1e-12);
    }
}
