use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sapd_core::datasets::*;
use sapd_core::linalg::dist;
use sapd_core::problem::*;
use sapd_core::sapd::{sapd_run_with, SapdOptions, SapdParams};
use sapd_core::vr::*;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn finite_sum(seed: u64, n_comp: usize, spread: f64) -> QuadraticFiniteSum {
    let mut r = rng(seed);
    let q = make_quadratic_saddle(5, 3, 0.5, 1.0, 1.5, &mut r).unwrap();
    make_quadratic_finite_sum(q, n_comp, spread, &mut r).unwrap()
}

fn small_steps(b: usize, b_x: usize, b_y: usize, q: usize, n_inner: usize) -> VrParams {
    VrParams { tau: 0.05, sigma: 0.05, theta: 1.0, b, b_x, b_y, q, n_inner, mu_x: 1.0 }
}

fn keep_all() -> VrOptions {
    VrOptions { keep_iterates: true, keep_estimators: true }
}

#[test]
fn recursion_is_exact_at_every_non_refresh_step() {
    let fs = finite_sum(0, 30, 0.5);
    let p = fs.spec().unwrap();
    let params = small_steps(20, 4, 4, 5, 40);
    let res = vr_sapd_run_with(&p, &params, &[0.2; 5], &[0.1; 3], &mut rng(1), &keep_all()).unwrap();
    let it = res.run.iterates.unwrap();
    let est = res.estimators.unwrap();
    let mut checked = 0;
    for k in 1..est.len() {
        let e = &est[k];
        assert_eq!(e.refresh, k % params.q == 0);
        if e.refresh {
            assert_eq!(e.batch.len(), params.b);
            continue;
        }
        assert_eq!(e.batch.len(), params.b_x);
        let t1 = batch_gradient(&fs, Axis::X, &e.batch, &it[k].0, &it[k + 1].1).unwrap();
        let t2 = batch_gradient(&fs, Axis::X, &e.batch, &it[k - 1].0, &it[k].1).unwrap();
        for i in 0..5 {
            assert_eq!(e.v[i], est[k - 1].v[i] + (t1[i] - t2[i]));
        }
        checked += 1;
    }
    assert_eq!(checked, 32);
}

#[test]
fn refresh_estimator_is_unbiased() {
    let fs = finite_sum(2, 50, 1.0);
    let mut r = rng(3);
    let x: Vec<f64> = (0..5).map(|_| r.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..3).map(|_| r.gen_range(-1.0..1.0)).collect();
    let mut exact = vec![0.0; 5];
    fs.grad_x(&x, &y, &mut exact);
    let (reps, b) = (2000, 8);
    let mut sum = vec![0.0; 5];
    let mut sum_sq = vec![0.0; 5];
    for _ in 0..reps {
        let v = batch_gradient(&fs, Axis::X, &sample_batch(50, b, &mut r), &x, &y).unwrap();
        for i in 0..5 {
            sum[i] += v[i];
            sum_sq[i] += v[i] * v[i];
        }
    }
    let n = reps as f64;
    for i in 0..5 {
        let mean = sum[i] / n;
        let se = ((sum_sq[i] / n - mean * mean) / (n - 1.0)).sqrt();
        assert!((mean - exact[i]).abs() <= 4.0 * se, "coord {i}: {mean} vs {}", exact[i]);
    }
}

#[test]
fn oracle_calls_match_period_count() {
    let fs = finite_sum(4, 20, 0.3);
    let p = fs.spec().unwrap();
    for (q, n_inner) in [(1, 7), (3, 9), (4, 10), (10, 3)] {
        let params = small_steps(12, 3, 2, q, n_inner);
        let res = vr_sapd_run(&p, &params, &[0.0; 5], &[0.0; 3], &mut rng(5)).unwrap();
        // x refreshes at k = 0, q, 2q, ...; y refreshes after k = q-1, 2q-1, ...; one initial y batch.
        let (n, q64) = (n_inner as u64, q as u64);
        let x_ref = n.div_ceil(q64);
        let y_ref = n / q64;
        let want = 12 + 12 * x_ref + 2 * 3 * (n - x_ref) + 12 * y_ref + 2 * 2 * (n - y_ref);
        assert_eq!(res.oracle_calls, want, "q={q}, N={n_inner}");
        assert_eq!(params.oracle_calls(), want);
    }
}

/// Identical components make every batch mean the exact gradient, so the run is deterministic
/// SAPD with `theta = 1` up to rounding in the two ways of forming the extrapolation.
#[test]
fn identical_components_reduce_to_plain_sapd() {
    let fs = finite_sum(6, 10, 0.0);
    let p = fs.spec().unwrap();
    for (q, b) in [(1, 1), (1, 10), (4, 3)] {
        let vp = small_steps(b, 2, 2, q, 60);
        let sp = SapdParams { tau: vp.tau, sigma: vp.sigma, theta: 1.0, rho: 1.0, alpha: 0.0, mu_x: 1.0, n_inner: 60 };
        let (x0, y0) = ([0.5, -0.3, 0.2, 0.0, 1.0], [0.1, 0.2, -0.4]);
        let a = vr_sapd_run_with(&p, &vp, &x0, &y0, &mut rng(7), &keep_all()).unwrap().run;
        let s = sapd_run_with(&p, &sp, &x0, &y0, &mut rng(8), SapdOptions { keep_iterates: true }).unwrap();
        for ((xa, ya), (xs, ys)) in a.iterates.unwrap().iter().zip(s.iterates.unwrap().iter()) {
            assert!(dist(xa, xs) + dist(ya, ys) <= 1e-12, "q={q}, b={b}");
        }
        assert!(dist(&a.x_avg, &s.x_avg) <= 1e-12);
    }
}

#[test]
fn stationary_trajectory_bound_is_refresh_variance() {
    let fs = finite_sum(9, 50, 1.0);
    let traj = vec![(vec![0.3; 5], vec![-0.2; 3]); 13];
    let probe = spider_variance_probe(&fs, 1.0, 1.0, &traj, 10, 2, 4, 2000, &mut rng(10)).unwrap();
    for k in 0..12 {
        assert!((probe.bound[k] - probe.delta_sq / 10.0).abs() <= 1e-15 * probe.delta_sq);
        assert!(probe.mse[k] <= probe.bound[k] + 3.0 * probe.std_err[k], "k={k}");
    }
}

#[test]
fn variance_bound_dominates_along_a_moving_trajectory() {
    let fs = finite_sum(11, 50, 1.0);
    let p = fs.spec().unwrap();
    let c = fs.constants().smoothness;
    let params = small_steps(10, 3, 3, 6, 24);
    let res = vr_sapd_run_with(&p, &params, &[1.0; 5], &[-1.0; 3], &mut rng(12), &keep_all()).unwrap();
    let traj = res.run.iterates.unwrap();
    let probe = spider_variance_probe(&fs, c.l_xx, c.l_xy, &traj, params.b, params.b_x, params.q, 2000, &mut rng(13)).unwrap();
    for k in 0..probe.mse.len() {
        if k % params.q == 0 {
            assert!(probe.mse[k] <= probe.delta_sq / params.b as f64 + 3.0 * probe.std_err[k], "refresh k={k}");
        }
        assert!(probe.mse[k] <= probe.bound[k] + 3.0 * probe.std_err[k], "k={k}");
    }
}

#[test]
fn probe_rejects_degenerate_input() {
    let fs = finite_sum(0, 5, 0.1);
    let one = vec![(vec![0.0; 5], vec![0.0; 3])];
    assert!(spider_variance_probe(&fs, 1.0, 1.0, &one, 2, 1, 1, 10, &mut rng(0)).is_err());
}

#[test]
fn invalid_params_are_rejected() {
    let fs = finite_sum(0, 5, 0.1);
    let p = fs.spec().unwrap();
    let mut bad = small_steps(4, 1, 1, 2, 5);
    bad.q = 0;
    assert!(vr_sapd_run(&p, &bad, &[0.0; 5], &[0.0; 3], &mut rng(0)).is_err());
    let mut bad = small_steps(4, 1, 1, 2, 5);
    bad.sigma = -1.0;
    assert!(vr_sapd_run(&p, &bad, &[0.0; 5], &[0.0; 3], &mut rng(0)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn same_seed_same_run(seed in 0u64..1000, q in 1usize..6) {
        let fs = finite_sum(seed, 15, 0.5);
        let p = fs.spec().unwrap();
        let params = small_steps(6, 2, 2, q, 15);
        let a = vr_sapd_run_with(&p, &params, &[0.1; 5], &[0.0; 3], &mut rng(seed), &keep_all()).unwrap();
        let b = vr_sapd_run_with(&p, &params, &[0.1; 5], &[0.0; 3], &mut rng(seed), &keep_all()).unwrap();
        prop_assert_eq!(a.run.iterates, b.run.iterates);
        prop_assert_eq!(a.run.oracle_calls, params.oracle_calls());
    }
}
