use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sapd_core::datasets::*;
use sapd_core::linalg::{dist, norm};
use sapd_core::outer::*;
use sapd_core::params::{theorem1_schedule, vr_schedule, DEFAULT_ZETA};
use sapd_core::problem::*;
use sapd_core::sapd::SapdParams;
use sapd_core::vr::VrParams;
use sapd_core::SolverError;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn wcsc(seed: u64, n: usize, m: usize) -> QuadraticSaddle {
    make_quadratic_saddle(n, m, 1.0, 0.5, 1.5, &mut rng(seed)).unwrap()
}

fn start(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.gen_range(-1.0..1.0)).collect()
}

#[test]
fn zero_stages_return_the_start() {
    let q = wcsc(0, 4, 2);
    let p = q.spec().unwrap();
    let s = theorem1_schedule(&q.constants(), 0.1, 1.0).unwrap();
    let cfg = OuterConfig::new(0, InnerSchedule::Sapd(s.params));
    let r = sapd_plus_run(&p, &cfg, &[0.3; 4], &[-0.1; 2], &mut rng(0), None).unwrap();
    assert_eq!(r.x, vec![0.3; 4]);
    assert_eq!(r.y, vec![-0.1; 2]);
    assert_eq!((r.stages_run, r.oracle_calls, r.trace.len()), (0, 0, 1));
}

#[test]
fn stage_saddles_are_moreau_proxes_of_the_centers() {
    let q = wcsc(1, 6, 3);
    let p = q.spec().unwrap();
    let s = theorem1_schedule(&q.constants(), 0.1, 1.0).unwrap();
    let mu_x = s.params.mu_x;
    let lambda = 1.0 / (q.gamma() + mu_x);
    let mut centers = vec![start(6, 2)];
    let mut record = |x: &[f64], _: &[f64]| {
        centers.push(x.to_vec());
        0.0
    };
    let cfg = OuterConfig::new(15, InnerSchedule::Sapd(s.params));
    sapd_plus_run(&p, &cfg, &start(6, 2), &[0.0; 3], &mut rng(3), Some(&mut record)).unwrap();
    // The observer also sees the starting point.
    centers.remove(0);
    assert_eq!(centers.len(), 16);
    for c in &centers {
        let (xs, _) = q.subproblem_saddle(c, q.gamma() + mu_x).unwrap();
        assert!(dist(&xs, &q.moreau_prox(c, lambda).unwrap()) <= 1e-8);
    }
}

#[test]
fn oracle_calls_add_up_over_stages() {
    let q = wcsc(4, 5, 3).with_noise(NoiseLevels { delta_x: 0.1, delta_y: 0.1 });
    let p = q.spec().unwrap();
    let s = theorem1_schedule(&q.constants(), 0.5, 1.0).unwrap();
    let cfg = OuterConfig::new(12, InnerSchedule::Sapd(s.params));
    let r = sapd_plus_run(&p, &cfg, &[0.5; 5], &[0.0; 3], &mut rng(5), None).unwrap();
    let per_stage = 2 * s.params.n_inner as u64 + 1;
    assert_eq!(r.oracle_calls, 12 * per_stage);
    for (t, rec) in r.trace.iter().enumerate() {
        assert_eq!(rec.stage, t);
        assert_eq!(rec.oracle_calls, t as u64 * per_stage);
    }

    let fs = make_quadratic_finite_sum(wcsc(4, 5, 3), 40, 0.3, &mut rng(6)).unwrap();
    let pf = fs.spec().unwrap();
    let v = vr_schedule(&fs.constants(), 0.5, 1.0, 2, 2, 3, DEFAULT_ZETA).unwrap();
    let mut vp = v.params;
    vp.n_inner = vp.n_inner.min(30);
    let cfg = OuterConfig::new(5, InnerSchedule::Vr(vp));
    let r = sapd_plus_vr_run(&pf, &cfg, &[0.5; 5], &[0.0; 3], &mut rng(7), None).unwrap();
    assert_eq!(r.oracle_calls, 5 * vp.oracle_calls());
}

#[test]
fn stationarity_target_stops_early() {
    let q = wcsc(8, 6, 3);
    let p = q.spec().unwrap();
    let eps = 0.05;
    let s = theorem1_schedule(&q.constants(), eps, 1.0).unwrap();
    let cfg = OuterConfig::new(s.t_outer, InnerSchedule::Sapd(s.params))
        .with_stop_rule(StopRule::StationarityTarget { epsilon: eps, check_every: 5 });
    let r = sapd_plus_run(&p, &cfg, &start(6, 9), &[0.0; 3], &mut rng(10), None).unwrap();
    assert!(r.converged);
    assert!(r.stages_run < s.t_outer);
    assert_eq!(r.stages_run % 5, 0);
    let lambda = 0.5 / q.gamma();
    assert!(q.moreau_grad_norm(&r.x, lambda).unwrap() <= eps * (1.0 + 1e-6));
}

#[test]
fn monitoring_records_requested_stages() {
    let q = wcsc(11, 4, 2);
    let p = q.spec().unwrap();
    let s = theorem1_schedule(&q.constants(), 0.1, 1.0).unwrap();
    let cfg = OuterConfig::new(7, InnerSchedule::Sapd(s.params)).with_monitor(3);
    let r = sapd_plus_run(&p, &cfg, &start(4, 12), &[0.0; 2], &mut rng(13), None).unwrap();
    let measured: Vec<usize> = r.trace.iter().filter(|t| t.stationarity.is_some()).map(|t| t.stage).collect();
    assert_eq!(measured, vec![0, 3, 6, 7]);
    let last = r.trace.last().unwrap().stationarity.unwrap();
    assert!((last - q.moreau_grad_norm(&r.x, 0.5).unwrap()).abs() <= 1e-6);
}

#[test]
fn schedule_kind_must_match_the_driver() {
    let q = wcsc(0, 4, 2);
    let p = q.spec().unwrap();
    let vp = VrParams { tau: 0.1, sigma: 0.1, theta: 1.0, b: 2, b_x: 1, b_y: 1, q: 2, n_inner: 4, mu_x: 1.0 };
    let cfg = OuterConfig::new(1, InnerSchedule::Vr(vp));
    assert!(matches!(sapd_plus_run(&p, &cfg, &[0.0; 4], &[0.0; 2], &mut rng(0), None), Err(SolverError::Config(_))));
}

#[test]
fn inner_divergence_reports_its_stage() {
    let q = wcsc(0, 4, 2);
    let p = q.spec().unwrap();
    let bad = SapdParams { tau: 50.0, sigma: 50.0, theta: 0.5, rho: 0.5, alpha: 0.0, mu_x: 1.0, n_inner: 10_000 };
    let cfg = OuterConfig::new(3, InnerSchedule::Sapd(bad));
    match sapd_plus_run(&p, &cfg, &[1.0; 4], &[1.0; 2], &mut rng(0), None) {
        Err(SolverError::Stage { stage: 1, source }) => assert!(matches!(*source, SolverError::Diverged { .. })),
        other => panic!("unexpected {:?}", other.map(|r| r.stages_run)),
    }
}

#[test]
fn smoothing_weight_example() {
    let toy = BilinearToy { dim: 1 };
    let p = toy.spec(1.0).unwrap();
    assert_eq!(p.dual_diameter, Some(2.0));
    let mu = smoothing_mu(&p.constants, 0.1, 2.0);
    assert!((mu - 0.01 / 96.0).abs() < 1e-18);
    assert!((mu - 1.042e-4).abs() < 1e-7);

    let mut c = p.constants;
    c.smoothness.l_yy = 1e-3;
    let second = 1e-3 * 0.1 / (2.0 * 6f64.sqrt() * 2.0);
    assert!((smoothing_mu(&c, 0.1, 2.0) - second).abs() < 1e-18);
}

#[test]
fn smoothed_coupling_pulls_toward_the_anchor() {
    let toy = BilinearToy { dim: 2 };
    let p = toy.spec(1.0).unwrap();
    let sp = smoothed_problem(&p, &[0.5, -0.5], 0.2).unwrap();
    let mut g = [0.0; 2];
    sp.coupling.grad_y(&[1.0, 2.0], &[0.0, 0.0], &mut g);
    assert!((g[0] - (1.0 + 0.1)).abs() < 1e-15 && (g[1] - (2.0 - 0.1)).abs() < 1e-15);
    assert_eq!(sp.constants.convexity.mu_y, 0.2);
    assert_eq!(sp.constants.smoothness.l_yy, 0.2);
    assert!(smoothed_problem(&p, &[0.0, 0.0], 0.0).is_err());
}

#[test]
fn smoothing_needs_a_bounded_dual_domain() {
    let toy = BilinearToy { dim: 1 };
    let mut p = toy.spec(1.0).unwrap();
    p.dual_diameter = None;
    let t = SmoothTemplate { gap0: 1.0, max_stages: Some(1), check_every: 1, anchor: None };
    assert!(matches!(smooth_then_solve(&p, 0.1, &t, &[1.0], &[0.0], &mut rng(0)), Err(SolverError::Config(_))));
}

#[test]
fn smoothed_toy_reaches_original_stationarity() {
    let toy = BilinearToy { dim: 1 };
    let p = toy.spec(1.0).unwrap();
    let eps = 0.1;
    let t = SmoothTemplate { gap0: 1.0, max_stages: None, check_every: 10, anchor: None };
    let r = smooth_then_solve(&p, eps, &t, &[1.0], &[0.0], &mut rng(1)).unwrap();
    assert!(r.outer.converged);
    assert!((r.inner_epsilon - eps / (2.0 * 6f64.sqrt())).abs() < 1e-15);
    let lambda = 0.5;
    assert!(BilinearToy::moreau_grad_norm(&r.outer.x, lambda) <= eps);
    assert!(r.outer.y.iter().all(|v| (-1.0..=1.0).contains(v)));
}

#[test]
fn refinement_matches_primal_gradient() {
    let q = wcsc(14, 6, 3);
    let p = q.spec().unwrap();
    let lambda = 0.5 / q.gamma();
    let x_eps = start(6, 15);
    let r = refine_to_gradient_mapping(&p, &x_eps, lambda, 0.1, &mut rng(16), None).unwrap();
    assert!(r.reliable);
    // With f = 0 the mapping is the gradient of the primal function, H x.
    let h = q.primal_hessian();
    let grad = h * nalgebra::DVector::from_column_slice(&r.x);
    assert!((r.mapping_norm - grad.norm()).abs() <= 1e-3);
    assert!(dist(&r.x, &q.moreau_prox(&x_eps, lambda).unwrap()) < dist(&x_eps, &q.moreau_prox(&x_eps, lambda).unwrap()));
}

#[test]
fn refinement_at_a_stationary_point_stays_put() {
    let q = wcsc(17, 5, 2);
    let p = q.spec().unwrap();
    let r = refine_to_gradient_mapping(&p, &[0.0; 5], 0.5, 0.1, &mut rng(18), Some(50)).unwrap();
    assert!(r.mapping_norm <= 1e-12);
    assert!(norm(&r.x) <= 1e-12);
    assert!(refine_to_gradient_mapping(&p, &[0.0; 5], 1.0, 0.1, &mut rng(18), None).is_err());
}
