use proptest::prelude::*;
use sapd_core::params::*;
use sapd_core::problem::{NoiseLevels, ProblemConstants, SmoothnessConstants};
use sapd_core::SolverError;

fn constants(l_xx: f64, l_xy: f64, l_yx: f64, l_yy: f64, gamma: f64, mu_y: f64) -> ProblemConstants {
    ProblemConstants::new(SmoothnessConstants::new(l_xx, l_xy, l_yx, l_yy).unwrap(), gamma, mu_y, NoiseLevels::ZERO).unwrap()
}

fn unit() -> ProblemConstants {
    constants(1.0, 1.0, 1.0, 1.0, 1.0, 1.0)
}

fn log_uniform(lo: f64, hi: f64) -> impl Strategy<Value = f64> {
    (lo.ln()..hi.ln()).prop_map(f64::exp)
}

#[test]
fn beta_examples() {
    assert_eq!(beta_of(&unit()), 0.25);
    assert_eq!(beta_of(&constants(1.0, 1.0, 2.0, 1.0, 1.0, 4.0)), 0.0625);
    assert!((beta_of(&constants(1.0, 100.0, 1.0, 1.0, 1.0, 1.0)) - 0.005).abs() < 1e-15);
}

#[test]
fn theta_bar_hand_values() {
    let c = unit();
    let tb = theta_bar(&c.smoothness, 1.0, 1.0, 1.0, 0.25);
    assert!((tb.theta1 - 0.75).abs() < 1e-12);
    let by_hand = 1.0 - (0.5625 / 8.0) * ((1.0f64 + 16.0 / 0.5625).sqrt() - 1.0);
    assert!((tb.theta2 - by_hand).abs() < 1e-12);
    assert!((tb.theta2 - 0.6888).abs() < 1e-4);
    assert_eq!(tb.max(), tb.theta1);

    let d = LmiData::shifted(&c, 1.0);
    let p = theorem1_schedule(&c, 0.1, 1.0).unwrap().params;
    assert!(check_lmi(&build_lmi(&d, p.tau, p.sigma, 0.75, 0.75, p.alpha).unwrap()).feasible);
}

#[test]
fn theta_bar_2_vanishes_without_dual_curvature() {
    let c = constants(2.0, 1.0, 1.0, 0.0, 1.0, 1.0);
    assert_eq!(theta_bar(&c.smoothness, 1.0, 1.0, 1.0, 0.25).theta2, 0.0);
}

#[test]
fn noise_floor_examples() {
    let eps = 0.1;
    let dx = eps / 384f64.sqrt();
    let (t1, _) = theta_noise_floor(&NoiseLevels { delta_x: dx, delta_y: 0.0 }, 1.0, 1.0, eps);
    assert!(t1.abs() < 1e-12);
    let dy = eps / 3840f64.sqrt();
    let (_, t2) = theta_noise_floor(&NoiseLevels { delta_x: 0.0, delta_y: dy }, 2.0, 2.0, eps);
    assert!((t2 - 0.5).abs() < 1e-12);
}

#[test]
fn canonical_schedule() {
    let s = theorem1_schedule(&unit(), 0.1, 1.0).unwrap();
    let p = s.params;
    assert!((p.theta - 0.75).abs() < 1e-12);
    // tau = (1 - theta)/gamma and sigma = (1 - theta)/(mu_y theta)
    assert!((p.tau - 0.25).abs() < 1e-12);
    assert!((p.sigma - 1.0 / 3.0).abs() < 1e-12);
    assert_eq!(p.n_inner, 21);
    assert_eq!(s.t_outer, 9601);
    assert!(s.certificate.min_eigenvalue >= -LMI_TOL);
    assert_eq!(s.theta_noise, (0.0, 0.0));
}

#[test]
fn inner_iterations_ceiling() {
    assert_eq!(inner_iterations(0.75), 21);
    assert_eq!(inner_iterations(0.5), 10);
}

#[test]
fn dual_noise_dominated_schedule_still_certified() {
    let mut c = unit();
    c.noise = NoiseLevels { delta_x: 0.0, delta_y: 0.5 };
    let s = theorem1_schedule(&c, 0.1, 1.0).unwrap();
    assert_eq!(s.params.theta, s.theta_noise.1);
    assert!(s.params.theta > s.theta_bar.max());
    assert!(s.certificate.feasible);
}

#[test]
fn sufficient_conditions_examples() {
    let c = unit();
    let d = LmiData::shifted(&c, 1.0);
    let p = theorem1_schedule(&c, 0.1, 1.0).unwrap().params;
    let (pi1, pi2) = default_multipliers(&d, p.sigma, p.theta);
    assert!(check_sufficient_conditions(&d, p.tau, p.sigma, p.theta, pi1, pi2).all());
    let doubled = 2.0 / (d.l_xx_bar + pi1 * d.l_yx);
    let chk = check_sufficient_conditions(&d, doubled, p.sigma, p.theta, pi1, pi2);
    assert!(!chk.holds[2]);
    let near_one = check_sufficient_conditions(&d, 0.01, 0.01, 1.0 - 1e-12, 1.0, 1.0);
    assert!(near_one.holds[0] && near_one.holds[1]);
}

#[test]
fn vr_period_one_steps() {
    let c = constants(2.0, 1.5, 1.5, 0.7, 0.5, 1.0);
    let v = vr_schedule(&c, 0.1, 1.0, 3, 3, 1, DEFAULT_ZETA).unwrap();
    let lp = 2.0 + 2.0 * 0.5;
    assert!((v.params.tau - 1.0 / (1.5 + lp)).abs() < 1e-15);
    assert!((v.params.sigma - 1.0 / (2.0 * 0.7 + 1.5)).abs() < 1e-15);
    assert_eq!(v.params.b, 1);
    assert_eq!(v.params.theta, 1.0);
    assert!(v.certificate.feasible);
}

#[test]
fn vr_batch_rule() {
    let mut c = unit();
    c.noise = NoiseLevels { delta_x: 1.0, delta_y: 0.5 };
    let v = vr_schedule(&c, 0.5, 1.0, 1, 1, 1, DEFAULT_ZETA).unwrap();
    // max{144, 360 * 0.25} / 0.25
    assert_eq!(v.params.b, 576);
}

#[test]
fn wcmc_needs_smoothing() {
    let c = constants(1.0, 1.0, 1.0, 0.0, 1.0, 0.0);
    assert!(matches!(theorem1_schedule(&c, 0.1, 1.0), Err(SolverError::Precondition(_))));
}

/// Smallest theta satisfying the first three scalar conditions with `tau, sigma` tied to theta,
/// `pi2 = sqrt(theta)` and `pi1 = L_yx (1 - theta) / (beta mu_y)`.
fn bisect_theta1(d: &LmiData, beta: f64) -> f64 {
    let ok = |theta: f64| {
        let tau = (1.0 - theta) / d.mu_x;
        let sigma = (1.0 - theta) / (d.mu_y * theta);
        let pi1 = d.l_yx * (1.0 - theta) / (beta * d.mu_y);
        let h = check_sufficient_conditions(d, tau, sigma, theta, pi1, theta.sqrt()).holds;
        h[0] && h[1] && h[2]
    };
    let (mut lo, mut hi) = (1e-12, 1.0 - 1e-15);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn theta1_matches_bisection(
        l_xx in log_uniform(0.1, 10.0), l_xy in log_uniform(0.1, 10.0), l_yx in log_uniform(0.1, 10.0),
        l_yy in log_uniform(0.1, 10.0), gamma in log_uniform(0.1, 10.0), mu_y in log_uniform(0.01, 10.0),
    ) {
        let c = constants(l_xx, l_xy, l_yx, l_yy, gamma, mu_y);
        let beta = beta_of(&c);
        let tb = theta_bar(&c.smoothness, gamma, gamma, mu_y, beta);
        let d = LmiData::shifted(&c, gamma);
        prop_assert!((tb.theta1 - bisect_theta1(&d, beta)).abs() < 1e-6);
    }

    #[test]
    fn schedules_always_certified(
        l_xx in log_uniform(0.1, 10.0), l_xy in log_uniform(0.1, 10.0), l_yx in log_uniform(0.1, 10.0),
        l_yy in log_uniform(0.1, 10.0), gamma in log_uniform(0.1, 10.0), mu_y in log_uniform(0.01, 10.0),
        noisy in any::<bool>(), q in 1usize..8, bx in 1usize..16, by in 1usize..16,
    ) {
        let mut c = constants(l_xx, l_xy, l_yx, l_yy, gamma, mu_y);
        if noisy {
            c.noise = NoiseLevels { delta_x: 1.0, delta_y: 1.0 };
        }
        let s = theorem1_schedule(&c, 0.1, 1.0).unwrap();
        prop_assert!(s.certificate.min_eigenvalue >= -LMI_TOL);
        let v = vr_schedule(&c, 0.1, 1.0, bx, by, q, DEFAULT_ZETA).unwrap();
        prop_assert!(v.certificate.min_eigenvalue >= -LMI_TOL);
    }

    #[test]
    fn larger_momentum_stays_certified(
        l_xx in log_uniform(0.1, 10.0), l_xy in log_uniform(0.1, 10.0), l_yx in log_uniform(0.1, 10.0),
        l_yy in prop_oneof![Just(0.0), log_uniform(0.1, 10.0)],
        gamma in log_uniform(0.1, 10.0), mu_y in log_uniform(0.01, 10.0), frac in 0.0f64..0.999,
    ) {
        let c = constants(l_xx, l_xy, l_yx, l_yy, gamma, mu_y);
        let lb = scsc_params(&c, gamma, beta_of(&c)).unwrap().theta;
        let theta = lb + frac * (1.0 - lb);
        let p = params_for_theta(&c, theta, gamma).unwrap();
        let cert = certify_sapd(&c, &p).unwrap();
        prop_assert!(cert.feasible, "theta {} (lower bound {}) gives {}", theta, lb, cert.min_eigenvalue);
    }

    #[test]
    fn signed_and_absolute_forms_agree(
        l_xx_bar in log_uniform(0.1, 10.0), l_yx in log_uniform(0.1, 10.0), l_yy in log_uniform(0.1, 10.0),
        mu_x in log_uniform(0.1, 10.0), mu_y in log_uniform(0.1, 10.0),
        tau in log_uniform(0.01, 1.0), sigma in log_uniform(0.01, 1.0),
        theta in 0.05f64..1.0, rho in 0.05f64..1.0, a in 0.0f64..0.999,
    ) {
        let d = LmiData { l_xx_bar, l_yx, l_yy, mu_x, mu_y };
        let alpha = a / sigma;
        let g = check_lmi(&build_lmi(&d, tau, sigma, theta, rho, alpha).unwrap());
        let h = check_lmi(&build_lmi_abs(&d, tau, sigma, theta, rho, alpha).unwrap());
        // The two matrices are congruent, so their inertia matches away from the tolerance band.
        if g.min_eigenvalue.abs() > 1e-7 && h.min_eigenvalue.abs() > 1e-7 {
            prop_assert_eq!(g.feasible, h.feasible);
        }
    }
}

#[test]
fn alpha_at_ceiling_is_rejected() {
    let d = LmiData::shifted(&unit(), 1.0);
    assert!(matches!(build_lmi(&d, 0.25, 1.0 / 3.0, 0.75, 0.75, 3.0), Err(SolverError::Precondition(_))));
}

#[test]
fn tuning_helper() {
    let (q, b) = vr_tuning(400, 4.0);
    assert_eq!((q, b), (10, 40));
}

#[test]
fn best_alpha_never_loses_to_the_rule() {
    let c = unit();
    let p = theorem1_schedule(&c, 0.1, 1.0).unwrap().params;
    let (alpha, cert) = certify_sapd_best_alpha(&c, &p).unwrap();
    assert!(alpha >= 0.0 && alpha < 1.0 / p.sigma);
    assert!(cert.min_eigenvalue >= certify_sapd(&c, &p).unwrap().min_eigenvalue - 1e-12);
    // Steps far too long for the coupling cannot be certified by any alpha.
    let mut bad = p;
    bad.tau = 10.0;
    assert!(!certify_sapd_best_alpha(&c, &bad).unwrap().1.feasible);
}
