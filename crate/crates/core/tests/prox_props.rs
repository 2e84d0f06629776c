use proptest::collection::vec;
use proptest::prelude::*;
use sapd_core::linalg::dist;
use sapd_core::prox::*;

/// Exact projection by enumerating supports: on support `S` the projection is `v_S - t` with
/// `t = (sum v_S - 1)/|S|`; the closest feasible candidate wins.
fn brute_force_simplex(v: &[f64]) -> Vec<f64> {
    let d = v.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 1u32..(1 << d) {
        let support: Vec<usize> = (0..d).filter(|i| mask & (1 << i) != 0).collect();
        let t = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
        let mut x = vec![0.0; d];
        let mut feasible = true;
        for &i in &support {
            x[i] = v[i] - t;
            feasible &= x[i] >= -1e-15;
        }
        if feasible {
            let dd = dist(&x, v);
            if best.as_ref().map_or(true, |(b, _)| dd < *b) {
                best = Some((dd, x));
            }
        }
    }
    best.unwrap().1
}

/// KKT residual of `min (eta2/2)||n y - 1||^2 + ||y - v||^2/(2 step)` over the simplex.
fn kkt_residual(y: &[f64], v: &[f64], step: f64, eta2: f64, n: usize) -> f64 {
    let nf = n as f64;
    let grad: Vec<f64> = y.iter().zip(v).map(|(yi, vi)| eta2 * nf * (nf * yi - 1.0) + (yi - vi) / step).collect();
    let support: Vec<usize> = (0..y.len()).filter(|&i| y[i] > 0.0).collect();
    let c = support.iter().map(|&i| grad[i]).sum::<f64>() / support.len() as f64;
    let mut r = (y.iter().sum::<f64>() - 1.0).abs();
    for i in 0..y.len() {
        r = r.max(-y[i]);
        r = r.max(if y[i] > 0.0 { (grad[i] - c).abs() } else { (c - grad[i]).max(0.0) });
    }
    r
}

#[test]
fn box_examples() {
    let b = ProxKind::uniform_box(2, -1.0, 1.0);
    assert_eq!(b.prox(&[3.0, -3.0], 0.1).unwrap(), vec![1.0, -1.0]);
    assert_eq!(b.prox(&[0.2, -0.4], 5.0).unwrap(), vec![0.2, -0.4]);
    assert!(prox_box(&[0.0], 1.0, &[1.0], &[0.0]).is_err());
    assert!(prox_box(&[0.0, 1.0], 1.0, &[0.0], &[1.0]).is_err());
}

#[test]
fn dual_regularizer_centers_on_uniform() {
    // With v = 0 the minimizer of ||n y - 1||^2 + ||y||^2 / (2 eta2 step) on the simplex is uniform.
    let y = prox_quadratic_over_simplex(&[0.0; 4], 0.3, 2.0, 4).unwrap();
    for v in y {
        assert!((v - 0.25).abs() < 1e-15);
    }
}

fn operators(dim: usize) -> Vec<ProxKind> {
    vec![
        ProxKind::Zero,
        ProxKind::uniform_box(dim, -0.5, 1.5),
        ProxKind::Simplex,
        ProxKind::QuadraticOverSimplex { eta2: 0.7, n_scale: dim },
        ProxKind::ScaledSquaredDistance { weight: 2.5, anchor: vec![0.3; dim] },
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn simplex_matches_enumeration(v in (2usize..=5).prop_flat_map(|d| vec(-3.0f64..3.0, d))) {
        let p = project_simplex(&v).unwrap();
        let q = brute_force_simplex(&v);
        prop_assert!(dist(&p, &q) <= 1e-8, "{:?} vs {:?}", p, q);
        prop_assert!(p.iter().all(|&x| x >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn quadratic_over_simplex_kkt(
        v in (1usize..=12).prop_flat_map(|d| vec(-5.0f64..5.0, d)),
        step in 0.01f64..10.0,
        eta2 in 0.0f64..3.0,
    ) {
        let n = v.len();
        let y = prox_quadratic_over_simplex(&v, step, eta2, n).unwrap();
        prop_assert!(kkt_residual(&y, &v, step, eta2, n) <= 1e-8);
    }

    #[test]
    fn proxes_are_nonexpansive(
        (u, w) in (1usize..=8).prop_flat_map(|d| (vec(-4.0f64..4.0, d), vec(-4.0f64..4.0, d))),
        step in 0.01f64..5.0,
    ) {
        for op in operators(u.len()) {
            let pu = op.prox(&u, step).unwrap();
            let pw = op.prox(&w, step).unwrap();
            prop_assert!(dist(&pu, &pw) <= dist(&u, &w) * (1.0 + 1e-12) + 1e-14, "{:?}", op);
        }
    }

    #[test]
    fn box_ignores_step(v in vec(-4.0f64..4.0, 3), s1 in 0.01f64..5.0, s2 in 0.01f64..5.0) {
        let b = ProxKind::uniform_box(3, -1.0, 2.0);
        prop_assert_eq!(b.prox(&v, s1).unwrap(), b.prox(&v, s2).unwrap());
    }
}
