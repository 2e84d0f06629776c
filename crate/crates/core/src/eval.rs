//! Stationarity and gap metrics.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datasets::QuadraticSaddle;
use crate::error::{check_len, invalid, Result};
use crate::linalg::dist;
use crate::params::{merely_concave_params, scsc_params};
use crate::problem::{shifted_subproblem, Coupling, ProblemSpec};
use crate::sapd::{sapd_run, SapdParams};

/// Default accuracy of the nested prox solve.
pub const DEFAULT_PROX_TOL: f64 = 1e-9;
/// Default iteration budget of the nested prox solve.
pub const DEFAULT_PROX_BUDGET: usize = 2_000_000;

/// Iterations per restart of the nested solve when momentum is 1.
const CHUNK: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct StationarityEstimate {
    pub lambda: f64,
    /// Approximation of `prox_{lambda phi}(x)`.
    pub prox_point: Vec<f64>,
    /// Dual point paired with `prox_point`.
    pub dual_point: Vec<f64>,
    /// `||x - prox_point|| / lambda`
    pub norm: f64,
    /// Last step length of the nested solve.
    pub residual: f64,
    /// `phi_lambda(x)`, when the coupling exposes its value.
    pub envelope_value: Option<f64>,
    pub reliable: bool,
}

/// Parameters for the deterministic nested solve on a problem shifted by `mu_x`.
fn nested_params(p_constants: &crate::problem::ProblemConstants, mu_x: f64) -> SapdParams {
    if p_constants.convexity.mu_y > 0.0 {
        if let Ok(sp) = scsc_params(p_constants, mu_x, 0.5) {
            if sp.theta <= 0.999 {
                return sp;
            }
        }
    }
    merely_concave_params(p_constants, mu_x, CHUNK)
}

/// A feasible dual starting point: the prox of `g` at the origin.
pub fn dual_start<C: Coupling>(p: &ProblemSpec<C>) -> Result<Vec<f64>> {
    let (_, m) = p.dims();
    p.prox_g.prox(&vec![0.0; m], 1.0)
}

/// `||grad phi_lambda(x)||` with `prox_{lambda phi}(x)` from a deterministic nested solve of
/// `min_w max_y L(w, y) + ||w - x||^2/(2 lambda)`, stopped when the step length drops below `tol`.
pub fn moreau_stationarity<C: Coupling>(p: &ProblemSpec<C>, x: &[f64], lambda: f64, tol: f64) -> Result<StationarityEstimate> {
    moreau_stationarity_with(p, x, lambda, tol, DEFAULT_PROX_BUDGET, None)
}

pub fn moreau_stationarity_with<C: Coupling>(
    p: &ProblemSpec<C>,
    x: &[f64],
    lambda: f64,
    tol: f64,
    budget: usize,
    warm: Option<(&[f64], &[f64])>,
) -> Result<StationarityEstimate> {
    let gamma = p.constants.convexity.gamma;
    if !(lambda > 0.0 && lambda * gamma < 1.0) {
        return invalid(format!("lambda = {lambda} must lie in (0, 1/gamma)"));
    }
    if !(tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    let (n, _) = p.dims();
    check_len(x.len(), n)?;
    let mu_x = 1.0 / lambda - gamma;
    let exact = p.exact();
    let sub = shifted_subproblem(&exact, x, mu_x)?;
    let mut params = nested_params(&p.constants, mu_x);
    params.n_inner = params.n_inner.max(CHUNK).min(budget.max(1));
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut w, mut y) = match warm {
        Some((w, y)) => (w.to_vec(), y.to_vec()),
        None => (x.to_vec(), dual_start(p)?),
    };
    let mut used = 0usize;
    let mut residual = f64::INFINITY;
    while used < budget {
        let r = sapd_run(&sub, &params, &w, &y, &mut rng)?;
        used += params.n_inner;
        w = r.x_last;
        y = r.y_last;
        residual = r.last_step;
        if residual < tol {
            break;
        }
    }
    let reliable = residual < tol;
    let envelope_value = p
        .objective(&w, &y)
        .map(|v| v + crate::linalg::dist_sq(&w, x) / (2.0 * lambda));
    Ok(StationarityEstimate {
        lambda,
        norm: dist(x, &w) / lambda,
        prox_point: w,
        dual_point: y,
        residual,
        envelope_value,
        reliable,
    })
}

/// Result of maximizing `L(x, .)` for fixed `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualMax {
    pub y: Vec<f64>,
    pub residual: f64,
    pub converged: bool,
}

/// Prox-gradient ascent on `y -> Phi(x, y) - g(y)` with step `1/(L_yy + mu_y)`.
pub fn maximize_dual<C: Coupling>(p: &ProblemSpec<C>, x: &[f64], y0: &[f64], tol: f64, max_iter: usize) -> Result<DualMax> {
    let (_, m) = p.dims();
    check_len(y0.len(), m)?;
    let c = p.constants;
    let curv = c.smoothness.l_yy + c.convexity.mu_y;
    let step = if curv > 0.0 { 1.0 / curv } else { 1.0 };
    let mut y = y0.to_vec();
    let mut g = vec![0.0; m];
    let mut v = vec![0.0; m];
    let mut next = vec![0.0; m];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        p.coupling.grad_y(x, &y, &mut g);
        for i in 0..m {
            v[i] = y[i] + step * g[i];
        }
        p.prox_g.apply(&v, step, &mut next)?;
        residual = dist(&next, &y) / step;
        std::mem::swap(&mut y, &mut next);
        if residual < tol {
            break;
        }
    }
    Ok(DualMax { y, residual, converged: residual < tol })
}

/// Exact gap of the quadratic subproblem `Phi + (weight/2)||x - center||^2` at `(x, y)`.
pub fn quadratic_gap(q: &QuadraticSaddle, center: &[f64], weight: f64, x: &[f64], y: &[f64]) -> Result<f64> {
    q.subproblem_gap(center, weight, x, y)
}
