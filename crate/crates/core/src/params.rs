//! Step-size schedules and the matrix-inequality certificate that backs them.

use crate::error::{invalid, Result, SolverError};
use crate::linalg::symmetric_eigenvalues;
use crate::problem::{NoiseLevels, ProblemConstants, SmoothnessConstants};
use crate::sapd::SapdParams;
use crate::vr::VrParams;

/// Eigenvalues above `-LMI_TOL` count as nonnegative.
pub const LMI_TOL: f64 = 1e-9;

/// Default `zeta` in the variance-reduced iteration count.
pub const DEFAULT_ZETA: f64 = 32.0;

pub type Matrix5 = [[f64; 5]; 5];

/// Constants entering the 5x5 certificate matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiData {
    /// `L_xx + mu_x + gamma`
    pub l_xx_bar: f64,
    pub l_yx: f64,
    pub l_yy: f64,
    pub mu_x: f64,
    pub mu_y: f64,
}

impl LmiData {
    /// Data for the subproblem obtained by shifting a weakly convex problem with modulus `mu_x`.
    pub fn shifted(c: &ProblemConstants, mu_x: f64) -> Self {
        LmiData {
            l_xx_bar: c.smoothness.l_xx + mu_x + c.convexity.gamma,
            l_yx: c.smoothness.l_yx,
            l_yy: c.smoothness.l_yy,
            mu_x,
            mu_y: c.convexity.mu_y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmiCertificate {
    pub min_eigenvalue: f64,
    pub feasible: bool,
}

fn check_alpha(alpha: f64, sigma: f64, closed: bool) -> Result<()> {
    let upper_ok = if closed { alpha <= 1.0 / sigma } else { alpha < 1.0 / sigma };
    if !(alpha >= 0.0 && upper_ok) {
        return Err(SolverError::Precondition(format!(
            "alpha = {alpha} must lie in [0, 1/sigma{} with 1/sigma = {}",
            if closed { "]" } else { ")" },
            1.0 / sigma
        )));
    }
    Ok(())
}

fn lmi_entries(d: &LmiData, tau: f64, sigma: f64, theta: f64, rho: f64, alpha: f64, absolute: bool) -> Matrix5 {
    let r = theta / rho;
    let c = if absolute { -(1.0 - r).abs() } else { r - 1.0 };
    // (1/tau)(1 - 1/rho) + mu_x/rho, written to avoid cancellation when rho is close to 1.
    let g11 = ((rho - 1.0) / tau + d.mu_x) / rho;
    let g22 = (rho - 1.0) / (sigma * rho) + d.mu_y;
    [
        [g11, 0.0, 0.0, 0.0, 0.0],
        [0.0, g22, c * d.l_yx, c * d.l_yy, 0.0],
        [0.0, c * d.l_yx, 1.0 / tau - d.l_xx_bar, 0.0, -r * d.l_yx],
        [0.0, c * d.l_yy, 0.0, 1.0 / sigma - alpha, -r * d.l_yy],
        [0.0, 0.0, -r * d.l_yx, -r * d.l_yy, alpha / rho],
    ]
}

/// The certificate matrix `G`; the parameters contract at rate `rho` when `G` is positive semidefinite.
pub fn build_lmi(d: &LmiData, tau: f64, sigma: f64, theta: f64, rho: f64, alpha: f64) -> Result<Matrix5> {
    check_alpha(alpha, sigma, false)?;
    Ok(lmi_entries(d, tau, sigma, theta, rho, alpha, false))
}

/// `G` with every `(theta/rho - 1)` entry replaced by `-|1 - theta/rho|`; semidefinite iff `G` is.
pub fn build_lmi_abs(d: &LmiData, tau: f64, sigma: f64, theta: f64, rho: f64, alpha: f64) -> Result<Matrix5> {
    check_alpha(alpha, sigma, false)?;
    Ok(lmi_entries(d, tau, sigma, theta, rho, alpha, true))
}

pub fn check_lmi(g: &Matrix5) -> LmiCertificate {
    let rows: Vec<Vec<f64>> = g.iter().map(|r| r.to_vec()).collect();
    let min_eigenvalue = symmetric_eigenvalues(&rows)[0];
    LmiCertificate { min_eigenvalue, feasible: min_eigenvalue >= -LMI_TOL }
}

/// Certificate for SAPD parameters on the shifted problem built from `c`.
pub fn certify_sapd(c: &ProblemConstants, p: &SapdParams) -> Result<LmiCertificate> {
    let d = LmiData::shifted(c, p.mu_x);
    Ok(check_lmi(&build_lmi(&d, p.tau, p.sigma, p.theta, p.rho, p.alpha)?))
}

/// Certificate for `p` with the most favourable `alpha` in `[0, 1/sigma)`. The smallest eigenvalue
/// of `G` is concave in `alpha` (the matrix is affine in it), so a golden-section search finds it.
pub fn certify_sapd_best_alpha(c: &ProblemConstants, p: &SapdParams) -> Result<(f64, LmiCertificate)> {
    let d = LmiData::shifted(c, p.mu_x);
    let eig = |alpha: f64| -> Result<f64> { Ok(check_lmi(&build_lmi(&d, p.tau, p.sigma, p.theta, p.rho, alpha)?).min_eigenvalue) };
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut lo, mut hi) = (0.0, (1.0 - 1e-12) / p.sigma);
    let mut a = hi - phi * (hi - lo);
    let mut b = lo + phi * (hi - lo);
    let (mut fa, mut fb) = (eig(a)?, eig(b)?);
    for _ in 0..200 {
        if fa < fb {
            lo = a;
            a = b;
            fa = fb;
            b = lo + phi * (hi - lo);
            fb = eig(b)?;
        } else {
            hi = b;
            b = a;
            fb = fa;
            a = hi - phi * (hi - lo);
            fa = eig(a)?;
        }
    }
    let mut best = (p.alpha.clamp(0.0, (1.0 - 1e-12) / p.sigma), f64::NEG_INFINITY);
    for alpha in [0.0, a, b, best.0] {
        let e = eig(alpha)?;
        if e > best.1 {
            best = (alpha, e);
        }
    }
    Ok((best.0, LmiCertificate { min_eigenvalue: best.1, feasible: best.1 >= -LMI_TOL }))
}

/// `beta = min{1/2, mu_y/(4 gamma), gamma/(4 mu_y), L_yx/(2 L_xy)}`
pub fn beta_of(c: &ProblemConstants) -> f64 {
    let s = &c.smoothness;
    let (g, mu) = (c.convexity.gamma, c.convexity.mu_y);
    0.5f64.min(mu / (4.0 * g)).min(g / (4.0 * mu)).min(s.l_yx / (2.0 * s.l_xy))
}

/// Momentum lower bounds from the deterministic contraction analysis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaBar {
    pub theta1: f64,
    pub theta2: f64,
}

impl ThetaBar {
    pub fn max(&self) -> f64 {
        self.theta1.max(self.theta2)
    }
}

/// `theta_bar_1` and `theta_bar_2` for strong convexity `mu_x` added to a problem with smoothness `s`
/// and weak convexity `gamma`.
pub fn theta_bar(s: &SmoothnessConstants, gamma: f64, mu_x: f64, mu_y: f64, beta: f64) -> ThetaBar {
    let lp = s.l_xx + gamma + mu_x;
    let lyx2 = s.l_yx * s.l_yx;
    let theta1 = 1.0 - (beta * mu_y * lp / (2.0 * lyx2)) * ((1.0 + 4.0 * lyx2 * mu_x / (beta * lp * lp * mu_y)).sqrt() - 1.0);
    let theta2 = if s.l_yy == 0.0 {
        0.0
    } else {
        let ob = (1.0 - beta) * (1.0 - beta);
        let r = mu_y * mu_y / (s.l_yy * s.l_yy);
        1.0 - (ob / 8.0) * r * ((1.0 + 16.0 * s.l_yy * s.l_yy / (ob * mu_y * mu_y)).sqrt() - 1.0)
    };
    ThetaBar { theta1, theta2 }
}

/// Momentum floors that keep the accumulated gradient noise below `eps^2` per stage.
pub fn theta_noise_floor(noise: &NoiseLevels, gamma: f64, mu_y: f64, eps: f64) -> (f64, f64) {
    let e2 = eps * eps;
    let t1 = if noise.delta_x == 0.0 { 0.0 } else { (1.0 - e2 / (384.0 * noise.delta_x * noise.delta_x)).max(0.0) };
    let t2 = if noise.delta_y == 0.0 {
        0.0
    } else {
        1.0 / (1.0 + (mu_y / (10.0 * gamma)) * e2 / (384.0 * noise.delta_y * noise.delta_y))
    };
    (t1, t2)
}

/// `N = ceil(ln 265 / ln(1/theta)) + 1`
pub fn inner_iterations(theta: f64) -> usize {
    if theta <= 0.0 {
        return 2;
    }
    ((265f64).ln() / (1.0 / theta).ln()).ceil() as usize + 1
}

/// Completes `(theta, mu_x)` into SAPD parameters with `tau = (1-theta)/mu_x`,
/// `sigma = (1-theta)/(mu_y theta)`, `rho = theta` and a certified `alpha`.
pub fn params_for_theta(c: &ProblemConstants, theta: f64, mu_x: f64) -> Result<SapdParams> {
    let mu_y = c.convexity.mu_y;
    if !(theta > 0.0 && theta < 1.0) {
        return Err(SolverError::Infeasible(format!("momentum theta = {theta} must lie in (0, 1)")));
    }
    let tau = (1.0 - theta) / mu_x;
    let sigma = (1.0 - theta) / (mu_y * theta);
    let s = &c.smoothness;
    let alpha = if s.l_yy > 0.0 {
        1.0 / sigma - theta.sqrt() * s.l_yy
    } else {
        // Midpoint between the smallest alpha the coupling block tolerates and the 1/sigma ceiling.
        let l_bar = s.l_xx + mu_x + c.convexity.gamma;
        let slack = 1.0 / tau - l_bar;
        let lo = if slack > 0.0 { theta * s.l_yx * s.l_yx / slack } else { f64::INFINITY };
        0.5 * (lo.min(1.0 / sigma) + 1.0 / sigma)
    };
    Ok(SapdParams { tau, sigma, theta, rho: theta, alpha, mu_x, n_inner: inner_iterations(theta) })
}

/// Deterministic SAPD parameters for the problem shifted with strong convexity `mu_x`,
/// using momentum `theta = max(theta_bar_1, theta_bar_2)` at the given `beta`.
pub fn scsc_params(c: &ProblemConstants, mu_x: f64, beta: f64) -> Result<SapdParams> {
    let mu_y = c.convexity.mu_y;
    if !(mu_y > 0.0) {
        return Err(SolverError::Precondition("SAPD schedule needs mu_y > 0; smooth the dual first".into()));
    }
    if !(beta > 0.0 && beta < 1.0) {
        return invalid("beta must lie in (0, 1)");
    }
    let tb = theta_bar(&c.smoothness, c.convexity.gamma, mu_x, mu_y, beta);
    params_for_theta(c, tb.max(), mu_x)
}

/// Parameters for the merely concave case (`mu_y = 0`): `theta = rho = 1` with steps taken from
/// the variance-free coupling bounds, and `sigma` backed off so that `alpha < 1/sigma` strictly.
pub fn merely_concave_params(c: &ProblemConstants, mu_x: f64, n_inner: usize) -> SapdParams {
    let s = &c.smoothness;
    let l_bar = s.l_xx + mu_x + c.convexity.gamma;
    SapdParams {
        tau: 1.0 / (l_bar + s.l_yx),
        sigma: 0.9 / (2.0 * s.l_yy + s.l_yx),
        theta: 1.0,
        rho: 1.0,
        alpha: s.l_yx + s.l_yy,
        mu_x,
        n_inner,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Schedule {
    pub beta: f64,
    pub theta_bar: ThetaBar,
    /// `(theta_noise_1, theta_noise_2)`
    pub theta_noise: (f64, f64),
    pub params: SapdParams,
    pub t_outer: usize,
    pub certificate: LmiCertificate,
}

/// Parameters that make `T` outer stages of SAPD+ reach an `eps`-stationary point in expectation,
/// with `gap0` an upper bound on the initial gap.
pub fn theorem1_schedule(c: &ProblemConstants, eps: f64, gap0: f64) -> Result<Theorem1Schedule> {
    c.validate()?;
    if !(eps > 0.0 && eps.is_finite()) {
        return invalid("eps must be positive");
    }
    if !(gap0 >= 0.0 && gap0.is_finite()) {
        return invalid("gap0 must be finite and nonnegative");
    }
    let gamma = c.convexity.gamma;
    let mu_y = c.convexity.mu_y;
    if !(mu_y > 0.0) {
        return Err(SolverError::Precondition("schedule needs mu_y > 0; smooth the dual first".into()));
    }
    let mu_x = gamma;
    let beta = beta_of(c);
    let tb = theta_bar(&c.smoothness, gamma, mu_x, mu_y, beta);
    let tn = theta_noise_floor(&c.noise, gamma, mu_y, eps);
    let theta = tb.max().max(tn.0).max(tn.1);
    if !(theta < 1.0) {
        return Err(SolverError::Infeasible(format!("momentum theta = {theta} is not below 1")));
    }
    let params = params_for_theta(c, theta, mu_x)?;
    let certificate = certify_sapd(c, &params)?;
    if !certificate.feasible {
        return Err(SolverError::Infeasible(format!(
            "internal consistency: schedule certificate has min eigenvalue {}",
            certificate.min_eigenvalue
        )));
    }
    let t_outer = (96.0 * gap0 * gamma / (eps * eps)).ceil() as usize + 1;
    Ok(Theorem1Schedule { beta, theta_bar: tb, theta_noise: tn, params, t_outer, certificate })
}

/// Truth value of each of the four scalar sufficient inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SufficientCheck {
    pub holds: [bool; 4],
}

impl SufficientCheck {
    pub fn all(&self) -> bool {
        self.holds.iter().all(|&b| b)
    }
}

/// Multipliers `pi2 = sqrt(theta)` and `pi1 = sigma theta L_yx / (1 - sigma (pi2 + theta/pi2) L_yy)`
/// (infinite when the denominator is not positive).
pub fn default_multipliers(d: &LmiData, sigma: f64, theta: f64) -> (f64, f64) {
    let pi2 = theta.sqrt();
    let denom = 1.0 - sigma * (pi2 + theta / pi2) * d.l_yy;
    let pi1 = if denom > 0.0 { sigma * theta * d.l_yx / denom } else { f64::INFINITY };
    (pi1, pi2)
}

/// Scalar sufficient conditions for the certificate:
/// `tau >= (1-theta)/mu_x`, `sigma >= (1-theta)/(mu_y theta)`, `1/tau >= L_xx_bar + pi1 L_yx`,
/// `1/sigma >= theta L_yx/pi1 + (theta/pi2 + pi2) L_yy`. Each side gets a relative slack of `1e-12`.
pub fn check_sufficient_conditions(d: &LmiData, tau: f64, sigma: f64, theta: f64, pi1: f64, pi2: f64) -> SufficientCheck {
    let rel = 1.0 + 1e-12;
    let holds = [
        tau * rel >= (1.0 - theta) / d.mu_x,
        sigma * rel >= (1.0 - theta) / (d.mu_y * theta),
        (1.0 / tau) * rel >= d.l_xx_bar + pi1 * d.l_yx,
        (1.0 / sigma) * rel >= theta * d.l_yx / pi1 + (theta / pi2 + pi2) * d.l_yy,
    ];
    SufficientCheck { holds }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VrSchedule {
    pub params: VrParams,
    pub t_outer: usize,
    pub certificate: LmiCertificate,
}

/// Variance-reduced schedule with `theta = rho = 1` for the shifted subproblems (`mu_x = gamma`).
/// `c` must hold almost-sure (per-component) Lipschitz constants.
pub fn vr_schedule(
    c: &ProblemConstants,
    eps: f64,
    gap0: f64,
    b_x: usize,
    b_y: usize,
    q: usize,
    zeta: f64,
) -> Result<VrSchedule> {
    c.validate()?;
    if !(eps > 0.0 && gap0 >= 0.0 && gap0.is_finite()) {
        return invalid("eps must be positive and gap0 finite");
    }
    if b_x == 0 || b_y == 0 || q == 0 {
        return invalid("batch sizes and period must be positive");
    }
    if !(zeta > 0.0) {
        return invalid("zeta must be positive");
    }
    let s = &c.smoothness;
    let gamma = c.convexity.gamma;
    let mu_y = c.convexity.mu_y;
    if !(mu_y > 0.0) {
        return Err(SolverError::Precondition("schedule needs mu_y > 0".into()));
    }
    let lp = s.l_xx + 2.0 * gamma;
    let cq = 2.0 * (q as f64 - 1.0);
    let (bx, by) = (b_x as f64, b_y as f64);
    let tau = 1.0 / (s.l_yx + lp + cq * (lp * lp / (gamma * bx) + 10.0 * s.l_yx * s.l_yx / (mu_y * by)));
    let sigma = 1.0 / (2.0 * s.l_yy + s.l_yx + cq * (s.l_xy * s.l_xy / (gamma * bx) + 10.0 * s.l_yy * s.l_yy / (mu_y * by)));
    let n_inner = (2.0 * (1.0 + zeta) * (1.0 / (gamma * tau) - 1.0).max(1.0 / (mu_y * sigma))).ceil() as usize;
    let n_inner = n_inner.max(1);
    let e2 = eps * eps;
    let nx = c.noise.delta_x * c.noise.delta_x;
    let ny = c.noise.delta_y * c.noise.delta_y;
    let b = ((144.0 * nx).max(360.0 * ny * gamma / mu_y) / e2).ceil().max(1.0) as usize;
    let params = VrParams { tau, sigma, theta: 1.0, b, b_x, b_y, q, n_inner, mu_x: gamma };
    let certificate = certify_vr(c, &params)?;
    if !certificate.feasible {
        return Err(SolverError::Infeasible(format!(
            "internal consistency: VR certificate has min eigenvalue {}",
            certificate.min_eigenvalue
        )));
    }
    let t_outer = (288.0 * gap0 * gamma / e2).ceil() as usize;
    Ok(VrSchedule { params, t_outer, certificate })
}

/// Period and small-batch size balancing large-batch refreshes against recursive updates:
/// `q = sqrt(b / kappa_y)`, `b' = sqrt(b kappa_y)`, both at least 1.
pub fn vr_tuning(b: usize, kappa_y: f64) -> (usize, usize) {
    let b = b as f64;
    let q = (b / kappa_y).sqrt().round().max(1.0) as usize;
    let bs = (b * kappa_y).sqrt().round().max(1.0) as usize;
    (q, bs)
}

/// `c(rho) = 2 (rho^{1-q} - 1)/(1 - rho)`, with the limit `2(q-1)` at `rho = 1`.
pub fn vr_accumulation_factor(rho: f64, q: usize) -> f64 {
    if rho == 1.0 {
        2.0 * (q as f64 - 1.0)
    } else {
        2.0 * (rho.powf(1.0 - q as f64) - 1.0) / (1.0 - rho)
    }
}

/// Certificate for the variance-reduced iteration: `G - diag(pi_x, pi_y, L'_x, L'_y, 0)` with
/// `pi_x = mu_x`, `pi_y = mu_y`.
pub fn build_vr_lmi(c: &ProblemConstants, p: &VrParams, rho: f64, alpha: f64) -> Result<Matrix5> {
    check_alpha(alpha, p.sigma, true)?;
    let s = &c.smoothness;
    let d = LmiData::shifted(c, p.mu_x);
    let mut g = lmi_entries(&d, p.tau, p.sigma, p.theta, rho, alpha, false);
    let (pi_x, pi_y) = (p.mu_x, c.convexity.mu_y);
    let cf = vr_accumulation_factor(rho, p.q);
    let th = p.theta;
    let mult = 2.0 * (1.0 + 2.0 * th + 2.0 * th * th) / rho;
    let (bx, by) = (p.b_x as f64, p.b_y as f64);
    let lx = cf * (d.l_xx_bar * d.l_xx_bar / (pi_x * bx) + mult * s.l_yx * s.l_yx / (pi_y * by));
    let ly = cf * (rho * s.l_xy * s.l_xy / (pi_x * bx) + mult * s.l_yy * s.l_yy / (pi_y * by));
    g[0][0] -= pi_x;
    g[1][1] -= pi_y;
    g[2][2] -= lx;
    g[3][3] -= ly;
    Ok(g)
}

pub fn certify_vr(c: &ProblemConstants, p: &VrParams) -> Result<LmiCertificate> {
    let alpha = c.smoothness.l_yx + c.smoothness.l_yy;
    Ok(check_lmi(&build_vr_lmi(c, p, 1.0, alpha)?))
}
