//! The SAPD+ outer proximal-point loop.

use log::{debug, info};
use rand::RngCore;

use crate::error::{check_len, invalid, Result, SolverError};
use crate::eval::{dual_start, maximize_dual, moreau_stationarity, DEFAULT_PROX_TOL};
use crate::linalg::{dist, norm};
use crate::params::{inner_iterations, params_for_theta, scsc_params, theorem1_schedule, theta_noise_floor, Theorem1Schedule};
use crate::problem::{shifted_subproblem, Coupling, DualSmoothed, FiniteSum, ProblemSpec, Shifted};
use crate::sapd::{sapd_run, SapdParams, SapdRunResult};
use crate::vr::{vr_sapd_run, VrParams};

#[derive(Debug, Clone, PartialEq)]
pub enum InnerSchedule {
    Sapd(SapdParams),
    Vr(VrParams),
}

impl InnerSchedule {
    pub fn mu_x(&self) -> f64 {
        match self {
            InnerSchedule::Sapd(p) => p.mu_x,
            InnerSchedule::Vr(p) => p.mu_x,
        }
    }

    pub fn is_vr(&self) -> bool {
        matches!(self, InnerSchedule::Vr(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Run exactly `t_outer` stages.
    FixedT,
    /// Stop once the Moreau stationarity estimate drops to `epsilon`, checked every
    /// `check_every` stages (and never later than `t_outer`).
    StationarityTarget { epsilon: f64, check_every: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterConfig {
    pub t_outer: usize,
    pub schedule: InnerSchedule,
    pub stop_rule: StopRule,
    /// Record the stationarity estimate every this many stages; 0 disables it.
    pub monitor_every: usize,
    /// Moreau parameter for the estimates; `None` means `1/(2 gamma)`.
    pub lambda: Option<f64>,
    pub stationarity_tol: f64,
}

impl OuterConfig {
    pub fn new(t_outer: usize, schedule: InnerSchedule) -> Self {
        OuterConfig {
            t_outer,
            schedule,
            stop_rule: StopRule::FixedT,
            monitor_every: 0,
            lambda: None,
            stationarity_tol: DEFAULT_PROX_TOL,
        }
    }

    pub fn with_stop_rule(mut self, rule: StopRule) -> Self {
        self.stop_rule = rule;
        self
    }

    pub fn with_monitor(mut self, every: usize) -> Self {
        self.monitor_every = every;
        self
    }

    fn check_every(&self) -> usize {
        match self.stop_rule {
            StopRule::StationarityTarget { check_every, .. } => check_every.max(1),
            StopRule::FixedT => self.monitor_every,
        }
    }
}

/// One row of the run trace. Stage 0 is the starting point.
#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    /// Cumulative sample gradients evaluated so far.
    pub oracle_calls: u64,
    pub objective: Option<f64>,
    pub stationarity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OuterResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub stages_run: usize,
    pub oracle_calls: u64,
    pub trace: Vec<StageRecord>,
    /// Set when the stationarity target was met.
    pub converged: bool,
}

/// Objective callback evaluated at each stage output.
pub type Observer<'a> = &'a mut dyn FnMut(&[f64], &[f64]) -> f64;

type InnerSolver<'a, C> =
    dyn FnMut(&ProblemSpec<Shifted<&C>>, &[f64], &[f64], &mut dyn RngCore) -> Result<SapdRunResult> + 'a;

fn run_outer<C: Coupling>(
    p: &ProblemSpec<C>,
    cfg: &OuterConfig,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn RngCore,
    mut observer: Option<Observer<'_>>,
    inner: &mut InnerSolver<'_, C>,
) -> Result<OuterResult> {
    let (n, m) = p.dims();
    check_len(x0.len(), n)?;
    check_len(y0.len(), m)?;
    let gamma = p.constants.convexity.gamma;
    let lambda = cfg.lambda.unwrap_or(0.5 / gamma);
    let every = cfg.check_every();
    if every > 0 && !(lambda > 0.0 && lambda * gamma < 1.0) {
        return invalid(format!("lambda = {lambda} must lie in (0, 1/gamma)"));
    }
    let mu_x = cfg.schedule.mu_x();

    let measure = |x: &[f64]| -> Result<f64> { Ok(moreau_stationarity(p, x, lambda, cfg.stationarity_tol)?.norm) };
    let target = match cfg.stop_rule {
        StopRule::StationarityTarget { epsilon, .. } => Some(epsilon),
        StopRule::FixedT => None,
    };

    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut calls = 0u64;
    let mut trace = Vec::with_capacity(cfg.t_outer + 1);
    let mut converged = false;

    let initial = if every > 0 { Some(measure(&x)?) } else { None };
    trace.push(StageRecord {
        stage: 0,
        oracle_calls: 0,
        objective: observer.as_mut().map(|f| f(&x, &y)),
        stationarity: initial,
    });
    if let (Some(eps), Some(s)) = (target, initial) {
        converged = s <= eps;
    }

    let mut stages_run = 0;
    while stages_run < cfg.t_outer && !converged {
        let stage = stages_run + 1;
        let sub = shifted_subproblem(p, &x, mu_x)?;
        let res = inner(&sub, &x, &y, rng).map_err(|e| SolverError::Stage { stage, source: Box::new(e) })?;
        calls += res.oracle_calls;
        x = res.x_avg;
        y = res.y_avg;
        stages_run = stage;

        let stationarity = if every > 0 && (stage % every == 0 || stage == cfg.t_outer) {
            Some(measure(&x)?)
        } else {
            None
        };
        if let (Some(eps), Some(s)) = (target, stationarity) {
            converged = s <= eps;
        }
        debug!("stage {stage}: calls {calls}, stationarity {stationarity:?}");
        trace.push(StageRecord {
            stage,
            oracle_calls: calls,
            objective: observer.as_mut().map(|f| f(&x, &y)),
            stationarity,
        });
    }
    info!("outer loop finished after {stages_run} stages and {calls} oracle calls");
    Ok(OuterResult { x, y, stages_run, oracle_calls: calls, trace, converged })
}

/// SAPD+ with plain SAPD inner solves.
pub fn sapd_plus_run<C: Coupling>(
    p: &ProblemSpec<C>,
    cfg: &OuterConfig,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn RngCore,
    observer: Option<Observer<'_>>,
) -> Result<OuterResult> {
    let params = match &cfg.schedule {
        InnerSchedule::Sapd(sp) => *sp,
        InnerSchedule::Vr(_) => return Err(SolverError::Config("variance-reduced schedule needs sapd_plus_vr_run".into())),
    };
    params.validate()?;
    run_outer(p, cfg, x0, y0, rng, observer, &mut |sub, x, y, rng| sapd_run(sub, &params, x, y, rng))
}

/// SAPD+ with variance-reduced inner solves.
pub fn sapd_plus_vr_run<C: FiniteSum>(
    p: &ProblemSpec<C>,
    cfg: &OuterConfig,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn RngCore,
    observer: Option<Observer<'_>>,
) -> Result<OuterResult> {
    let params = match &cfg.schedule {
        InnerSchedule::Vr(vp) => *vp,
        InnerSchedule::Sapd(_) => return Err(SolverError::Config("plain schedule needs sapd_plus_run".into())),
    };
    params.validate()?;
    run_outer(p, cfg, x0, y0, rng, observer, &mut |sub, x, y, rng| vr_sapd_run(sub, &params, x, y, rng))
}

/// Dual smoothing weight `min{eps^2/(24 gamma d_y^2), (L_yy/L_xy) eps/(2 sqrt6 d_y)}`.
/// The second term is dropped when `L_yy = 0`.
pub fn smoothing_mu(c: &crate::problem::ProblemConstants, eps: f64, d_y: f64) -> f64 {
    let s = &c.smoothness;
    let first = eps * eps / (24.0 * c.convexity.gamma * d_y * d_y);
    if s.l_yy > 0.0 {
        first.min(s.l_yy / s.l_xy * eps / (2.0 * 6f64.sqrt() * d_y))
    } else {
        first
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothTemplate {
    /// Initial gap bound passed to the schedule.
    pub gap0: f64,
    /// Cap on the number of stages; the schedule's `T` applies otherwise.
    pub max_stages: Option<usize>,
    pub check_every: usize,
    /// Smoothing anchor; defaults to the dual starting point.
    pub anchor: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SmoothResult {
    pub mu_hat: f64,
    pub inner_epsilon: f64,
    pub schedule: Theorem1Schedule,
    pub outer: OuterResult,
}

/// Adds `-(mu/2)||y - anchor||^2` to the coupling and updates the constants.
pub fn smoothed_problem<'a, C: Coupling>(
    p: &'a ProblemSpec<C>,
    anchor: &[f64],
    mu: f64,
) -> Result<ProblemSpec<DualSmoothed<&'a C>>> {
    let (_, m) = p.dims();
    check_len(anchor.len(), m)?;
    if !(mu > 0.0) {
        return invalid("smoothing weight must be positive");
    }
    let mut constants = p.constants;
    constants.convexity.mu_y += mu;
    constants.smoothness.l_yy += mu;
    Ok(ProblemSpec {
        coupling: DualSmoothed { base: &p.coupling, anchor: anchor.to_vec(), mu },
        prox_f: p.prox_f.clone(),
        prox_g: p.prox_g.clone(),
        constants,
        dual_diameter: p.dual_diameter,
    })
}

/// Solves a merely concave problem through its dual-smoothed surrogate, stopping at the
/// tightened target `eps / (2 sqrt 6)` on the surrogate. The trace's stationarity column refers
/// to the surrogate.
pub fn smooth_then_solve<C: Coupling>(
    p: &ProblemSpec<C>,
    eps: f64,
    template: &SmoothTemplate,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn RngCore,
) -> Result<SmoothResult> {
    let d_y = p
        .dual_diameter
        .ok_or_else(|| SolverError::Config("smoothing needs the dual domain diameter".into()))?;
    if !(eps > 0.0) {
        return invalid("eps must be positive");
    }
    let mu_hat = smoothing_mu(&p.constants, eps, d_y);
    let anchor = template.anchor.clone().unwrap_or_else(|| y0.to_vec());
    let sp = smoothed_problem(p, &anchor, mu_hat)?;
    let inner_epsilon = eps / (2.0 * 6f64.sqrt());
    let schedule = theorem1_schedule(&sp.constants, inner_epsilon, template.gap0)?;
    let t_outer = template.max_stages.map_or(schedule.t_outer, |cap| cap.min(schedule.t_outer));
    info!("smoothing with mu = {mu_hat:.3e}; theta = {:.8}, N = {}", schedule.params.theta, schedule.params.n_inner);
    let cfg = OuterConfig::new(t_outer, InnerSchedule::Sapd(schedule.params)).with_stop_rule(StopRule::StationarityTarget {
        epsilon: inner_epsilon,
        check_every: template.check_every.max(1),
    });
    let outer = sapd_plus_run(&sp, &cfg, x0, y0, rng, None)?;
    Ok(SmoothResult { mu_hat, inner_epsilon, schedule, outer })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub x: Vec<f64>,
    /// `(1/lambda) ||x - prox_{lambda f}(x - lambda grad phi(x))||`
    pub mapping_norm: f64,
    /// `false` when the inner dual maximization did not reach its tolerance.
    pub reliable: bool,
}

/// Turns an approximately Moreau-stationary point into one with a small gradient mapping by one
/// stochastic SAPD solve of the proximal subproblem centered at `x_eps`.
/// The budget defaults to ten times the inner iteration count.
pub fn refine_to_gradient_mapping<C: Coupling>(
    p: &ProblemSpec<C>,
    x_eps: &[f64],
    lambda: f64,
    eps: f64,
    rng: &mut dyn RngCore,
    budget: Option<usize>,
) -> Result<Refinement> {
    let c = p.constants;
    let gamma = c.convexity.gamma;
    if !(lambda > 0.0 && lambda * gamma < 1.0) {
        return invalid(format!("lambda = {lambda} must lie in (0, 1/gamma)"));
    }
    let mu_x = 1.0 / lambda - gamma;
    let mut params = scsc_params(&c, mu_x, 0.5)?;
    let (t1, t2) = theta_noise_floor(&c.noise, gamma, c.convexity.mu_y, eps);
    let theta = params.theta.max(t1).max(t2);
    if theta > params.theta {
        params = params_for_theta(&c, theta, mu_x)?;
    }
    params.n_inner = budget.unwrap_or(10 * inner_iterations(theta)).max(1);
    let sub = shifted_subproblem(p, x_eps, mu_x)?;
    let y0 = dual_start(p)?;
    let run = sapd_run(&sub, &params, x_eps, &y0, rng)?;
    let x = run.x_avg;

    let dual = maximize_dual(&p.exact(), &x, &run.y_avg, 1e-10, 200_000)?;
    let (n, _) = p.dims();
    let mut grad = vec![0.0; n];
    p.coupling.grad_x(&x, &dual.y, &mut grad);
    let step: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - lambda * gi).collect();
    let proj = p.prox_f.prox(&step, lambda)?;
    let mapping_norm = dist(&x, &proj) / lambda;
    debug!("refined point: mapping norm {mapping_norm:.3e}, |x| = {:.3e}", norm(&x));
    Ok(Refinement { x, mapping_norm, reliable: dual.converged })
}

