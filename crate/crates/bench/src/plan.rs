//! Turns a configuration into concrete solver parameters and a certificate report.

use sapd_core::params::{
    beta_of, certify_sapd_best_alpha, certify_vr, inner_iterations, theorem1_schedule, theta_bar,
    theta_noise_floor, vr_schedule, LmiCertificate, ThetaBar, DEFAULT_ZETA,
};
use sapd_core::problem::ProblemConstants;
use sapd_core::{Result, SapdParams, SolverError, VrParams};

use crate::config::{Algo, RunConfig, ScheduleSource};
use crate::problems::Prepared;
use crate::sgda::SgdaParams;

/// Trace rows of the baseline when neither `t_outer` nor a budget is given.
pub const DEFAULT_SGDA_ROWS: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    Sapd(SapdParams),
    Vr(VrParams),
    Sgda(SgdaParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plan {
    pub method: Method,
    /// Outer stages (trace rows for the baseline).
    pub t_outer: usize,
    pub per_stage_calls: u64,
    pub theta_bar: Option<ThetaBar>,
    pub theta_noise: Option<(f64, f64)>,
    pub certificate: Option<LmiCertificate>,
    pub feasible: bool,
    /// Non-fatal findings, echoed to the log and the sidecar.
    pub warnings: Vec<String>,
}

fn missing(key: &str, algo: Algo) -> SolverError {
    SolverError::Config(format!("manual schedule for {algo} needs `{key}`"))
}

fn theory_t(factor: f64, gap0: f64, gamma: f64, eps: f64) -> usize {
    (factor * gap0 * gamma / (eps * eps)).ceil() as usize
}

fn budget(cfg: &RunConfig, n_samples: usize) -> Option<u64> {
    let epochs = cfg.max_epochs.map(|e| (e * n_samples as f64).floor() as u64);
    match (cfg.max_calls, epochs) {
        (Some(a), Some(b)) => Some(a.min(b)),
        (a, b) => a.or(b),
    }
}

fn lower_bounds(c: &ProblemConstants, eps: f64) -> (ThetaBar, (f64, f64)) {
    let g = c.convexity.gamma;
    let mu_y = c.convexity.mu_y;
    (theta_bar(&c.smoothness, g, g, mu_y, beta_of(c)), theta_noise_floor(&c.noise, g, mu_y, eps))
}

fn sapd_plan(cfg: &RunConfig, prep: &Prepared) -> Result<Plan> {
    let c = &prep.mean_constants;
    let gamma = c.convexity.gamma;
    let (tb, tn) = lower_bounds(c, cfg.eps);
    let mut warnings = Vec::new();
    let (mut params, t_theory, certificate, feasible) = match cfg.schedule {
        ScheduleSource::Theory => {
            let s = theorem1_schedule(c, cfg.eps, prep.gap0)?;
            (s.params, s.t_outer, s.certificate, s.certificate.feasible)
        }
        ScheduleSource::Manual => {
            let tau = cfg.tau.ok_or_else(|| missing("tau", cfg.algo))?;
            let sigma = cfg.sigma.ok_or_else(|| missing("sigma", cfg.algo))?;
            let theta = cfg.theta.ok_or_else(|| missing("theta", cfg.algo))?;
            let mut p = SapdParams { tau, sigma, theta, rho: theta, alpha: 0.0, mu_x: gamma, n_inner: inner_iterations(theta) };
            p.validate()?;
            let (alpha, cert) = certify_sapd_best_alpha(c, &p)?;
            p.alpha = alpha;
            let lower = tb.max().max(tn.0).max(tn.1);
            if theta < lower {
                warnings.push(format!("theta = {theta} is below the lower bound {lower}"));
            }
            if !cert.feasible {
                warnings.push(format!("no certificate: LMI min eigenvalue {:e}", cert.min_eigenvalue));
            }
            let ok = cert.feasible && theta >= lower;
            (p, theory_t(96.0, prep.gap0, gamma, cfg.eps) + 1, cert, ok)
        }
    };
    if let Some(n) = cfg.n_inner {
        params.n_inner = n;
    }
    let per_stage = (2 * params.n_inner as u64 + 1) * cfg.batch as u64;
    Ok(Plan {
        method: Method::Sapd(params),
        t_outer: cfg.t_outer.unwrap_or(t_theory),
        per_stage_calls: per_stage,
        theta_bar: Some(tb),
        theta_noise: Some(tn),
        certificate: Some(certificate),
        feasible,
        warnings,
    })
}

fn vr_plan(cfg: &RunConfig, prep: &Prepared) -> Result<Plan> {
    let c = prep
        .component_constants
        .as_ref()
        .ok_or_else(|| SolverError::Config("sapd-plus-vr needs a finite-sum problem".into()))?;
    let gamma = c.convexity.gamma;
    let (tb, tn) = lower_bounds(c, cfg.eps);
    let mut warnings = Vec::new();
    let (mut params, t_theory) = match cfg.schedule {
        ScheduleSource::Theory => {
            let s = vr_schedule(c, cfg.eps, prep.gap0, cfg.b_x, cfg.b_y, cfg.q, DEFAULT_ZETA)?;
            (s.params, s.t_outer)
        }
        ScheduleSource::Manual => {
            let tau = cfg.tau.ok_or_else(|| missing("tau", cfg.algo))?;
            let sigma = cfg.sigma.ok_or_else(|| missing("sigma", cfg.algo))?;
            let theta = cfg.theta.unwrap_or(1.0);
            let b = cfg.b.ok_or_else(|| missing("b", cfg.algo))?;
            let n_inner = match cfg.n_inner {
                Some(n) => n,
                None if theta < 1.0 => inner_iterations(theta),
                None => return Err(missing("n_inner", cfg.algo)),
            };
            let p = VrParams { tau, sigma, theta, b, b_x: cfg.b_x, b_y: cfg.b_y, q: cfg.q, n_inner, mu_x: gamma };
            (p, theory_t(288.0, prep.gap0, gamma, cfg.eps))
        }
    };
    if let Some(b) = cfg.b {
        params.b = b;
    }
    if let Some(n) = cfg.n_inner {
        params.n_inner = n;
    }
    params.validate()?;
    let certificate = certify_vr(c, &params)?;
    if !certificate.feasible {
        warnings.push(format!("no certificate: LMI min eigenvalue {:e}", certificate.min_eigenvalue));
    }
    Ok(Plan {
        method: Method::Vr(params),
        t_outer: cfg.t_outer.unwrap_or(t_theory),
        per_stage_calls: params.oracle_calls(),
        theta_bar: Some(tb),
        theta_noise: Some(tn),
        certificate: Some(certificate),
        feasible: certificate.feasible,
        warnings,
    })
}

fn sgda_plan(cfg: &RunConfig, prep: &Prepared) -> Result<Plan> {
    let (tau, sigma) = match (cfg.schedule, cfg.tau, cfg.sigma) {
        (_, Some(t), Some(s)) => (t, s),
        (ScheduleSource::Theory, t, s) => {
            // Same step sizes as the SAPD+ theory schedule.
            let p = theorem1_schedule(&prep.mean_constants, cfg.eps, prep.gap0)?.params;
            (t.unwrap_or(p.tau), s.unwrap_or(p.sigma))
        }
        (ScheduleSource::Manual, None, _) => return Err(missing("tau", cfg.algo)),
        (ScheduleSource::Manual, _, None) => return Err(missing("sigma", cfg.algo)),
    };
    if cfg.record_every == 0 {
        return Err(SolverError::Config("record_every must be positive".into()));
    }
    let params = SgdaParams { tau, sigma, iterations: 0, record_every: cfg.record_every };
    let spc = if matches!(prep.instance, crate::problems::Instance::Quadratic(_)) { 1 } else { cfg.batch as u64 };
    Ok(Plan {
        method: Method::Sgda(params),
        t_outer: cfg.t_outer.unwrap_or(DEFAULT_SGDA_ROWS),
        per_stage_calls: params.oracle_calls_per_iteration(spc) * cfg.record_every as u64,
        theta_bar: None,
        theta_noise: None,
        certificate: None,
        feasible: true,
        warnings: Vec::new(),
    })
}

/// Resolves the schedule and applies the oracle-call budget to the number of stages.
pub fn make_plan(cfg: &RunConfig, prep: &Prepared) -> Result<Plan> {
    if !(cfg.eps > 0.0) {
        return Err(SolverError::Config("eps must be positive".into()));
    }
    let mut plan = match cfg.algo {
        Algo::SapdPlus => sapd_plan(cfg, prep)?,
        Algo::SapdPlusVr => vr_plan(cfg, prep)?,
        Algo::Sgda => sgda_plan(cfg, prep)?,
    };
    if let Some(limit) = budget(cfg, prep.instance.n_samples()) {
        let cap = (limit / plan.per_stage_calls.max(1)) as usize;
        if cap < plan.t_outer {
            plan.t_outer = cap;
        }
        if cap == 0 {
            plan.warnings.push(format!("budget of {limit} calls is below one stage ({} calls)", plan.per_stage_calls));
        }
    }
    if let Method::Sgda(p) = &mut plan.method {
        p.iterations = plan.t_outer * p.record_every;
    }
    Ok(plan)
}

/// Human-readable schedule report, one `key: value` per line.
pub fn describe(plan: &Plan) -> Vec<String> {
    let mut out = Vec::new();
    match &plan.method {
        Method::Sapd(p) => {
            out.push("method: sapd-plus".into());
            out.push(format!("tau: {}", p.tau));
            out.push(format!("sigma: {}", p.sigma));
            out.push(format!("theta: {}", p.theta));
            out.push(format!("rho: {}", p.rho));
            out.push(format!("alpha: {}", p.alpha));
            out.push(format!("mu_x: {}", p.mu_x));
            out.push(format!("n_inner: {}", p.n_inner));
        }
        Method::Vr(p) => {
            out.push("method: sapd-plus-vr".into());
            out.push(format!("tau: {}", p.tau));
            out.push(format!("sigma: {}", p.sigma));
            out.push(format!("theta: {}", p.theta));
            out.push(format!("b: {}", p.b));
            out.push(format!("b_x: {}", p.b_x));
            out.push(format!("b_y: {}", p.b_y));
            out.push(format!("q: {}", p.q));
            out.push(format!("mu_x: {}", p.mu_x));
            out.push(format!("n_inner: {}", p.n_inner));
        }
        Method::Sgda(p) => {
            out.push("method: sgda-baseline".into());
            out.push(format!("tau: {}", p.tau));
            out.push(format!("sigma: {}", p.sigma));
            out.push(format!("iterations: {}", p.iterations));
            out.push(format!("record_every: {}", p.record_every));
        }
    }
    out.push(format!("t_outer: {}", plan.t_outer));
    out.push(format!("calls_per_stage: {}", plan.per_stage_calls));
    if let Some(tb) = plan.theta_bar {
        out.push(format!("theta_bar_1: {}", tb.theta1));
        out.push(format!("theta_bar_2: {}", tb.theta2));
    }
    if let Some((a, b)) = plan.theta_noise {
        out.push(format!("theta_noise_1: {a}"));
        out.push(format!("theta_noise_2: {b}"));
    }
    match plan.certificate {
        Some(c) => out.push(format!("lmi_min_eigenvalue: {:e}", c.min_eigenvalue)),
        None => out.push("lmi_min_eigenvalue: n/a".into()),
    }
    out.push(format!("feasible: {}", plan.feasible));
    for w in &plan.warnings {
        out.push(format!("warning: {w}"));
    }
    out
}
