//! Executes one repetition of a planned run.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sapd_core::eval::{moreau_stationarity, DEFAULT_PROX_TOL};
use sapd_core::outer::{sapd_plus_run, sapd_plus_vr_run, InnerSchedule, OuterConfig, OuterResult};
use sapd_core::problem::ProblemSpec;
use sapd_core::{Coupling, FiniteSum, Result, SolverError};

use crate::config::RunConfig;
use crate::plan::{Method, Plan};
use crate::problems::{minibatch_spec, Instance, Prepared};
use crate::sgda::sgda_run;
use crate::trace::Row;

#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub rep: usize,
    pub rows: Vec<Row>,
    /// Final primal iterate, when the run finished.
    pub x: Option<Vec<f64>>,
    pub error: Option<String>,
}

/// Runs repetition `rep` with the stream seeded by `seed + rep`.
pub fn run_rep(cfg: &RunConfig, prep: &Prepared, plan: &Plan, rep: usize) -> RepOutcome {
    let seed = cfg.seed.wrapping_add(rep as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let mut seen: Vec<(f64, f64)> = Vec::new();
    let mut observe = |x: &[f64]| -> f64 {
        let obj = prep.instance.objective(x);
        seen.push((obj, start.elapsed().as_secs_f64() * 1e3));
        obj
    };
    let res = dispatch(cfg, prep, plan, &mut rng, &mut observe);
    let walls: Vec<f64> = seen.iter().map(|s| s.1).collect();
    match res {
        Ok((r, extra)) => {
            let rows = r
                .trace
                .iter()
                .enumerate()
                .map(|(i, t)| Row {
                    rep,
                    stage: t.stage,
                    oracle_calls: t.oracle_calls,
                    wall_ms: walls.get(i).copied().unwrap_or(0.0),
                    objective: t.objective,
                    stationarity: t.stationarity.or_else(|| extra.get(i).copied().flatten()),
                })
                .collect();
            RepOutcome { rep, rows, x: Some(r.x), error: None }
        }
        Err(e) => {
            // Rows up to the failure; every completed stage costs the same number of calls.
            let rows = seen
                .iter()
                .enumerate()
                .map(|(i, &(obj, wall))| Row {
                    rep,
                    stage: i,
                    oracle_calls: i as u64 * plan.per_stage_calls,
                    wall_ms: wall,
                    objective: Some(obj),
                    stationarity: None,
                })
                .collect();
            RepOutcome { rep, rows, x: None, error: Some(e.to_string()) }
        }
    }
}

type Observe<'a> = &'a mut dyn FnMut(&[f64]) -> f64;

fn outer_config(cfg: &RunConfig, plan: &Plan, schedule: InnerSchedule) -> OuterConfig {
    let mut oc = OuterConfig::new(plan.t_outer, schedule).with_monitor(cfg.monitor_every);
    oc.lambda = cfg.lambda;
    oc
}

fn run_sapd<C: Coupling>(cfg: &RunConfig, plan: &Plan, p: &ProblemSpec<C>, prep: &Prepared, rng: &mut ChaCha8Rng, obs: Observe) -> Result<(OuterResult, Vec<Option<f64>>)> {
    let Method::Sapd(sp) = plan.method else { unreachable!() };
    let mut f = |x: &[f64], _: &[f64]| obs(x);
    let r = sapd_plus_run(p, &outer_config(cfg, plan, InnerSchedule::Sapd(sp)), &prep.x0, &prep.y0, rng, Some(&mut f))?;
    Ok((r, Vec::new()))
}

fn run_vr<C: FiniteSum>(cfg: &RunConfig, plan: &Plan, p: &ProblemSpec<C>, prep: &Prepared, rng: &mut ChaCha8Rng, obs: Observe) -> Result<(OuterResult, Vec<Option<f64>>)> {
    let Method::Vr(vp) = plan.method else { unreachable!() };
    let mut f = |x: &[f64], _: &[f64]| obs(x);
    let r = sapd_plus_vr_run(p, &outer_config(cfg, plan, InnerSchedule::Vr(vp)), &prep.x0, &prep.y0, rng, Some(&mut f))?;
    Ok((r, Vec::new()))
}

/// The baseline has no outer loop, so stationarity is measured here on the monitored rows.
fn run_sgda<C: Coupling>(cfg: &RunConfig, plan: &Plan, p: &ProblemSpec<C>, prep: &Prepared, rng: &mut ChaCha8Rng, obs: Observe) -> Result<(OuterResult, Vec<Option<f64>>)> {
    let Method::Sgda(params) = plan.method else { unreachable!() };
    let lambda = cfg.lambda.unwrap_or(0.5 / p.constants.convexity.gamma);
    let mut stat = Vec::new();
    let mut err = None;
    let last = plan.t_outer;
    let mut f = |x: &[f64], _: &[f64]| {
        let row = stat.len();
        let due = cfg.monitor_every > 0 && (row % cfg.monitor_every == 0 || row == last);
        let s = if due {
            match moreau_stationarity(p, x, lambda, DEFAULT_PROX_TOL) {
                Ok(e) => Some(e.norm),
                Err(e) => {
                    err.get_or_insert(e);
                    None
                }
            }
        } else {
            None
        };
        stat.push(s);
        obs(x)
    };
    let r = sgda_run(p, &params, &prep.x0, &prep.y0, rng, Some(&mut f))?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok((r, stat))
}

fn dispatch(cfg: &RunConfig, prep: &Prepared, plan: &Plan, rng: &mut ChaCha8Rng, obs: Observe) -> Result<(OuterResult, Vec<Option<f64>>)> {
    let mean = prep.mean_constants;
    match (&prep.instance, &plan.method) {
        (Instance::Constants(_), _) => Err(SolverError::Config("problem = constants supports check-params only".into())),
        (Instance::Quadratic(q), m) => {
            let p = ProblemSpec::new(q, sapd_core::prox::ProxKind::Zero, sapd_core::prox::ProxKind::Zero, mean)?;
            match m {
                Method::Sapd(_) => run_sapd(cfg, plan, &p, prep, rng, obs),
                Method::Sgda(_) => run_sgda(cfg, plan, &p, prep, rng, obs),
                Method::Vr(_) => Err(SolverError::Config("sapd-plus-vr needs a finite-sum problem".into())),
            }
        }
        (Instance::FiniteSum(fs), Method::Vr(_)) => {
            let p = fs.spec()?;
            let p = ProblemSpec { constants: prep.component_constants.unwrap_or(p.constants), ..p };
            run_vr(cfg, plan, &p, prep, rng, obs)
        }
        (Instance::FiniteSum(fs), m) => {
            let p = minibatch_spec(fs, cfg.batch, sapd_core::prox::ProxKind::Zero, mean, None)?;
            match m {
                Method::Sgda(_) => run_sgda(cfg, plan, &p, prep, rng, obs),
                _ => run_sapd(cfg, plan, &p, prep, rng, obs),
            }
        }
        (Instance::Dro(d), Method::Vr(_)) => {
            let p = d.component_spec()?;
            let p = ProblemSpec { constants: prep.component_constants.unwrap_or(p.constants), ..p };
            run_vr(cfg, plan, &p, prep, rng, obs)
        }
        (Instance::Dro(d), m) => {
            let p = minibatch_spec(d, cfg.batch, d.prox_g(), mean, d.spec()?.dual_diameter)?;
            match m {
                Method::Sgda(_) => run_sgda(cfg, plan, &p, prep, rng, obs),
                _ => run_sapd(cfg, plan, &p, prep, rng, obs),
            }
        }
    }
}
