//! The `check-params`, `solve` and `bench` subcommands.

use std::path::{Path, PathBuf};

use log::{info, warn};
use rayon::prelude::*;
use sapd_core::SolverError;

use crate::config::{ConfigError, RunConfig};
use crate::plan::{describe, make_plan, Plan};
use crate::problems::{prepare, Prepared};
use crate::runner::{run_rep, RepOutcome};
use crate::trace::{meta_path, to_csv, Row};

/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "SAPD_THREADS";

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("thread pool: {0}")]
    Pool(String),
}

fn write(path: &Path, text: &str) -> Result<(), BenchError> {
    std::fs::write(path, text).map_err(|source| BenchError::Io { path: path.into(), source })
}

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub lines: Vec<String>,
    pub feasible: bool,
}

pub fn check_params(cfg: &RunConfig) -> Result<CheckReport, BenchError> {
    let prep = prepare(cfg)?;
    let plan = make_plan(cfg, &prep)?;
    let mut lines = vec![
        format!("algo: {}", cfg.algo),
        format!("schedule: {}", cfg.schedule),
        format!("eps: {}", cfg.eps),
        format!("gap0: {}", prep.gap0),
        format!("delta_x: {}", prep.mean_constants.noise.delta_x),
        format!("delta_y: {}", prep.mean_constants.noise.delta_y),
    ];
    lines.extend(describe(&plan));
    Ok(CheckReport { lines, feasible: plan.feasible })
}

#[derive(Debug, Clone)]
pub struct SolveSummary {
    pub out: PathBuf,
    pub plan: Plan,
    pub outcomes: Vec<RepOutcome>,
}

impl SolveSummary {
    pub fn rows(&self) -> Vec<Row> {
        self.outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect()
    }

    pub fn failures(&self) -> usize {
        self.outcomes.iter().filter(|o| o.error.is_some()).count()
    }
}

/// Worker count: the `SAPD_THREADS` cap when set, never more than the repetitions.
pub fn worker_count(reps: usize) -> usize {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    cap.min(reps).max(1)
}

/// Runs every repetition on a prepared instance; outcomes come back ordered by rep.
pub fn run_reps(cfg: &RunConfig, prep: &Prepared, plan: &Plan) -> Result<Vec<RepOutcome>, BenchError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(cfg.reps))
        .build()
        .map_err(|e| BenchError::Pool(e.to_string()))?;
    let mut outcomes: Vec<RepOutcome> = pool.install(|| (0..cfg.reps).into_par_iter().map(|rep| run_rep(cfg, prep, plan, rep)).collect());
    outcomes.sort_by_key(|o| o.rep);
    Ok(outcomes)
}

fn metadata(cfg: &RunConfig, prep: &Prepared, plan: &Plan, outcomes: &[RepOutcome]) -> String {
    let mut s = cfg.to_text();
    s.push_str(&format!("# gap0_used: {}\n", prep.gap0));
    s.push_str(&format!("# delta_x: {}\n", prep.mean_constants.noise.delta_x));
    s.push_str(&format!("# delta_y: {}\n", prep.mean_constants.noise.delta_y));
    for line in describe(plan) {
        s.push_str(&format!("# {line}\n"));
    }
    for o in outcomes {
        match &o.error {
            Some(e) => s.push_str(&format!("# rep {}: failed: {e}\n", o.rep)),
            None => s.push_str(&format!("# rep {}: ok\n", o.rep)),
        }
    }
    s
}

pub fn solve(cfg: &RunConfig) -> Result<SolveSummary, BenchError> {
    let prep = prepare(cfg)?;
    let plan = make_plan(cfg, &prep)?;
    for w in &plan.warnings {
        warn!("{w}");
    }
    info!("{} stages of {} calls, {} reps", plan.t_outer, plan.per_stage_calls, cfg.reps);
    let outcomes = run_reps(cfg, &prep, &plan)?;
    for o in &outcomes {
        if let Some(e) = &o.error {
            warn!("rep {}: {e}", o.rep);
        }
    }
    let rows: Vec<Row> = outcomes.iter().flat_map(|o| o.rows.iter().cloned()).collect();
    write(&cfg.out, &to_csv(&rows))?;
    write(&meta_path(&cfg.out), &metadata(cfg, &prep, &plan, &outcomes))?;
    Ok(SolveSummary { out: cfg.out.clone(), plan, outcomes })
}

/// One summary line for a finished run.
pub fn summary_line(name: &str, cfg: &RunConfig, s: &SolveSummary) -> String {
    let finals: Vec<&Row> = s.outcomes.iter().filter(|o| o.error.is_none()).filter_map(|o| o.rows.last()).collect();
    let mean = |f: &dyn Fn(&Row) -> Option<f64>| -> String {
        let v: Vec<f64> = finals.iter().filter_map(|r| f(r)).collect();
        if v.is_empty() {
            "-".into()
        } else {
            format!("{:.6e}", v.iter().sum::<f64>() / v.len() as f64)
        }
    };
    let calls = finals.iter().map(|r| r.oracle_calls).max().unwrap_or(0);
    format!(
        "{name}: algo={} reps={} failed={} calls={} objective={} stationarity={} out={}",
        cfg.algo,
        cfg.reps,
        s.failures(),
        calls,
        mean(&|r| r.objective),
        mean(&|r| r.stationarity),
        s.out.display()
    )
}
