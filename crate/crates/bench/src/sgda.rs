//! Alternating proximal stochastic gradient descent-ascent with constant steps.

use sapd_core::linalg::all_finite;
use sapd_core::outer::{Observer, OuterResult, StageRecord};
use sapd_core::problem::{Coupling, ProblemSpec};
use sapd_core::sapd::DIVERGENCE_NORM;
use sapd_core::SolverError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdaParams {
    pub tau: f64,
    pub sigma: f64,
    pub iterations: usize,
    /// A trace row is written every this many iterations.
    pub record_every: usize,
}

impl SgdaParams {
    pub fn oracle_calls_per_iteration(&self, samples_per_call: u64) -> u64 {
        2 * samples_per_call
    }
}

fn too_big(v: &[f64]) -> bool {
    !all_finite(v) || v.iter().any(|a| a.abs() > DIVERGENCE_NORM)
}

/// Each iteration takes a dual ascent step at `(x, y)` followed by a primal descent step at the
/// new dual point. Rows are numbered like outer stages so the trace format is shared.
pub fn sgda_run<C: Coupling>(
    p: &ProblemSpec<C>,
    params: &SgdaParams,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn rand::RngCore,
    mut observer: Option<Observer<'_>>,
) -> sapd_core::Result<OuterResult> {
    let SgdaParams { tau, sigma, iterations, record_every } = *params;
    if !(tau > 0.0 && sigma > 0.0) {
        return Err(SolverError::InvalidInput("SGDA steps must be positive".into()));
    }
    if record_every == 0 {
        return Err(SolverError::InvalidInput("record_every must be positive".into()));
    }
    let (n, m) = p.dims();
    if x0.len() != n {
        return Err(SolverError::DimensionMismatch { expected: n, got: x0.len() });
    }
    if y0.len() != m {
        return Err(SolverError::DimensionMismatch { expected: m, got: y0.len() });
    }
    let c = &p.coupling;
    let per_iter = params.oracle_calls_per_iteration(c.samples_per_call());
    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let (mut gx, mut gy) = (vec![0.0; n], vec![0.0; m]);
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; m]);
    let mut trace = vec![StageRecord { stage: 0, oracle_calls: 0, objective: observer.as_mut().map(|f| f(&x, &y)), stationarity: None }];
    let mut calls = 0u64;
    for k in 1..=iterations {
        c.sample_grad_y(&x, &y, rng, &mut gy);
        for i in 0..m {
            by[i] = y[i] + sigma * gy[i];
        }
        p.prox_g.apply(&by, sigma, &mut y)?;
        c.sample_grad_x(&x, &y, rng, &mut gx);
        for i in 0..n {
            bx[i] = x[i] - tau * gx[i];
        }
        p.prox_f.apply(&bx, tau, &mut x)?;
        calls += per_iter;
        if too_big(&x) || too_big(&y) {
            return Err(SolverError::Diverged { iteration: k });
        }
        if k % record_every == 0 || k == iterations {
            trace.push(StageRecord {
                stage: k.div_ceil(record_every),
                oracle_calls: calls,
                objective: observer.as_mut().map(|f| f(&x, &y)),
                stationarity: None,
            });
        }
    }
    Ok(OuterResult { x, y, stages_run: iterations.div_ceil(record_every), oracle_calls: calls, trace, converged: false })
}
