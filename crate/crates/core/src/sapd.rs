//! Stochastic accelerated primal-dual iterations on a strongly convex-strongly concave problem.

use rand::RngCore;

use crate::error::{check_len, invalid, Result, SolverError};
use crate::linalg::{all_finite, dist_sq, norm_sq};
use crate::problem::{Coupling, ProblemSpec};

/// Iterates whose norm exceeds this are treated as divergent.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SapdParams {
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
    /// Averaging base: iterate `k` gets weight `rho^{-k}`.
    pub rho: f64,
    pub alpha: f64,
    pub mu_x: f64,
    pub n_inner: usize,
}

impl SapdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite() && self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid(format!("step sizes must be positive and finite (tau={}, sigma={})", self.tau, self.sigma));
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return invalid(format!("momentum theta={} outside [0, 1]", self.theta));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return invalid(format!("averaging base rho={} outside (0, 1]", self.rho));
        }
        if self.n_inner == 0 {
            return invalid("inner iteration count must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SapdOptions {
    /// Keep every iterate pair `(x_k, y_k)`, `k = 0..=N`.
    pub keep_iterates: bool,
}

#[derive(Debug, Clone)]
pub struct SapdRunResult {
    pub x_avg: Vec<f64>,
    pub y_avg: Vec<f64>,
    pub x_last: Vec<f64>,
    pub y_last: Vec<f64>,
    /// `||z_N - z_{N-1}||`
    pub last_step: f64,
    pub oracle_calls: u64,
    pub iterates: Option<Vec<(Vec<f64>, Vec<f64>)>>,
}

/// Streaming average with weights `rho^{-k}`, `k = 0, 1, ...`, normalized by their sum.
///
/// Uses the update `avg += (z - avg) / c_k` with `c_k = 1 + rho c_{k-1}`, which never forms
/// `rho^{-k}` and so cannot overflow.
#[derive(Debug, Clone)]
pub struct WeightedAverage {
    rho: f64,
    c: f64,
    avg: Vec<f64>,
    count: usize,
}

impl WeightedAverage {
    pub fn new(dim: usize, rho: f64) -> Result<Self> {
        if !(rho > 0.0 && rho <= 1.0) {
            return invalid(format!("averaging base rho={rho} outside (0, 1]"));
        }
        Ok(WeightedAverage { rho, c: 0.0, avg: vec![0.0; dim], count: 0 })
    }

    pub fn push(&mut self, z: &[f64]) {
        self.c = 1.0 + self.rho * self.c;
        let w = 1.0 / self.c;
        for (a, v) in self.avg.iter_mut().zip(z) {
            *a += w * (v - *a);
        }
        self.count += 1;
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn value(&self) -> &[f64] {
        &self.avg
    }

    pub fn into_value(self) -> Vec<f64> {
        self.avg
    }
}

/// `sum_k rho^{-k} z_k / sum_k rho^{-k}` over the given iterates.
pub fn weighted_average(iterates: &[Vec<f64>], rho: f64) -> Result<Vec<f64>> {
    let Some(first) = iterates.first() else {
        return invalid("no iterates to average");
    };
    let mut acc = WeightedAverage::new(first.len(), rho)?;
    for z in iterates {
        check_len(z.len(), first.len())?;
        acc.push(z);
    }
    Ok(acc.into_value())
}

pub(crate) fn check_divergence(x: &[f64], y: &[f64], iteration: usize) -> Result<()> {
    let r = norm_sq(x) + norm_sq(y);
    if !all_finite(x) || !all_finite(y) || !(r <= DIVERGENCE_NORM * DIVERGENCE_NORM) {
        return Err(SolverError::Diverged { iteration });
    }
    Ok(())
}

pub(crate) fn check_start<C: Coupling>(p: &ProblemSpec<C>, x0: &[f64], y0: &[f64]) -> Result<()> {
    let (n, m) = p.dims();
    check_len(x0.len(), n)?;
    check_len(y0.len(), m)?;
    if !all_finite(x0) || !all_finite(y0) {
        return invalid("non-finite starting point");
    }
    Ok(())
}

/// Runs `N = params.n_inner` SAPD iterations from `(x0, y0)` and returns the `rho`-weighted average
/// of `(x_1, y_1), ..., (x_N, y_N)`.
///
/// Uses `N` x-oracle calls and `N + 1` y-oracle calls: the y-gradient drawn at the end of one
/// iteration is reused as the current-point gradient of the next.
pub fn sapd_run<C: Coupling>(
    p: &ProblemSpec<C>,
    params: &SapdParams,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn RngCore,
) -> Result<SapdRunResult> {
    sapd_run_with(p, params, x0, y0, rng, SapdOptions::default())
}

pub fn sapd_run_with<C: Coupling>(
    p: &ProblemSpec<C>,
    params: &SapdParams,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn RngCore,
    opts: SapdOptions,
) -> Result<SapdRunResult> {
    params.validate()?;
    check_start(p, x0, y0)?;
    let (n, m) = p.dims();
    let c = &p.coupling;
    let SapdParams { tau, sigma, theta, rho, n_inner, .. } = *params;

    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut x_next = vec![0.0; n];
    let mut y_next = vec![0.0; m];
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; m];
    let mut gy_next = vec![0.0; m];
    let mut q = vec![0.0; m];
    let mut buf_x = vec![0.0; n];
    let mut buf_y = vec![0.0; m];
    let mut avg_x = WeightedAverage::new(n, rho)?;
    let mut avg_y = WeightedAverage::new(m, rho)?;
    let mut iterates = opts.keep_iterates.then(|| vec![(x.clone(), y.clone())]);
    let mut last_step = 0.0;

    c.sample_grad_y(&x, &y, rng, &mut gy);
    for k in 0..n_inner {
        for i in 0..m {
            buf_y[i] = y[i] + sigma * (gy[i] + theta * q[i]);
        }
        p.prox_g.apply(&buf_y, sigma, &mut y_next)?;

        c.sample_grad_x(&x, &y_next, rng, &mut gx);
        for i in 0..n {
            buf_x[i] = x[i] - tau * gx[i];
        }
        p.prox_f.apply(&buf_x, tau, &mut x_next)?;

        c.sample_grad_y(&x_next, &y_next, rng, &mut gy_next);
        for i in 0..m {
            q[i] = gy_next[i] - gy[i];
        }
        std::mem::swap(&mut gy, &mut gy_next);

        check_divergence(&x_next, &y_next, k + 1)?;
        last_step = (dist_sq(&x_next, &x) + dist_sq(&y_next, &y)).sqrt();
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut y, &mut y_next);
        avg_x.push(&x);
        avg_y.push(&y);
        if let Some(it) = iterates.as_mut() {
            it.push((x.clone(), y.clone()));
        }
    }

    let per_call = c.samples_per_call();
    Ok(SapdRunResult {
        x_avg: avg_x.into_value(),
        y_avg: avg_y.into_value(),
        x_last: x,
        y_last: y,
        last_step,
        oracle_calls: (2 * n_inner as u64 + 1) * per_call,
        iterates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streaming_average_matches_direct_formula() {
        let rho: f64 = 0.8;
        let zs: Vec<Vec<f64>> = (0..7).map(|k| vec![k as f64, (k * k) as f64 - 3.0]).collect();
        let avg = weighted_average(&zs, rho).unwrap();
        let weights: Vec<f64> = (0..7).map(|k| rho.powi(-k)).collect();
        let total: f64 = weights.iter().sum();
        for d in 0..2 {
            let direct: f64 = zs.iter().zip(&weights).map(|(z, w)| w * z[d]).sum::<f64>() / total;
            assert!((avg[d] - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn average_of_single_iterate_is_itself() {
        assert_eq!(weighted_average(&[vec![1.5, -2.0]], 0.3).unwrap(), vec![1.5, -2.0]);
        assert!(weighted_average(&[], 0.5).is_err());
        assert!(weighted_average(&[vec![1.0]], 0.0).is_err());
    }

    #[test]
    fn long_average_stays_finite() {
        let mut acc = WeightedAverage::new(1, 0.5).unwrap();
        for _ in 0..100_000 {
            acc.push(&[1.0]);
        }
        assert!((acc.value()[0] - 1.0).abs() < 1e-12);
    }
}
