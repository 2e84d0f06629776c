//! Variance-reduced SAPD with recursive (SPIDER) gradient estimators on finite sums.

use rand::RngCore;

use crate::error::{invalid, Result};
use crate::linalg::dist_sq;
use crate::problem::{sample_batch, FiniteSum, ProblemSpec};
use crate::sapd::{check_divergence, check_start, SapdRunResult, WeightedAverage};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VrParams {
    pub tau: f64,
    pub sigma: f64,
    pub theta: f64,
    /// Large-batch size used at refresh iterations and at start.
    pub b: usize,
    pub b_x: usize,
    pub b_y: usize,
    /// Refresh period.
    pub q: usize,
    pub n_inner: usize,
    pub mu_x: f64,
}

impl VrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau.is_finite() && self.sigma > 0.0 && self.sigma.is_finite()) {
            return invalid("step sizes must be positive and finite");
        }
        if !(0.0..=1.0).contains(&self.theta) {
            return invalid("momentum theta outside [0, 1]");
        }
        if self.b == 0 || self.b_x == 0 || self.b_y == 0 || self.q == 0 || self.n_inner == 0 {
            return invalid("batch sizes, period and iteration count must be positive");
        }
        Ok(())
    }

    /// Exact single-sample oracle calls consumed by one run of `n_inner` iterations.
    pub fn oracle_calls(&self) -> u64 {
        let (b, bx, by, q) = (self.b as u64, self.b_x as u64, self.b_y as u64, self.q as u64);
        let mut calls = b;
        for k in 0..self.n_inner as u64 {
            calls += if k % q == 0 { b } else { 2 * bx };
            calls += if (k + 1) % q == 0 { b } else { 2 * by };
        }
        calls
    }
}

/// Per-iteration record of the x-estimator, kept when requested.
#[derive(Debug, Clone)]
pub struct EstimatorStep {
    pub k: usize,
    pub refresh: bool,
    pub batch: Vec<usize>,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct VrOptions {
    pub keep_iterates: bool,
    pub keep_estimators: bool,
}

#[derive(Debug, Clone)]
pub struct VrRunResult {
    pub run: SapdRunResult,
    pub estimators: Option<Vec<EstimatorStep>>,
}

/// Runs `params.n_inner` variance-reduced iterations and returns the uniform average of
/// `(x_1, y_1), ..., (x_N, y_N)`.
pub fn vr_sapd_run<C: FiniteSum>(
    p: &ProblemSpec<C>,
    params: &VrParams,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn RngCore,
) -> Result<SapdRunResult> {
    Ok(vr_sapd_run_with(p, params, x0, y0, rng, &VrOptions::default())?.run)
}

pub fn vr_sapd_run_with<C: FiniteSum>(
    p: &ProblemSpec<C>,
    params: &VrParams,
    x0: &[f64],
    y0: &[f64],
    rng: &mut dyn RngCore,
    opts: &VrOptions,
) -> Result<VrRunResult> {
    params.validate()?;
    check_start(p, x0, y0)?;
    let (n, m) = p.dims();
    let c = &p.coupling;
    let nc = c.n_components();
    if nc == 0 {
        return invalid("finite sum has no components");
    }
    let VrParams { tau, sigma, theta, b, b_x, b_y, q, n_inner, .. } = *params;

    let mut x = x0.to_vec();
    let mut y = y0.to_vec();
    let mut x_prev = x0.to_vec();
    let mut x_next = vec![0.0; n];
    let mut y_next = vec![0.0; m];
    let mut v = vec![0.0; n];
    let mut w = vec![0.0; m];
    let mut w_next = vec![0.0; m];
    let mut s = vec![0.0; m];
    let mut t1x = vec![0.0; n];
    let mut t2x = vec![0.0; n];
    let mut t1y = vec![0.0; m];
    let mut t2y = vec![0.0; m];
    let mut buf_x = vec![0.0; n];
    let mut buf_y = vec![0.0; m];
    let mut avg_x = WeightedAverage::new(n, 1.0)?;
    let mut avg_y = WeightedAverage::new(m, 1.0)?;
    let mut iterates = opts.keep_iterates.then(|| vec![(x.clone(), y.clone())]);
    let mut estimators = opts.keep_estimators.then(Vec::new);
    let mut calls = b as u64;
    let mut last_step = 0.0;

    let big = sample_batch(nc, b, rng);
    c.batch_grad_y(&big, &x, &y, &mut w);
    s.copy_from_slice(&w);

    for k in 0..n_inner {
        for i in 0..m {
            buf_y[i] = y[i] + sigma * s[i];
        }
        p.prox_g.apply(&buf_y, sigma, &mut y_next)?;

        let refresh = k % q == 0;
        let batch = if refresh {
            let idx = sample_batch(nc, b, rng);
            c.batch_grad_x(&idx, &x, &y_next, &mut v);
            calls += b as u64;
            idx
        } else {
            let idx = sample_batch(nc, b_x, rng);
            c.batch_grad_x(&idx, &x, &y_next, &mut t1x);
            c.batch_grad_x(&idx, &x_prev, &y, &mut t2x);
            for i in 0..n {
                v[i] += t1x[i] - t2x[i];
            }
            calls += 2 * b_x as u64;
            idx
        };
        if let Some(e) = estimators.as_mut() {
            e.push(EstimatorStep { k, refresh, batch, v: v.clone() });
        }
        for i in 0..n {
            buf_x[i] = x[i] - tau * v[i];
        }
        p.prox_f.apply(&buf_x, tau, &mut x_next)?;

        if (k + 1) % q == 0 {
            let idx = sample_batch(nc, b, rng);
            c.batch_grad_y(&idx, &x_next, &y_next, &mut w_next);
            calls += b as u64;
        } else {
            let idx = sample_batch(nc, b_y, rng);
            c.batch_grad_y(&idx, &x_next, &y_next, &mut t1y);
            c.batch_grad_y(&idx, &x, &y, &mut t2y);
            for i in 0..m {
                w_next[i] = w[i] + (t1y[i] - t2y[i]);
            }
            calls += 2 * b_y as u64;
        }
        for i in 0..m {
            s[i] = (1.0 + theta) * w_next[i] - theta * w[i];
        }
        std::mem::swap(&mut w, &mut w_next);

        check_divergence(&x_next, &y_next, k + 1)?;
        last_step = (dist_sq(&x_next, &x) + dist_sq(&y_next, &y)).sqrt();
        x_prev.copy_from_slice(&x);
        std::mem::swap(&mut x, &mut x_next);
        std::mem::swap(&mut y, &mut y_next);
        avg_x.push(&x);
        avg_y.push(&y);
        if let Some(it) = iterates.as_mut() {
            it.push((x.clone(), y.clone()));
        }
    }

    Ok(VrRunResult {
        run: SapdRunResult {
            x_avg: avg_x.into_value(),
            y_avg: avg_y.into_value(),
            x_last: x,
            y_last: y,
            last_step,
            oracle_calls: calls,
            iterates,
        },
        estimators,
    })
}

/// Empirical and theoretical mean squared error of the recursive x-estimator along a fixed trajectory.
#[derive(Debug, Clone)]
pub struct SpiderProbe {
    /// `E||v_k - grad_x Phi(x_k, y_{k+1})||^2` estimated over repetitions.
    pub mse: Vec<f64>,
    /// Standard error of each `mse` entry.
    pub std_err: Vec<f64>,
    /// Variance bound accumulated since the last refresh.
    pub bound: Vec<f64>,
    /// Largest component variance `(1/n) sum_i ||grad_i - grad||^2` along the trajectory.
    pub delta_sq: f64,
}

/// Replays the x-estimator recursion of the variance-reduced iteration along the trajectory
/// `traj = [(x_0, y_0), ..., (x_K, y_K)]` for `reps` independent batch draws. Step `k` uses
/// the pair `(x_k, y_{k+1})`, so `K` trajectory steps give `K` estimator steps.
pub fn spider_variance_probe<C: FiniteSum>(
    fs: &C,
    l_xx: f64,
    l_xy: f64,
    traj: &[(Vec<f64>, Vec<f64>)],
    b: usize,
    b_x: usize,
    q: usize,
    reps: usize,
    rng: &mut dyn RngCore,
) -> Result<SpiderProbe> {
    if traj.len() < 2 || reps < 2 || b == 0 || b_x == 0 || q == 0 {
        return invalid("probe needs at least two trajectory points, two repetitions and positive sizes");
    }
    let (n, _) = fs.dims();
    let nc = fs.n_components();
    let steps = traj.len() - 1;

    let exact: Vec<Vec<f64>> = (0..steps)
        .map(|k| {
            let mut g = vec![0.0; n];
            fs.grad_x(&traj[k].0, &traj[k + 1].1, &mut g);
            g
        })
        .collect();
    let mut delta_sq: f64 = 0.0;
    let mut gi = vec![0.0; n];
    for k in 0..steps {
        let mut acc = 0.0;
        for i in 0..nc {
            fs.component_grad_x(i, &traj[k].0, &traj[k + 1].1, &mut gi);
            acc += dist_sq(&gi, &exact[k]);
        }
        delta_sq = delta_sq.max(acc / nc as f64);
    }

    let mut bound = vec![0.0; steps];
    let mut drift = 0.0;
    for k in 0..steps {
        if k % q == 0 {
            drift = 0.0;
        } else {
            let dx = dist_sq(&traj[k].0, &traj[k - 1].0);
            let dy = dist_sq(&traj[k + 1].1, &traj[k].1);
            drift += 2.0 * l_xx * l_xx / b_x as f64 * dx + 2.0 * l_xy * l_xy / b_x as f64 * dy;
        }
        bound[k] = delta_sq / b as f64 + drift;
    }

    let mut sum = vec![0.0; steps];
    let mut sum_sq = vec![0.0; steps];
    let mut v = vec![0.0; n];
    let mut t1 = vec![0.0; n];
    let mut t2 = vec![0.0; n];
    for _ in 0..reps {
        for k in 0..steps {
            if k % q == 0 {
                let idx = sample_batch(nc, b, rng);
                fs.batch_grad_x(&idx, &traj[k].0, &traj[k + 1].1, &mut v);
            } else {
                let idx = sample_batch(nc, b_x, rng);
                fs.batch_grad_x(&idx, &traj[k].0, &traj[k + 1].1, &mut t1);
                fs.batch_grad_x(&idx, &traj[k - 1].0, &traj[k].1, &mut t2);
                for i in 0..n {
                    v[i] += t1[i] - t2[i];
                }
            }
            let e = dist_sq(&v, &exact[k]);
            sum[k] += e;
            sum_sq[k] += e * e;
        }
    }
    let r = reps as f64;
    let mse: Vec<f64> = sum.iter().map(|s| s / r).collect();
    let std_err = sum_sq
        .iter()
        .zip(&mse)
        .map(|(ss, mu)| ((ss / r - mu * mu).max(0.0) * r / (r - 1.0) / r).sqrt())
        .collect();
    Ok(SpiderProbe { mse, std_err, bound, delta_sq })
}
