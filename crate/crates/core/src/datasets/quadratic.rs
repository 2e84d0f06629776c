//! Quadratic saddle instances `Phi(x, y) = x'Ax/2 + x'By - mu_y ||y||^2/2` with closed-form
//! saddle points, gaps and Moreau envelopes.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;

use crate::error::{check_len, invalid, Result, SolverError};
use crate::problem::{Coupling, FiniteSum, NoiseLevels, ProblemConstants, ProblemSpec, SmoothnessConstants};
use crate::prox::ProxKind;

fn matvec(a: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let r = &a[i * cols..(i + 1) * cols];
        out[i] = r.iter().zip(v).map(|(p, q)| p * q).sum();
    }
}

/// `out += a^T v`
fn matvec_t_add(a: &[f64], rows: usize, cols: usize, v: &[f64], out: &mut [f64]) {
    for i in 0..rows {
        let r = &a[i * cols..(i + 1) * cols];
        let vi = v[i];
        for j in 0..cols {
            out[j] += r[j] * vi;
        }
    }
}

fn to_row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect()
}

fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}

fn random_orthogonal(n: usize, rng: &mut dyn RngCore) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

fn gaussian_vec(dim: usize, std: f64, rng: &mut dyn RngCore) -> Vec<f64> {
    (0..dim).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

#[derive(Debug, Clone)]
pub struct QuadraticSaddle {
    n: usize,
    m: usize,
    a: Vec<f64>,
    b: Vec<f64>,
    mu_y: f64,
    gamma: f64,
    noise: NoiseLevels,
    a_norm: f64,
    b_norm: f64,
}

impl QuadraticSaddle {
    /// `a` must be symmetric with smallest eigenvalue at least `-gamma`.
    pub fn from_matrices(a: DMatrix<f64>, b: DMatrix<f64>, mu_y: f64, gamma: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n || b.ncols() == 0 || n == 0 {
            return invalid("A must be n x n and B must be n x m with n, m > 0");
        }
        if (&a - a.transpose()).abs().max() > 1e-12 * (1.0 + a.abs().max()) {
            return invalid("A must be symmetric");
        }
        if !(mu_y > 0.0 && gamma > 0.0) {
            return invalid("mu_y and gamma must be positive");
        }
        let lam_min = a.clone().symmetric_eigenvalues().min();
        if lam_min < -gamma * (1.0 + 1e-12) {
            return invalid(format!("A has eigenvalue {lam_min} below -gamma"));
        }
        let m = b.ncols();
        let a_norm = spectral_norm(&a);
        let b_norm = spectral_norm(&b);
        Ok(QuadraticSaddle {
            n,
            m,
            a: to_row_major(&a),
            b: to_row_major(&b),
            mu_y,
            gamma,
            noise: NoiseLevels::ZERO,
            a_norm,
            b_norm,
        })
    }

    /// Additive Gaussian oracle noise with `E||noise||^2 = delta^2` per axis.
    pub fn with_noise(mut self, noise: NoiseLevels) -> Self {
        self.noise = noise;
        self
    }

    pub fn a_mat(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.a)
    }

    pub fn b_mat(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.m, &self.b)
    }

    pub fn mu_y(&self) -> f64 {
        self.mu_y
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn constants(&self) -> ProblemConstants {
        let l = self.b_norm.max(f64::MIN_POSITIVE);
        ProblemConstants {
            smoothness: SmoothnessConstants { l_xx: self.a_norm, l_xy: l, l_yx: l, l_yy: self.mu_y },
            convexity: crate::problem::ConvexityModuli { gamma: self.gamma, mu_y: self.mu_y },
            noise: self.noise,
            mu_x: None,
        }
    }

    /// Unconstrained problem with `f = g = 0`.
    pub fn spec(&self) -> Result<ProblemSpec<&QuadraticSaddle>> {
        ProblemSpec::new(self, ProxKind::Zero, ProxKind::Zero, self.constants())
    }

    pub fn into_spec(self) -> Result<ProblemSpec<QuadraticSaddle>> {
        let c = self.constants();
        ProblemSpec::new(self, ProxKind::Zero, ProxKind::Zero, c)
    }

    /// `H = A + B B^T / mu_y`, the Hessian of the primal function.
    pub fn primal_hessian(&self) -> DMatrix<f64> {
        let b = self.b_mat();
        self.a_mat() + &b * b.transpose() / self.mu_y
    }

    /// `y*(x) = B^T x / mu_y`
    pub fn best_response_y(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.m];
        matvec_t_add(&self.b, self.n, self.m, x, &mut y);
        y.iter_mut().for_each(|v| *v /= self.mu_y);
        y
    }

    /// `phi(x) = max_y Phi(x, y) = x'Hx/2`
    pub fn primal_value(&self, x: &[f64]) -> f64 {
        let xv = DVector::from_column_slice(x);
        0.5 * xv.dot(&(self.primal_hessian() * &xv))
    }

    /// `prox_{lambda phi}(x) = (I + lambda H)^{-1} x`
    pub fn moreau_prox(&self, x: &[f64], lambda: f64) -> Result<Vec<f64>> {
        check_len(x.len(), self.n)?;
        let m = DMatrix::identity(self.n, self.n) + self.primal_hessian() * lambda;
        let sol = m
            .cholesky()
            .ok_or_else(|| SolverError::Precondition("I + lambda H is not positive definite".into()))?
            .solve(&DVector::from_column_slice(x));
        Ok(sol.iter().copied().collect())
    }

    /// `||grad phi_lambda(x)|| = ||x - prox_{lambda phi}(x)|| / lambda`
    pub fn moreau_grad_norm(&self, x: &[f64], lambda: f64) -> Result<f64> {
        let p = self.moreau_prox(x, lambda)?;
        Ok(crate::linalg::dist(x, &p) / lambda)
    }

    /// Saddle point of `Phi + (weight/2)||x - center||^2`.
    pub fn subproblem_saddle(&self, center: &[f64], weight: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(center.len(), self.n)?;
        let m = self.primal_hessian() + DMatrix::identity(self.n, self.n) * weight;
        let rhs = DVector::from_column_slice(center) * weight;
        let x = m
            .cholesky()
            .ok_or_else(|| SolverError::Precondition("subproblem is not strongly convex".into()))?
            .solve(&rhs);
        let x: Vec<f64> = x.iter().copied().collect();
        let y = self.best_response_y(&x);
        Ok((x, y))
    }

    /// Minimizer of the subproblem in `x` for fixed `y`: `(A + weight I)^{-1}(weight center - B y)`.
    pub fn subproblem_best_response_x(&self, center: &[f64], weight: f64, y: &[f64]) -> Result<Vec<f64>> {
        let aw = self.a_mat() + DMatrix::identity(self.n, self.n) * weight;
        let r = DVector::from_column_slice(center) * weight - self.b_mat() * DVector::from_column_slice(y);
        let x = aw
            .cholesky()
            .ok_or_else(|| SolverError::Precondition("A + weight I is not positive definite".into()))?
            .solve(&r);
        Ok(x.iter().copied().collect())
    }

    /// `max_y' L(x, y') - min_x' L(x', y)` for `L = Phi + (weight/2)||x - center||^2`.
    pub fn subproblem_gap(&self, center: &[f64], weight: f64, x: &[f64], y: &[f64]) -> Result<f64> {
        check_len(x.len(), self.n)?;
        check_len(y.len(), self.m)?;
        let shifted = |x: &[f64], y: &[f64]| {
            self.value(x, y).unwrap() + 0.5 * weight * crate::linalg::dist_sq(x, center)
        };
        let ys = self.best_response_y(x);
        let xs = self.subproblem_best_response_x(center, weight, y)?;
        Ok(shifted(x, &ys) - shifted(&xs, y))
    }

    /// Upper estimate of the initial suboptimality used by the outer-loop bound:
    /// the first subproblem's gap at `(x0, y0)` plus `phi(x0) - inf phi`.
    pub fn initial_gap_estimate(&self, x0: &[f64], y0: &[f64]) -> Result<f64> {
        let h_min = self.primal_hessian().symmetric_eigenvalues().min();
        if h_min < -1e-12 {
            return Err(SolverError::Precondition("primal function is unbounded below".into()));
        }
        Ok(self.subproblem_gap(x0, 2.0 * self.gamma, x0, y0)? + self.primal_value(x0))
    }

    fn add_noise(&self, delta: f64, out: &mut [f64], rng: &mut dyn RngCore) {
        if delta > 0.0 {
            let std = delta / (out.len() as f64).sqrt();
            for o in out.iter_mut() {
                *o += std * rng.sample::<f64, _>(StandardNormal);
            }
        }
    }
}

impl Coupling for QuadraticSaddle {
    fn dims(&self) -> (usize, usize) {
        (self.n, self.m)
    }
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        matvec(&self.a, self.n, self.n, x, out);
        for i in 0..self.n {
            let r = &self.b[i * self.m..(i + 1) * self.m];
            out[i] += r.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
        }
    }
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        for j in 0..self.m {
            out[j] = -self.mu_y * y[j];
        }
        matvec_t_add(&self.b, self.n, self.m, x, out);
    }
    fn sample_grad_x(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.grad_x(x, y, out);
        self.add_noise(self.noise.delta_x, out, rng);
    }
    fn sample_grad_y(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.grad_y(x, y, out);
        self.add_noise(self.noise.delta_y, out, rng);
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let mut ax = vec![0.0; self.n];
        matvec(&self.a, self.n, self.n, x, &mut ax);
        let mut bty = vec![0.0; self.n];
        matvec(&self.b, self.n, self.m, y, &mut bty);
        let xax = crate::linalg::dot(x, &ax);
        let xby = crate::linalg::dot(x, &bty);
        Some(0.5 * xax + xby - 0.5 * self.mu_y * crate::linalg::norm_sq(y))
    }
}

/// Random instance with `lambda_min(A) = -gamma` and a coupling strong enough that the
/// primal function `phi` is strongly convex.
///
/// The negative curvature of `A` lives in the first `m` eigendirections, each of which is
/// coupled to `y` with singular value `coupling_scale * (1 + j/m)`. Requires
/// `coupling_scale^2 > 2 gamma mu_y`.
pub fn make_quadratic_saddle(
    n: usize,
    m: usize,
    gamma: f64,
    mu_y: f64,
    coupling_scale: f64,
    rng: &mut dyn RngCore,
) -> Result<QuadraticSaddle> {
    if n == 0 || m == 0 || m > n {
        return invalid("need 0 < m <= n");
    }
    if !(gamma > 0.0 && mu_y > 0.0) {
        return invalid("gamma and mu_y must be positive");
    }
    if !(coupling_scale * coupling_scale > 2.0 * gamma * mu_y) {
        return invalid("coupling too weak for a bounded-below primal function");
    }
    let q = random_orthogonal(n, rng);
    let v = random_orthogonal(m, rng);
    let mut lam = vec![0.0; n];
    lam[0] = -gamma;
    for l in lam.iter_mut().take(m).skip(1) {
        *l = rng.gen_range(-gamma..gamma);
    }
    for l in lam.iter_mut().skip(m) {
        *l = rng.gen_range(0.5 * gamma..2.0 * gamma + 1.0);
    }
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(lam)) * q.transpose();
    let a = (&a + a.transpose()) * 0.5;
    let s = DMatrix::from_fn(n, m, |i, j| if i == j { coupling_scale * (1.0 + j as f64 / m as f64) } else { 0.0 });
    let b = &q * s * v.transpose();
    QuadraticSaddle::from_matrices(a, b, mu_y, gamma)
}

/// Finite sum of quadratic components whose mean is a given [`QuadraticSaddle`].
///
/// Component `i` is `x'(A + E_i)x/2 + x'(B + F_i)y - mu_y||y||^2/2 + u_i'x + w_i'y` with the
/// perturbations summing to zero.
#[derive(Debug, Clone)]
pub struct QuadraticFiniteSum {
    base: QuadraticSaddle,
    a_i: Vec<Vec<f64>>,
    b_i: Vec<Vec<f64>>,
    u_i: Vec<Vec<f64>>,
    w_i: Vec<Vec<f64>>,
    constants: ProblemConstants,
}

impl QuadraticFiniteSum {
    pub fn base(&self) -> &QuadraticSaddle {
        &self.base
    }

    /// Almost-sure (per-component) constants.
    pub fn constants(&self) -> ProblemConstants {
        self.constants
    }

    pub fn spec(&self) -> Result<ProblemSpec<&QuadraticFiniteSum>> {
        ProblemSpec::new(self, ProxKind::Zero, ProxKind::Zero, self.constants)
    }
}

pub fn make_quadratic_finite_sum(
    base: QuadraticSaddle,
    n_comp: usize,
    spread: f64,
    rng: &mut dyn RngCore,
) -> Result<QuadraticFiniteSum> {
    if n_comp == 0 {
        return invalid("need at least one component");
    }
    let (n, m) = (base.n, base.m);
    let center = |mut vs: Vec<Vec<f64>>| {
        let k = vs.len() as f64;
        let dim = vs[0].len();
        let mean: Vec<f64> = (0..dim).map(|j| vs.iter().map(|v| v[j]).sum::<f64>() / k).collect();
        for v in vs.iter_mut() {
            for j in 0..dim {
                v[j] -= mean[j];
            }
        }
        vs
    };
    let ea = center(
        (0..n_comp)
            .map(|_| {
                let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
                let s = (&g + g.transpose()) * (0.5 * spread / (n as f64).sqrt());
                to_row_major(&s)
            })
            .collect(),
    );
    let fb = center((0..n_comp).map(|_| gaussian_vec(n * m, spread / ((n + m) as f64).sqrt(), rng)).collect());
    let u = center((0..n_comp).map(|_| gaussian_vec(n, spread, rng)).collect());
    let w = center((0..n_comp).map(|_| gaussian_vec(m, spread, rng)).collect());
    let a_i: Vec<Vec<f64>> = ea.into_iter().map(|e| e.iter().zip(&base.a).map(|(p, q)| p + q).collect()).collect();
    let b_i: Vec<Vec<f64>> = fb.into_iter().map(|e| e.iter().zip(&base.b).map(|(p, q)| p + q).collect()).collect();
    let l_xx = a_i.iter().map(|a| spectral_norm(&DMatrix::from_row_slice(n, n, a))).fold(0.0, f64::max);
    let l_b = b_i.iter().map(|b| spectral_norm(&DMatrix::from_row_slice(n, m, b))).fold(0.0, f64::max);
    let mut constants = base.constants();
    constants.smoothness = SmoothnessConstants { l_xx, l_xy: l_b, l_yx: l_b, l_yy: base.mu_y };
    Ok(QuadraticFiniteSum { base, a_i, b_i, u_i: u, w_i: w, constants })
}

impl Coupling for QuadraticFiniteSum {
    fn dims(&self) -> (usize, usize) {
        self.base.dims()
    }
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.grad_x(x, y, out)
    }
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.grad_y(x, y, out)
    }
    fn sample_grad_x(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let i = rng.gen_range(0..self.a_i.len());
        self.component_grad_x(i, x, y, out)
    }
    fn sample_grad_y(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let i = rng.gen_range(0..self.a_i.len());
        self.component_grad_y(i, x, y, out)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        self.base.value(x, y)
    }
}

impl FiniteSum for QuadraticFiniteSum {
    fn n_components(&self) -> usize {
        self.a_i.len()
    }
    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (n, m) = (self.base.n, self.base.m);
        matvec(&self.a_i[i], n, n, x, out);
        let b = &self.b_i[i];
        for r in 0..n {
            out[r] += b[r * m..(r + 1) * m].iter().zip(y).map(|(p, q)| p * q).sum::<f64>() + self.u_i[i][r];
        }
    }
    fn component_grad_y(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        let (n, m) = (self.base.n, self.base.m);
        for j in 0..m {
            out[j] = -self.base.mu_y * y[j] + self.w_i[i][j];
        }
        matvec_t_add(&self.b_i[i], n, m, x, out);
    }
}
