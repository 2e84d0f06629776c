//! Problem template `L(x, y) = f(x) + Phi(x, y) - g(y)`: gradient oracles, constants,
//! and the wrappers used by the outer loop (shifted subproblems, dual smoothing, minibatching).

use rand::{Rng, RngCore};

use crate::error::{check_len, invalid, Result, SolverError};
use crate::linalg::pairwise_sum;
use crate::prox::ProxKind;

/// Lipschitz constants of the partial gradients of `Phi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessConstants {
    pub l_xx: f64,
    pub l_xy: f64,
    pub l_yx: f64,
    pub l_yy: f64,
}

impl SmoothnessConstants {
    pub fn new(l_xx: f64, l_xy: f64, l_yx: f64, l_yy: f64) -> Result<Self> {
        let s = SmoothnessConstants { l_xx, l_xy, l_yx, l_yy };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.l_xx, self.l_xy, self.l_yx, self.l_yy];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return invalid("Lipschitz constants must be finite and nonnegative");
        }
        if !(self.l_xy > 0.0 && self.l_yx > 0.0) {
            return invalid("coupling constants L_xy and L_yx must be positive");
        }
        Ok(())
    }
}

/// Weak convexity modulus in `x` and strong concavity modulus in `y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityModuli {
    pub gamma: f64,
    pub mu_y: f64,
}

/// Standard deviations of the stochastic gradient oracles.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NoiseLevels {
    pub delta_x: f64,
    pub delta_y: f64,
}

impl NoiseLevels {
    pub const ZERO: NoiseLevels = NoiseLevels { delta_x: 0.0, delta_y: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub smoothness: SmoothnessConstants,
    pub convexity: ConvexityModuli,
    pub noise: NoiseLevels,
    /// Strong convexity in `x` carried by a shifted subproblem.
    pub mu_x: Option<f64>,
}

impl ProblemConstants {
    pub fn new(smoothness: SmoothnessConstants, gamma: f64, mu_y: f64, noise: NoiseLevels) -> Result<Self> {
        let c = ProblemConstants { smoothness, convexity: ConvexityModuli { gamma, mu_y }, noise, mu_x: None };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        self.smoothness.validate()?;
        let ConvexityModuli { gamma, mu_y } = self.convexity;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return invalid("weak convexity modulus gamma must be positive");
        }
        if !(mu_y >= 0.0 && mu_y.is_finite()) {
            return invalid("mu_y must be nonnegative");
        }
        if !(self.noise.delta_x >= 0.0 && self.noise.delta_y >= 0.0) {
            return invalid("noise levels must be nonnegative");
        }
        if gamma > self.smoothness.l_xx && self.smoothness.l_xx > 0.0 {
            log::warn!("gamma = {gamma} exceeds L_xx = {}; the smoothness bound is loose", self.smoothness.l_xx);
        }
        Ok(())
    }
}

/// Gradient oracles for the smooth coupling `Phi`.
///
/// The `sample_*` methods return unbiased estimates and default to the exact gradient.
pub trait Coupling: Sync {
    fn dims(&self) -> (usize, usize);
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]);
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]);

    fn sample_grad_x(&self, x: &[f64], y: &[f64], _rng: &mut dyn RngCore, out: &mut [f64]) {
        self.grad_x(x, y, out)
    }
    fn sample_grad_y(&self, x: &[f64], y: &[f64], _rng: &mut dyn RngCore, out: &mut [f64]) {
        self.grad_y(x, y, out)
    }
    /// Single-sample oracle calls consumed by one `sample_*` call.
    fn samples_per_call(&self) -> u64 {
        1
    }
    /// `Phi(x, y)` when available.
    fn value(&self, _x: &[f64], _y: &[f64]) -> Option<f64> {
        None
    }
}

/// A coupling `Phi = (1/n) sum_i Phi_i` with per-component gradients.
pub trait FiniteSum: Coupling {
    fn n_components(&self) -> usize;
    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]);
    fn component_grad_y(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]);

    /// Mean of the component x-gradients over `batch` (indices may repeat).
    fn batch_grad_x(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        let s = pairwise_sum(batch.len(), out.len(), &mut |k, buf| self.component_grad_x(batch[k], x, y, buf));
        let inv = 1.0 / batch.len() as f64;
        for (o, v) in out.iter_mut().zip(s) {
            *o = v * inv;
        }
    }

    fn batch_grad_y(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        let s = pairwise_sum(batch.len(), out.len(), &mut |k, buf| self.component_grad_y(batch[k], x, y, buf));
        let inv = 1.0 / batch.len() as f64;
        for (o, v) in out.iter_mut().zip(s) {
            *o = v * inv;
        }
    }
}

impl<T: Coupling + ?Sized> Coupling for &T {
    fn dims(&self) -> (usize, usize) {
        (**self).dims()
    }
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).grad_x(x, y, out)
    }
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).grad_y(x, y, out)
    }
    fn sample_grad_x(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        (**self).sample_grad_x(x, y, rng, out)
    }
    fn sample_grad_y(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        (**self).sample_grad_y(x, y, rng, out)
    }
    fn samples_per_call(&self) -> u64 {
        (**self).samples_per_call()
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        (**self).value(x, y)
    }
}

impl<T: FiniteSum + ?Sized> FiniteSum for &T {
    fn n_components(&self) -> usize {
        (**self).n_components()
    }
    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).component_grad_x(i, x, y, out)
    }
    fn component_grad_y(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).component_grad_y(i, x, y, out)
    }
    fn batch_grad_x(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).batch_grad_x(batch, x, y, out)
    }
    fn batch_grad_y(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        (**self).batch_grad_y(batch, x, y, out)
    }
}

/// Draws `size` component indices uniformly with replacement.
pub fn sample_batch(n: usize, size: usize, rng: &mut dyn RngCore) -> Vec<usize> {
    (0..size).map(|_| rng.gen_range(0..n)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Mean gradient of the components listed in `batch` along one axis.
pub fn batch_gradient<C: FiniteSum>(fs: &C, axis: Axis, batch: &[usize], x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
    if batch.is_empty() {
        return Err(SolverError::Config("empty batch".into()));
    }
    let nc = fs.n_components();
    if let Some(&i) = batch.iter().find(|&&i| i >= nc) {
        return invalid(format!("component index {i} out of range for {nc} components"));
    }
    let (n, m) = fs.dims();
    check_len(x.len(), n)?;
    check_len(y.len(), m)?;
    Ok(match axis {
        Axis::X => {
            let mut out = vec![0.0; n];
            fs.batch_grad_x(batch, x, y, &mut out);
            out
        }
        Axis::Y => {
            let mut out = vec![0.0; m];
            fs.batch_grad_y(batch, x, y, &mut out);
            out
        }
    })
}

/// Minibatch gradient of a finite sum along one axis from `batch` uniform draws.
pub fn sample_batch_gradient<C: FiniteSum>(
    fs: &C,
    axis: Axis,
    x: &[f64],
    y: &[f64],
    batch: usize,
    rng: &mut dyn RngCore,
) -> Result<Vec<f64>> {
    if batch == 0 {
        return Err(SolverError::Config("batch size must be positive".into()));
    }
    let idx = sample_batch(fs.n_components(), batch, rng);
    batch_gradient(fs, axis, &idx, x, y)
}

/// Problem instance: coupling, the two proximable terms and the constants that drive the schedules.
#[derive(Debug, Clone)]
pub struct ProblemSpec<C> {
    pub coupling: C,
    pub prox_f: ProxKind,
    pub prox_g: ProxKind,
    pub constants: ProblemConstants,
    /// Diameter of `dom g`, when bounded.
    pub dual_diameter: Option<f64>,
}

impl<C: Coupling> ProblemSpec<C> {
    pub fn new(coupling: C, prox_f: ProxKind, prox_g: ProxKind, constants: ProblemConstants) -> Result<Self> {
        constants.validate()?;
        let (n, m) = coupling.dims();
        if n == 0 || m == 0 {
            return invalid("problem dimensions must be positive");
        }
        prox_f.validate(n)?;
        prox_g.validate(m)?;
        Ok(ProblemSpec { coupling, prox_f, prox_g, constants, dual_diameter: None })
    }

    pub fn with_dual_diameter(mut self, d: f64) -> Self {
        self.dual_diameter = Some(d);
        self
    }

    pub fn dims(&self) -> (usize, usize) {
        self.coupling.dims()
    }

    /// Borrowing view with the same terms.
    pub fn as_ref(&self) -> ProblemSpec<&C> {
        ProblemSpec {
            coupling: &self.coupling,
            prox_f: self.prox_f.clone(),
            prox_g: self.prox_g.clone(),
            constants: self.constants,
            dual_diameter: self.dual_diameter,
        }
    }

    /// Same problem with every oracle replaced by its exact gradient.
    pub fn exact(&self) -> ProblemSpec<Exact<&C>> {
        ProblemSpec {
            coupling: Exact(&self.coupling),
            prox_f: self.prox_f.clone(),
            prox_g: self.prox_g.clone(),
            constants: ProblemConstants { noise: NoiseLevels::ZERO, ..self.constants },
            dual_diameter: self.dual_diameter,
        }
    }

    /// `L(x, y)` when `Phi` exposes its value.
    pub fn objective(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(self.prox_f.value(x) + self.coupling.value(x, y)? - self.prox_g.value(y))
    }
}

/// Builds the strongly convex subproblem
/// `min_x max_y f(x) + Phi(x, y) + ((mu_x + gamma)/2)||x - center||^2 - g(y)`.
pub fn shifted_subproblem<'a, C: Coupling>(
    p: &'a ProblemSpec<C>,
    center: &[f64],
    mu_x: f64,
) -> Result<ProblemSpec<Shifted<&'a C>>> {
    let (n, _) = p.dims();
    check_len(center.len(), n)?;
    if !(mu_x > 0.0 && mu_x.is_finite()) {
        return invalid("mu_x must be positive");
    }
    if !crate::linalg::all_finite(center) {
        return invalid("non-finite shift center");
    }
    let weight = mu_x + p.constants.convexity.gamma;
    let mut constants = p.constants;
    constants.smoothness.l_xx += weight;
    constants.mu_x = Some(mu_x);
    Ok(ProblemSpec {
        coupling: Shifted { base: &p.coupling, center: center.to_vec(), weight },
        prox_f: p.prox_f.clone(),
        prox_g: p.prox_g.clone(),
        constants,
        dual_diameter: p.dual_diameter,
    })
}

/// `Phi(x, y) + (weight/2)||x - center||^2`
#[derive(Debug, Clone)]
pub struct Shifted<C> {
    pub base: C,
    pub center: Vec<f64>,
    pub weight: f64,
}

impl<C> Shifted<C> {
    fn add_shift(&self, x: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] += self.weight * (x[i] - self.center[i]);
        }
    }
}

impl<C: Coupling> Coupling for Shifted<C> {
    fn dims(&self) -> (usize, usize) {
        self.base.dims()
    }
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.grad_x(x, y, out);
        self.add_shift(x, out);
    }
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.grad_y(x, y, out)
    }
    fn sample_grad_x(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.base.sample_grad_x(x, y, rng, out);
        self.add_shift(x, out);
    }
    fn sample_grad_y(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.base.sample_grad_y(x, y, rng, out)
    }
    fn samples_per_call(&self) -> u64 {
        self.base.samples_per_call()
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(self.base.value(x, y)? + 0.5 * self.weight * crate::linalg::dist_sq(x, &self.center))
    }
}

impl<C: FiniteSum> FiniteSum for Shifted<C> {
    fn n_components(&self) -> usize {
        self.base.n_components()
    }
    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.component_grad_x(i, x, y, out);
        self.add_shift(x, out);
    }
    fn component_grad_y(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.component_grad_y(i, x, y, out)
    }
    fn batch_grad_x(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.batch_grad_x(batch, x, y, out);
        self.add_shift(x, out);
    }
    fn batch_grad_y(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.batch_grad_y(batch, x, y, out)
    }
}

/// `Phi(x, y) - (mu/2)||y - anchor||^2`
#[derive(Debug, Clone)]
pub struct DualSmoothed<C> {
    pub base: C,
    pub anchor: Vec<f64>,
    pub mu: f64,
}

impl<C> DualSmoothed<C> {
    fn add_smoothing(&self, y: &[f64], out: &mut [f64]) {
        for i in 0..out.len() {
            out[i] -= self.mu * (y[i] - self.anchor[i]);
        }
    }
}

impl<C: Coupling> Coupling for DualSmoothed<C> {
    fn dims(&self) -> (usize, usize) {
        self.base.dims()
    }
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.grad_x(x, y, out)
    }
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.grad_y(x, y, out);
        self.add_smoothing(y, out);
    }
    fn sample_grad_x(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.base.sample_grad_x(x, y, rng, out)
    }
    fn sample_grad_y(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        self.base.sample_grad_y(x, y, rng, out);
        self.add_smoothing(y, out);
    }
    fn samples_per_call(&self) -> u64 {
        self.base.samples_per_call()
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(self.base.value(x, y)? - 0.5 * self.mu * crate::linalg::dist_sq(y, &self.anchor))
    }
}

impl<C: FiniteSum> FiniteSum for DualSmoothed<C> {
    fn n_components(&self) -> usize {
        self.base.n_components()
    }
    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.component_grad_x(i, x, y, out)
    }
    fn component_grad_y(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.component_grad_y(i, x, y, out);
        self.add_smoothing(y, out);
    }
    fn batch_grad_x(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.batch_grad_x(batch, x, y, out)
    }
    fn batch_grad_y(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.batch_grad_y(batch, x, y, out);
        self.add_smoothing(y, out);
    }
}

/// Forces the exact gradient in place of every stochastic oracle.
#[derive(Debug, Clone)]
pub struct Exact<C>(pub C);

impl<C: Coupling> Coupling for Exact<C> {
    fn dims(&self) -> (usize, usize) {
        self.0.dims()
    }
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.0.grad_x(x, y, out)
    }
    fn grad_y(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.0.grad_y(x, y, out)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        self.0.value(x, y)
    }
}

/// Stochastic oracle averaging `batch` uniformly drawn components of a finite sum.
#[derive(Debug, Clone)]
pub struct Minibatch<C> {
    pub base: C,
    pub batch: usize,
}

impl<C: FiniteSum> Minibatch<C> {
    pub fn new(base: C, batch: usize) -> Result<Self> {
        if batch == 0 {
            return invalid("batch size must be positive");
        }
        Ok(Minibatch { base, batch })
    }
}

impl<C: FiniteSum> Coupling for Minibatch<C> {
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
        let idx = sample_batch(self.base.n_components(), self.batch, rng);
        self.base.batch_grad_x(&idx, x, y, out)
    }
    fn sample_grad_y(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let idx = sample_batch(self.base.n_components(), self.batch, rng);
        self.base.batch_grad_y(&idx, x, y, out)
    }
    fn samples_per_call(&self) -> u64 {
        self.batch as u64
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        self.base.value(x, y)
    }
}

impl<C: FiniteSum> FiniteSum for Minibatch<C> {
    fn n_components(&self) -> usize {
        self.base.n_components()
    }
    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.component_grad_x(i, x, y, out)
    }
    fn component_grad_y(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.component_grad_y(i, x, y, out)
    }
    fn batch_grad_x(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.batch_grad_x(batch, x, y, out)
    }
    fn batch_grad_y(&self, batch: &[usize], x: &[f64], y: &[f64], out: &mut [f64]) {
        self.base.batch_grad_y(batch, x, y, out)
    }
}

/// Empirical noise levels: root mean squared deviation of `draws` oracle samples from the
/// exact gradient at `(x, y)`.
pub fn estimate_noise<C: Coupling>(
    c: &C,
    x: &[f64],
    y: &[f64],
    draws: usize,
    rng: &mut dyn RngCore,
) -> Result<NoiseLevels> {
    if draws == 0 {
        return invalid("need at least one draw");
    }
    let (n, m) = c.dims();
    check_len(x.len(), n)?;
    check_len(y.len(), m)?;
    let mut gx = vec![0.0; n];
    let mut gy = vec![0.0; m];
    c.grad_x(x, y, &mut gx);
    c.grad_y(x, y, &mut gy);
    let (mut sx, mut sy) = (0.0, 0.0);
    let mut bx = vec![0.0; n];
    let mut by = vec![0.0; m];
    for _ in 0..draws {
        c.sample_grad_x(x, y, rng, &mut bx);
        c.sample_grad_y(x, y, rng, &mut by);
        sx += crate::linalg::dist_sq(&bx, &gx);
        sy += crate::linalg::dist_sq(&by, &gy);
    }
    Ok(NoiseLevels { delta_x: (sx / draws as f64).sqrt(), delta_y: (sy / draws as f64).sqrt() })
}
