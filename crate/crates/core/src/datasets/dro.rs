//! Distributionally robust logistic regression over the probability simplex:
//! `min_x max_{y in simplex} (1/n) sum_i y_i l_i(x) + r(x) - (eta2/2)||n y - 1||^2`
//! with `l_i(x) = log(1 + exp(-b_i a_i'x))` and the nonconvex regularizer
//! `r(x) = eta1 sum_j alpha x_j^2 / (1 + alpha x_j^2)` folded into the coupling.

use rand::{Rng, RngCore};

use crate::datasets::libsvm::{DatasetError, SparseDataset};
use crate::error::Result;
use crate::problem::{
    ConvexityModuli, Coupling, FiniteSum, NoiseLevels, ProblemConstants, ProblemSpec, SmoothnessConstants,
};
use crate::prox::ProxKind;

pub const DEFAULT_ALPHA: f64 = 10.0;
pub const DEFAULT_ETA1: f64 = 1e-3;

/// Number of dual prox-gradient steps used by [`DroInstance::robust_loss`].
pub const ROBUST_LOSS_STEPS: usize = 50;

#[derive(Debug, Clone)]
pub struct DroInstance {
    ds: SparseDataset,
    pub alpha: f64,
    pub eta1: f64,
    pub eta2: f64,
    /// Bounds for the full coupling.
    pub constants: ProblemConstants,
    /// Almost-sure bounds for single components.
    pub component_constants: ProblemConstants,
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Builds the instance; `eta2 = None` selects `1/n^2`.
pub fn build_dro(ds: SparseDataset, alpha: f64, eta1: f64, eta2: Option<f64>) -> std::result::Result<DroInstance, DatasetError> {
    let n = ds.n_samples();
    if n == 0 {
        return Err(DatasetError::Empty);
    }
    if ds.n_features == 0 {
        return Err(DatasetError::NoFeatures);
    }
    let eta2 = eta2.unwrap_or(1.0 / (n as f64 * n as f64));
    let nf = n as f64;
    let max_sq = (0..n).map(|i| ds.row_norm_sq(i)).fold(0.0, f64::max);
    let sum_sq: f64 = (0..n).map(|i| ds.row_norm_sq(i)).sum();
    let reg = 2.0 * eta1 * alpha;
    let convexity = ConvexityModuli { gamma: reg.max(f64::MIN_POSITIVE), mu_y: eta2 * nf * nf };
    let l_full = (sum_sq.sqrt() / nf).max(f64::MIN_POSITIVE);
    let l_comp = max_sq.sqrt().max(f64::MIN_POSITIVE);
    let constants = ProblemConstants {
        smoothness: SmoothnessConstants { l_xx: max_sq / (4.0 * nf) + reg, l_xy: l_full, l_yx: l_full, l_yy: 0.0 },
        convexity,
        noise: NoiseLevels::ZERO,
        mu_x: None,
    };
    let component_constants = ProblemConstants {
        smoothness: SmoothnessConstants { l_xx: max_sq / 4.0 + reg, l_xy: l_comp, l_yx: l_comp, l_yy: 0.0 },
        ..constants
    };
    Ok(DroInstance { ds, alpha, eta1, eta2, constants, component_constants })
}

impl DroInstance {
    pub fn dataset(&self) -> &SparseDataset {
        &self.ds
    }

    pub fn n_samples(&self) -> usize {
        self.ds.n_samples()
    }

    pub fn n_features(&self) -> usize {
        self.ds.n_features
    }

    pub fn prox_g(&self) -> ProxKind {
        ProxKind::QuadraticOverSimplex { eta2: self.eta2, n_scale: self.n_samples() }
    }

    /// Problem with full-coupling constants.
    pub fn spec(&self) -> Result<ProblemSpec<&DroInstance>> {
        Ok(ProblemSpec::new(self, ProxKind::Zero, self.prox_g(), self.constants)?.with_dual_diameter(2f64.sqrt()))
    }

    /// Problem carrying the per-component constants (for the variance-reduced schedule).
    pub fn component_spec(&self) -> Result<ProblemSpec<&DroInstance>> {
        Ok(ProblemSpec::new(self, ProxKind::Zero, self.prox_g(), self.component_constants)?.with_dual_diameter(2f64.sqrt()))
    }

    pub fn loss(&self, i: usize, x: &[f64]) -> f64 {
        softplus(-self.ds.labels[i] * self.ds.row_dot(i, x))
    }

    pub fn regularizer(&self, x: &[f64]) -> f64 {
        self.eta1 * x.iter().map(|v| self.alpha * v * v / (1.0 + self.alpha * v * v)).sum::<f64>()
    }

    fn add_regularizer_grad(&self, x: &[f64], out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            let d = 1.0 + self.alpha * v * v;
            *o += 2.0 * self.eta1 * self.alpha * v / (d * d);
        }
    }

    /// `out += w * grad l_i(x)`
    fn add_loss_grad(&self, i: usize, x: &[f64], w: f64, out: &mut [f64]) {
        let b = self.ds.labels[i];
        let s = -b * sigmoid(-b * self.ds.row_dot(i, x)) * w;
        for &(j, v) in &self.ds.rows[i] {
            out[j] += s * v;
        }
    }

    /// `max_y L(x, y)` approximated by [`ROBUST_LOSS_STEPS`] dual prox-gradient steps from the
    /// uniform distribution with step `1/mu_y`.
    pub fn robust_loss(&self, x: &[f64]) -> f64 {
        let n = self.n_samples();
        let step = 1.0 / self.constants.convexity.mu_y;
        let prox = self.prox_g();
        let losses: Vec<f64> = (0..n).map(|i| self.loss(i, x) / n as f64).collect();
        let mut y = vec![1.0 / n as f64; n];
        let mut v = vec![0.0; n];
        for _ in 0..ROBUST_LOSS_STEPS {
            for i in 0..n {
                v[i] = y[i] + step * losses[i];
            }
            prox.apply(&v, step, &mut y).expect("valid dual prox");
        }
        let phi: f64 = losses.iter().zip(&y).map(|(l, w)| l * w).sum::<f64>() + self.regularizer(x);
        phi - prox.value(&y)
    }

    /// Lipschitz constants estimated from `samples` random point pairs, with `x` in the unit ball
    /// scaled by `radius` and `y` uniform on the simplex. The estimates are lower bounds on the
    /// true constants and are meant for tuning, not for certificates.
    pub fn sampled_constants(&self, samples: usize, radius: f64, rng: &mut dyn RngCore) -> ProblemConstants {
        let (d, n) = self.dims();
        let rand_x = |rng: &mut dyn RngCore| -> Vec<f64> { (0..d).map(|_| radius * (2.0 * rng.gen::<f64>() - 1.0)).collect() };
        let rand_y = |rng: &mut dyn RngCore| -> Vec<f64> {
            let e: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
            let s: f64 = e.iter().sum();
            e.into_iter().map(|v| v / s).collect()
        };
        let (mut lxx, mut lxy, mut lyx) = (0.0f64, 0.0f64, 0.0f64);
        let mut g1 = vec![0.0; d];
        let mut g2 = vec![0.0; d];
        let mut h1 = vec![0.0; n];
        let mut h2 = vec![0.0; n];
        for _ in 0..samples {
            let (x1, x2, y1, y2) = (rand_x(rng), rand_x(rng), rand_y(rng), rand_y(rng));
            let dx = crate::linalg::dist(&x1, &x2);
            let dy = crate::linalg::dist(&y1, &y2);
            self.grad_x(&x1, &y1, &mut g1);
            self.grad_x(&x2, &y1, &mut g2);
            lxx = lxx.max(crate::linalg::dist(&g1, &g2) / dx);
            self.grad_x(&x1, &y2, &mut g2);
            lxy = lxy.max(crate::linalg::dist(&g1, &g2) / dy);
            self.grad_y(&x1, &y1, &mut h1);
            self.grad_y(&x2, &y1, &mut h2);
            lyx = lyx.max(crate::linalg::dist(&h1, &h2) / dx);
        }
        let mut c = self.constants;
        c.smoothness.l_xx = lxx.max(c.convexity.gamma);
        c.smoothness.l_xy = lxy.max(f64::MIN_POSITIVE);
        c.smoothness.l_yx = lyx.max(f64::MIN_POSITIVE);
        c
    }
}

impl Coupling for DroInstance {
    fn dims(&self) -> (usize, usize) {
        (self.ds.n_features, self.ds.n_samples())
    }
    fn grad_x(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let inv = 1.0 / self.n_samples() as f64;
        for i in 0..self.n_samples() {
            if y[i] != 0.0 {
                self.add_loss_grad(i, x, y[i] * inv, out);
            }
        }
        self.add_regularizer_grad(x, out);
    }
    fn grad_y(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        let inv = 1.0 / self.n_samples() as f64;
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.loss(i, x) * inv;
        }
    }
    fn sample_grad_x(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let i = rng.gen_range(0..self.n_samples());
        self.component_grad_x(i, x, y, out)
    }
    fn sample_grad_y(&self, x: &[f64], y: &[f64], rng: &mut dyn RngCore, out: &mut [f64]) {
        let i = rng.gen_range(0..self.n_samples());
        self.component_grad_y(i, x, y, out)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        let inv = 1.0 / self.n_samples() as f64;
        let s: f64 = (0..self.n_samples()).map(|i| y[i] * self.loss(i, x)).sum();
        Some(s * inv + self.regularizer(x))
    }
}

impl FiniteSum for DroInstance {
    fn n_components(&self) -> usize {
        self.n_samples()
    }
    /// `grad_x [y_i l_i(x) + r(x)]`
    fn component_grad_x(&self, i: usize, x: &[f64], y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        self.add_loss_grad(i, x, y[i], out);
        self.add_regularizer_grad(x, out);
    }
    /// `l_i(x) e_i`
    fn component_grad_y(&self, i: usize, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        out[i] = self.loss(i, x);
    }
    fn batch_grad_y(&self, batch: &[usize], x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &i in batch {
            out[i] += 1.0;
        }
        let inv = 1.0 / batch.len() as f64;
        for (i, o) in out.iter_mut().enumerate() {
            if *o != 0.0 {
                *o *= self.loss(i, x) * inv;
            }
        }
    }
}
