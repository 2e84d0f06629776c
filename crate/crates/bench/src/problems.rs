//! Problem instances built from a [`RunConfig`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sapd_core::datasets::{
    build_dro, load_libsvm, make_quadratic_finite_sum, make_quadratic_saddle, synthetic_logistic, DroInstance,
    QuadraticFiniteSum, QuadraticSaddle,
};
use sapd_core::problem::{estimate_noise, Minibatch, NoiseLevels, ProblemConstants, ProblemSpec, SmoothnessConstants};
use sapd_core::prox::ProxKind;
use sapd_core::{Result, SolverError};

use crate::config::{ProblemKind, RunConfig};

/// Draws used to estimate the gradient noise of sampled oracles.
pub const NOISE_DRAWS: usize = 1000;

#[derive(Debug, Clone)]
pub enum Instance {
    Quadratic(QuadraticSaddle),
    FiniteSum(QuadraticFiniteSum),
    Dro(DroInstance),
    /// Constants without oracles; only schedules can be computed.
    Constants(ProblemConstants),
}

/// An instance together with its start point and the constants handed to the schedules.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub instance: Instance,
    pub x0: Vec<f64>,
    pub y0: Vec<f64>,
    /// Constants of the minibatch oracle used by SAPD+ and the baseline.
    pub mean_constants: ProblemConstants,
    /// Per-component constants with single-sample noise, used by the variance-reduced schedule.
    pub component_constants: Option<ProblemConstants>,
    pub gap0: f64,
}

fn config_err(msg: impl Into<String>) -> SolverError {
    SolverError::Config(msg.into())
}

impl Instance {
    pub fn build(cfg: &RunConfig, rng: &mut ChaCha8Rng) -> Result<Instance> {
        Ok(match cfg.problem {
            ProblemKind::Quadratic => {
                let q = make_quadratic_saddle(cfg.n, cfg.m, cfg.gamma, cfg.mu_y, cfg.coupling, rng)?;
                let noise = NoiseLevels { delta_x: cfg.delta_x.unwrap_or(0.0), delta_y: cfg.delta_y.unwrap_or(0.0) };
                Instance::Quadratic(q.with_noise(noise))
            }
            ProblemKind::FiniteSum => {
                let q = make_quadratic_saddle(cfg.n, cfg.m, cfg.gamma, cfg.mu_y, cfg.coupling, rng)?;
                Instance::FiniteSum(make_quadratic_finite_sum(q, cfg.components, cfg.spread, rng)?)
            }
            ProblemKind::Dro => {
                let ds = match &cfg.data {
                    Some(path) => load_libsvm(path),
                    None => synthetic_logistic(cfg.samples, cfg.features, rng),
                }
                .map_err(|e| config_err(format!("dataset: {e}")))?;
                let dro = build_dro(ds, cfg.dro_alpha, cfg.dro_eta1, cfg.dro_eta2).map_err(|e| config_err(format!("dataset: {e}")))?;
                Instance::Dro(dro)
            }
            ProblemKind::Constants => {
                let s = SmoothnessConstants::new(cfg.l_xx, cfg.l_xy, cfg.l_yx, cfg.l_yy)?;
                let noise = NoiseLevels { delta_x: cfg.delta_x.unwrap_or(0.0), delta_y: cfg.delta_y.unwrap_or(0.0) };
                Instance::Constants(ProblemConstants::new(s, cfg.gamma, cfg.mu_y, noise)?)
            }
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        use sapd_core::Coupling;
        match self {
            Instance::Quadratic(q) => q.dims(),
            Instance::FiniteSum(f) => f.dims(),
            Instance::Dro(d) => d.dims(),
            Instance::Constants(_) => (0, 0),
        }
    }

    /// Number of components; 1 for the pure stochastic quadratic.
    pub fn n_samples(&self) -> usize {
        use sapd_core::FiniteSum;
        match self {
            Instance::Quadratic(_) | Instance::Constants(_) => 1,
            Instance::FiniteSum(f) => f.n_components(),
            Instance::Dro(d) => d.n_samples(),
        }
    }

    /// Primal objective reported in the trace: `phi(x)` in closed form for quadratics and the
    /// empirical robust loss for DRO.
    pub fn objective(&self, x: &[f64]) -> f64 {
        match self {
            Instance::Quadratic(q) => q.primal_value(x),
            Instance::FiniteSum(f) => f.base().primal_value(x),
            Instance::Dro(d) => d.robust_loss(x),
            Instance::Constants(_) => f64::NAN,
        }
    }

    fn base_constants(&self) -> (ProblemConstants, Option<ProblemConstants>) {
        match self {
            Instance::Quadratic(q) => (q.constants(), None),
            Instance::FiniteSum(f) => (f.base().constants(), Some(f.constants())),
            Instance::Dro(d) => (d.constants, Some(d.component_constants)),
            Instance::Constants(c) => (*c, Some(*c)),
        }
    }
}

/// Builds the instance, its start point and the noise-aware constants. Everything here is driven
/// by `instance_seed`, so all repetitions share one instance and one start.
pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    if cfg.batch == 0 {
        return Err(config_err("batch must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.instance_seed);
    let instance = Instance::build(cfg, &mut rng)?;
    let (n, m) = instance.dims();
    let x0: Vec<f64> = (0..n).map(|_| cfg.x0_scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let y0 = match &instance {
        Instance::Dro(_) => vec![1.0 / m as f64; m],
        _ => vec![0.0; m],
    };

    let (mut mean, mut component) = instance.base_constants();
    let explicit = |est: NoiseLevels| NoiseLevels {
        delta_x: cfg.delta_x.unwrap_or(est.delta_x),
        delta_y: cfg.delta_y.unwrap_or(est.delta_y),
    };
    match &instance {
        Instance::Constants(_) => {}
        Instance::Quadratic(_) => {
            if cfg.batch != 1 {
                return Err(config_err("batch applies to finite sums only"));
            }
            mean.noise = explicit(NoiseLevels::ZERO);
        }
        Instance::FiniteSum(f) => {
            mean.noise = explicit(estimate_noise(&Minibatch::new(f, cfg.batch)?, &x0, &y0, NOISE_DRAWS, &mut rng)?);
            if let Some(c) = component.as_mut() {
                c.noise = explicit(estimate_noise(&Minibatch::new(f, 1)?, &x0, &y0, NOISE_DRAWS, &mut rng)?);
            }
        }
        Instance::Dro(d) => {
            mean.noise = explicit(estimate_noise(&Minibatch::new(d, cfg.batch)?, &x0, &y0, NOISE_DRAWS, &mut rng)?);
            if let Some(c) = component.as_mut() {
                c.noise = explicit(estimate_noise(&Minibatch::new(d, 1)?, &x0, &y0, NOISE_DRAWS, &mut rng)?);
            }
        }
    }

    let gap0 = match (cfg.gap0, &instance) {
        (Some(g), _) => g,
        (None, Instance::Quadratic(q)) => q.initial_gap_estimate(&x0, &y0)?,
        (None, Instance::FiniteSum(f)) => f.base().initial_gap_estimate(&x0, &y0)?,
        (None, Instance::Dro(_) | Instance::Constants(_)) => 1.0,
    };
    Ok(Prepared { instance, x0, y0, mean_constants: mean, component_constants: component, gap0 })
}

/// Minibatch spec for the non-variance-reduced methods.
pub fn minibatch_spec<C: sapd_core::FiniteSum>(
    base: C,
    batch: usize,
    prox_g: ProxKind,
    constants: ProblemConstants,
    dual_diameter: Option<f64>,
) -> Result<ProblemSpec<Minibatch<C>>> {
    let mut p = ProblemSpec::new(Minibatch::new(base, batch)?, ProxKind::Zero, prox_g, constants)?;
    p.dual_diameter = dual_diameter;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_start_and_gap() {
        let cfg = RunConfig { n: 6, m: 3, ..RunConfig::default() };
        let a = prepare(&cfg).unwrap();
        let b = prepare(&cfg).unwrap();
        assert_eq!(a.x0, b.x0);
        assert_eq!(a.y0, vec![0.0; 3]);
        assert!(a.gap0 > 0.0);
        assert_eq!(a.mean_constants.noise, NoiseLevels::ZERO);
        assert!(a.component_constants.is_none());
    }

    #[test]
    fn finite_sum_noise_is_estimated_and_shrinks_with_batch() {
        let base = RunConfig { problem: ProblemKind::FiniteSum, n: 5, m: 3, components: 40, ..RunConfig::default() };
        let one = prepare(&base).unwrap();
        let ten = prepare(&RunConfig { batch: 10, ..base.clone() }).unwrap();
        assert!(one.mean_constants.noise.delta_x > 0.0);
        assert!(ten.mean_constants.noise.delta_x < one.mean_constants.noise.delta_x);
        let fixed = prepare(&RunConfig { delta_x: Some(0.25), ..base }).unwrap();
        assert_eq!(fixed.mean_constants.noise.delta_x, 0.25);
        assert_eq!(fixed.component_constants.unwrap().noise.delta_x, 0.25);
    }

    #[test]
    fn dro_starts_uniform_in_the_simplex() {
        let cfg = RunConfig { problem: ProblemKind::Dro, samples: 50, features: 4, ..RunConfig::default() };
        let p = prepare(&cfg).unwrap();
        assert_eq!(p.y0.len(), 50);
        assert!((p.y0.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(p.instance.n_samples(), 50);
        assert_eq!(p.gap0, 1.0);
    }

    #[test]
    fn bare_constants_keep_their_noise() {
        let cfg = RunConfig { problem: ProblemKind::Constants, delta_x: Some(1.0), ..RunConfig::default() };
        let p = prepare(&cfg).unwrap();
        assert_eq!(p.mean_constants.smoothness.l_yy, 1.0);
        assert_eq!(p.mean_constants.noise, NoiseLevels { delta_x: 1.0, delta_y: 0.0 });
        assert!(p.x0.is_empty());
    }

    #[test]
    fn quadratic_rejects_batches() {
        let cfg = RunConfig { batch: 4, ..RunConfig::default() };
        assert!(matches!(prepare(&cfg), Err(SolverError::Config(_))));
    }
}
