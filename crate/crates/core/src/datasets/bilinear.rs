//! Merely concave toy `Phi(x, y) = <x, y>` with `y` in the box `[-1, 1]^d`, so `phi(x) = ||x||_1`.

use crate::error::Result;
use crate::problem::{Coupling, ConvexityModuli, NoiseLevels, ProblemConstants, ProblemSpec, SmoothnessConstants};
use crate::prox::ProxKind;

#[derive(Debug, Clone, Copy)]
pub struct BilinearToy {
    pub dim: usize,
}

impl Coupling for BilinearToy {
    fn dims(&self) -> (usize, usize) {
        (self.dim, self.dim)
    }
    fn grad_x(&self, _x: &[f64], y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(y)
    }
    fn grad_y(&self, x: &[f64], _y: &[f64], out: &mut [f64]) {
        out.copy_from_slice(x)
    }
    fn value(&self, x: &[f64], y: &[f64]) -> Option<f64> {
        Some(crate::linalg::dot(x, y))
    }
}

impl BilinearToy {
    /// Problem with `f = 0`, `g` the box indicator, weak convexity `gamma` and `mu_y = 0`.
    pub fn spec(&self, gamma: f64) -> Result<ProblemSpec<BilinearToy>> {
        let constants = ProblemConstants {
            smoothness: SmoothnessConstants::new(0.0, 1.0, 1.0, 0.0)?,
            convexity: ConvexityModuli { gamma, mu_y: 0.0 },
            noise: NoiseLevels::ZERO,
            mu_x: None,
        };
        Ok(ProblemSpec::new(*self, ProxKind::Zero, ProxKind::uniform_box(self.dim, -1.0, 1.0), constants)?
            .with_dual_diameter(2.0 * (self.dim as f64).sqrt()))
    }

    /// `||grad phi_lambda(x)||` for `phi = ||.||_1`: the norm of `clip(x / lambda, -1, 1)`.
    pub fn moreau_grad_norm(x: &[f64], lambda: f64) -> f64 {
        x.iter().map(|v| (v / lambda).clamp(-1.0, 1.0).powi(2)).sum::<f64>().sqrt()
    }
}
