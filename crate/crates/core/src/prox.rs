//! Proximal operators for the separable nonsmooth terms `f` and `g`.

use crate::error::{check_len, invalid, Result};

/// A closed convex term together with its proximal map `argmin_u h(u) + ||u - v||^2 / (2 step)`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxKind {
    /// `h = 0`
    Zero,
    /// Indicator of the box `[lower, upper]` (coordinate-wise).
    Box { lower: Vec<f64>, upper: Vec<f64> },
    /// Indicator of the probability simplex.
    Simplex,
    /// `(eta2 / 2) ||n_scale y - 1||^2` plus the simplex indicator.
    QuadraticOverSimplex { eta2: f64, n_scale: usize },
    /// `(weight / 2) ||u - anchor||^2`
    ScaledSquaredDistance { weight: f64, anchor: Vec<f64> },
}

impl ProxKind {
    pub fn uniform_box(dim: usize, lower: f64, upper: f64) -> Self {
        ProxKind::Box { lower: vec![lower; dim], upper: vec![upper; dim] }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            ProxKind::Zero | ProxKind::Simplex => Ok(()),
            ProxKind::Box { lower, upper } => {
                check_len(lower.len(), dim)?;
                check_len(upper.len(), dim)?;
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return invalid("box lower bound exceeds upper bound");
                }
                Ok(())
            }
            ProxKind::QuadraticOverSimplex { eta2, n_scale } => {
                if !(*eta2 > 0.0 && eta2.is_finite()) || *n_scale == 0 {
                    return invalid("need eta2 > 0 and n_scale >= 1");
                }
                Ok(())
            }
            ProxKind::ScaledSquaredDistance { weight, anchor } => {
                check_len(anchor.len(), dim)?;
                if !(*weight >= 0.0) {
                    return invalid("weight must be nonnegative");
                }
                Ok(())
            }
        }
    }

    /// Writes `prox_{step h}(v)` into `out`.
    pub fn apply(&self, v: &[f64], step: f64, out: &mut [f64]) -> Result<()> {
        if !(step > 0.0) || !step.is_finite() {
            return invalid(format!("prox step must be positive and finite, got {step}"));
        }
        check_len(out.len(), v.len())?;
        match self {
            ProxKind::Zero => out.copy_from_slice(v),
            ProxKind::Box { lower, upper } => {
                check_len(lower.len(), v.len())?;
                for i in 0..v.len() {
                    out[i] = v[i].clamp(lower[i], upper[i]);
                }
            }
            ProxKind::Simplex => project_simplex_into(v, out)?,
            ProxKind::QuadraticOverSimplex { eta2, n_scale } => {
                prox_quadratic_over_simplex_into(v, step, *eta2, *n_scale, out)?
            }
            ProxKind::ScaledSquaredDistance { weight, anchor } => {
                check_len(anchor.len(), v.len())?;
                let d = 1.0 + step * weight;
                for i in 0..v.len() {
                    out[i] = (v[i] + step * weight * anchor[i]) / d;
                }
            }
        }
        Ok(())
    }

    pub fn prox(&self, v: &[f64], step: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; v.len()];
        self.apply(v, step, &mut out)?;
        Ok(out)
    }

    /// Value of the term at `u`; `+inf` outside its domain (with a small feasibility slack).
    pub fn value(&self, u: &[f64]) -> f64 {
        const SLACK: f64 = 1e-9;
        let on_simplex = |u: &[f64]| {
            u.iter().all(|&v| v >= -SLACK) && (u.iter().sum::<f64>() - 1.0).abs() <= SLACK * u.len().max(1) as f64
        };
        match self {
            ProxKind::Zero => 0.0,
            ProxKind::Box { lower, upper } => {
                let inside = u.iter().zip(lower.iter().zip(upper)).all(|(v, (l, h))| *v >= l - SLACK && *v <= h + SLACK);
                if inside { 0.0 } else { f64::INFINITY }
            }
            ProxKind::Simplex => {
                if on_simplex(u) { 0.0 } else { f64::INFINITY }
            }
            ProxKind::QuadraticOverSimplex { eta2, n_scale } => {
                if !on_simplex(u) {
                    return f64::INFINITY;
                }
                let n = *n_scale as f64;
                0.5 * eta2 * u.iter().map(|v| (n * v - 1.0).powi(2)).sum::<f64>()
            }
            ProxKind::ScaledSquaredDistance { weight, anchor } => 0.5 * weight * crate::linalg::dist_sq(u, anchor),
        }
    }
}

/// Identity map: the proximal operator of the zero function.
pub fn prox_zero(v: &[f64], step: f64) -> Result<Vec<f64>> {
    ProxKind::Zero.prox(v, step)
}

/// Projection onto `[lower, upper]`; the step does not affect the result.
pub fn prox_box(v: &[f64], step: f64, lower: &[f64], upper: &[f64]) -> Result<Vec<f64>> {
    let b = ProxKind::Box { lower: lower.to_vec(), upper: upper.to_vec() };
    b.validate(v.len())?;
    b.prox(v, step)
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
pub fn project_simplex(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v.len()];
    project_simplex_into(v, &mut out)?;
    Ok(out)
}

fn project_simplex_into(v: &[f64], out: &mut [f64]) -> Result<()> {
    if v.is_empty() {
        return invalid("cannot project an empty vector onto the simplex");
    }
    if !crate::linalg::all_finite(v) {
        return invalid("non-finite entry in simplex projection input");
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cumsum += uj;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    for (o, &vi) in out.iter_mut().zip(v) {
        *o = (vi - tau).max(0.0);
    }
    Ok(())
}

/// Proximal map of `(eta2/2)||n_scale y - 1||^2 + indicator(simplex)` with step `step`.
pub fn prox_quadratic_over_simplex(v: &[f64], step: f64, eta2: f64, n_scale: usize) -> Result<Vec<f64>> {
    let mut out = vec![0.0; v.len()];
    prox_quadratic_over_simplex_into(v, step, eta2, n_scale, &mut out)?;
    Ok(out)
}

fn prox_quadratic_over_simplex_into(v: &[f64], step: f64, eta2: f64, n_scale: usize, out: &mut [f64]) -> Result<()> {
    if !(step > 0.0) {
        return invalid("prox step must be positive");
    }
    if !(eta2 >= 0.0) {
        return invalid("eta2 must be nonnegative");
    }
    let n = n_scale as f64;
    // Completing the square: the objective is a positive multiple of ||y - c||^2 on the simplex.
    let denom = eta2 * n * n + 1.0 / step;
    let c: Vec<f64> = v.iter().map(|vi| (vi / step + eta2 * n) / denom).collect();
    project_simplex_into(&c, out)
}
