//! Numerical checks of spectral facts behind the method, on the synthetic
//! model `mu_j = j^{-b}` with the cosine basis `phi_j(x) = sqrt(2) cos(j pi x)`
//! on `[0, 1]` (orthonormal, uniformly bounded by `sqrt(2)`).
//!
//! Unknown constants are never asserted against; the checks report ratios.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::kernel::{effective_dimension, SpectralModel};
use crate::{Error, Result};

/// `sum mu/(mu + rho)^2` against `T(rho) / rho`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceBound {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs / rhs`, 0 when both vanish.
    pub ratio: f64,
}

impl TraceBound {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

pub fn check_trace_bound(model: &SpectralModel, rho: f64) -> Result<TraceBound> {
    let ed = effective_dimension(model, rho)?;
    let lhs: f64 = model
        .eigenvalues()
        .iter()
        .rev()
        .map(|&mu| mu / ((mu + rho) * (mu + rho)))
        .sum();
    let rhs = ed.value / rho;
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(TraceBound { lhs, rhs, ratio })
}

/// `f = sum_j sqrt(mu_j) theta_j phi_j`, stored by its RKHS coefficients so
/// that `|f|_H^2 = sum theta_j^2` and `|f|^2 = sum mu_j theta_j^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenExpansion {
    coefficients: Vec<f64>,
    model: SpectralModel,
}

impl EigenExpansion {
    pub fn new(coefficients: Vec<f64>, model: SpectralModel) -> Result<Self> {
        if coefficients.len() > model.truncation() {
            return Err(Error::Shape(format!(
                "{} coefficients for a model truncated at {}",
                coefficients.len(),
                model.truncation()
            )));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::domain("coefficients must be finite"));
        }
        Ok(Self { coefficients, model })
    }

    /// Expansion with `<f, phi_j> = l2[j]`.
    pub fn from_l2_coefficients(l2: &[f64], model: SpectralModel) -> Result<Self> {
        let theta = l2
            .iter()
            .zip(model.eigenvalues())
            .map(|(c, mu)| c / mu.sqrt())
            .collect();
        Self::new(theta, model)
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn model(&self) -> &SpectralModel {
        &self.model
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            coefficients: self.coefficients.iter().map(|c| c * s).collect(),
            model: self.model.clone(),
        }
    }

    pub fn rkhs_norm(&self) -> f64 {
        self.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coefficients
            .iter()
            .zip(self.model.eigenvalues())
            .map(|(c, mu)| mu * c * c)
            .sum::<f64>()
            .sqrt()
    }

    pub fn eval(&self, x: f64) -> f64 {
        let s2 = std::f64::consts::SQRT_2;
        self.coefficients
            .iter()
            .zip(self.model.eigenvalues())
            .enumerate()
            .map(|(j, (c, mu))| {
                let freq = (j + 1) as f64 * std::f64::consts::PI;
                mu.sqrt() * c * s2 * (freq * x).cos()
            })
            .sum()
    }
}

/// Expansion whose first `terms` RKHS coefficients are standard normal draws.
pub fn random_expansion(model: &SpectralModel, terms: usize, seed: u64) -> Result<EigenExpansion> {
    let mut rng = crate::seed::rng(seed);
    let theta = (0..terms.min(model.truncation()))
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    EigenExpansion::new(theta, model.clone())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationCheck {
    /// Largest `|f|` over the grid.
    pub sup_norm: f64,
    /// `|f|_H^{1/b} |f|^{1 - 1/b}`.
    pub bound: f64,
    /// `sup_norm / bound`; 0 for the zero function.
    pub ratio: f64,
}

/// Compare the grid sup-norm of `f` with `|f|_H^{1/b} |f|^{1-1/b}`.
pub fn check_interpolation_inequality(f: &EigenExpansion, grid: &[f64]) -> InterpolationCheck {
    let sup_norm = grid.iter().fold(0.0f64, |m, &x| m.max(f.eval(x).abs()));
    let inv_b = 1.0 / f.model.decay();
    let bound = f.rkhs_norm().powf(inv_b) * f.l2_norm().powf(1.0 - inv_b);
    let ratio = if bound > 0.0 { sup_norm / bound } else { 0.0 };
    InterpolationCheck {
        sup_norm,
        bound,
        ratio,
    }
}

fn check_inputs(n: usize, rho: f64) -> Result<()> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::domain(format!("rho must be positive, got {rho}")));
    }
    Ok(())
}

/// `sqrt(T(rho) / (n rho^{1/b}))`, the sup-norm variance driver of one local
/// KRR fit with the constant set to 1.
pub fn variance_proxy(model: &SpectralModel, n: usize, rho: f64) -> Result<f64> {
    check_inputs(n, rho)?;
    let ed = effective_dimension(model, rho)?;
    Ok((ed.value / (n as f64 * rho.powf(1.0 / model.decay()))).sqrt())
}

/// The proxy after `T(rho) <= rho^{-1/b}`: `1 / (rho^{1/b} sqrt(n))`.
pub fn variance_proxy_simplified(decay: f64, n: usize, rho: f64) -> Result<f64> {
    check_inputs(n, rho)?;
    Ok(1.0 / (rho.powf(1.0 / decay) * (n as f64).sqrt()))
}

/// Uniform grid of `size` points on `[0, 1]`.
pub fn dense_grid(size: usize) -> Vec<f64> {
    crate::simulation::unit_grid(size)
}
