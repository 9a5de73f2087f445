//! Matérn kernels with half-integer smoothness, Gram matrices and a pinned
//! polynomial-decay spectral model.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Points, Result};

/// Smoothness index of the Matérn family. Only the closed-form half-integer
/// cases are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
    SevenHalves,
}

impl Smoothness {
    pub fn value(self) -> f64 {
        match self {
            Smoothness::Half => 0.5,
            Smoothness::ThreeHalves => 1.5,
            Smoothness::FiveHalves => 2.5,
            Smoothness::SevenHalves => 3.5,
        }
    }
}

impl TryFrom<f64> for Smoothness {
    type Error = Error;

    fn try_from(nu: f64) -> Result<Self> {
        match nu {
            v if v == 0.5 => Ok(Smoothness::Half),
            v if v == 1.5 => Ok(Smoothness::ThreeHalves),
            v if v == 2.5 => Ok(Smoothness::FiveHalves),
            v if v == 3.5 => Ok(Smoothness::SevenHalves),
            _ => Err(Error::domain(format!(
                "matern smoothness must be one of 0.5, 1.5, 2.5, 3.5; got {nu}"
            ))),
        }
    }
}

impl From<Smoothness> for f64 {
    fn from(s: Smoothness) -> f64 {
        s.value()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelFamily {
    #[default]
    Matern,
}

fn default_one() -> f64 {
    1.0
}

fn default_nu() -> Smoothness {
    Smoothness::SevenHalves
}

/// A Matérn kernel `output_scale * k_nu(|x - x'| / lengthscale)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub family: KernelFamily,
    #[serde(default = "default_nu")]
    pub nu: Smoothness,
    #[serde(default = "default_one")]
    pub lengthscale: f64,
    #[serde(default = "default_one")]
    pub output_scale: f64,
}

impl Default for KernelSpec {
    fn default() -> Self {
        Self {
            family: KernelFamily::Matern,
            nu: Smoothness::SevenHalves,
            lengthscale: 1.0,
            output_scale: 1.0,
        }
    }
}

impl KernelSpec {
    pub fn matern(nu: Smoothness, lengthscale: f64, output_scale: f64) -> Result<Self> {
        let spec = Self {
            family: KernelFamily::Matern,
            nu,
            lengthscale,
            output_scale,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lengthscale.is_finite() && self.lengthscale > 0.0) {
            return Err(Error::domain(format!(
                "lengthscale must be positive and finite, got {}",
                self.lengthscale
            )));
        }
        if !(self.output_scale.is_finite() && self.output_scale > 0.0) {
            return Err(Error::domain(format!(
                "output_scale must be positive and finite, got {}",
                self.output_scale
            )));
        }
        Ok(())
    }

    /// Eigenvalue decay exponent `b = 2 nu + d` of the kernel in dimension `d`.
    pub fn decay_exponent(&self, dim: usize) -> f64 {
        2.0 * self.nu.value() + dim as f64
    }

    /// Kernel value as a function of the distance `r >= 0`.
    pub fn at_distance(&self, r: f64) -> f64 {
        let s = r / self.lengthscale;
        let k = match self.nu {
            Smoothness::Half => (-s).exp(),
            Smoothness::ThreeHalves => {
                let u = 3f64.sqrt() * s;
                (1.0 + u) * (-u).exp()
            }
            Smoothness::FiveHalves => {
                let u = 5f64.sqrt() * s;
                (1.0 + u + u * u / 3.0) * (-u).exp()
            }
            Smoothness::SevenHalves => {
                let u = 7f64.sqrt() * s;
                (1.0 + u + 0.4 * u * u + u * u * u / 15.0) * (-u).exp()
            }
        };
        self.output_scale * k
    }

    /// Unchecked evaluation for points already known to be finite.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.at_distance(distance(x, y))
    }
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

/// Evaluate `k(x, x')`.
pub fn eval_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "points of dimension {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("kernel evaluated at a non-finite point"));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// The `n x n` Gram matrix. Only the upper triangle is evaluated, so the
/// result is exactly symmetric.
pub fn gram_matrix(spec: &KernelSpec, points: &Points) -> DMatrix<f64> {
    let n = points.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = spec.output_scale;
        for j in (i + 1)..n {
            let v = spec.eval_unchecked(points.row(i), points.row(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// Cross-kernel matrix with `a.len()` rows and `b.len()` columns.
pub fn cross_matrix(spec: &KernelSpec, a: &Points, b: &Points) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| {
        spec.eval_unchecked(a.row(i), b.row(j))
    })
}

/// Truncated spectral model with eigenvalues `mu_j = j^{-b}`, `j = 1..=J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralModel {
    decay: f64,
    eigenvalues: Vec<f64>,
}

impl SpectralModel {
    pub fn polynomial(decay: f64, truncation: usize) -> Result<Self> {
        if !(decay.is_finite() && decay > 1.0) {
            return Err(Error::domain(format!(
                "decay exponent must exceed 1, got {decay}"
            )));
        }
        if truncation == 0 {
            return Err(Error::domain("truncation must be at least 1"));
        }
        let eigenvalues = (1..=truncation).map(|j| (j as f64).powf(-decay)).collect();
        Ok(Self { decay, eigenvalues })
    }

    /// The model implied by a Matérn kernel in dimension `dim`.
    pub fn for_kernel(spec: &KernelSpec, dim: usize, truncation: usize) -> Result<Self> {
        Self::polynomial(spec.decay_exponent(dim), truncation)
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    pub fn truncation(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

/// Truncated effective dimension together with the size of its last term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveDimension {
    pub value: f64,
    /// `mu_J / (mu_J + rho)`; small when the truncation is adequate.
    pub tail: f64,
}

/// `sum_j mu_j / (mu_j + rho)` over the truncation.
pub fn effective_dimension(model: &SpectralModel, rho: f64) -> Result<EffectiveDimension> {
    if !(rho.is_finite() && rho > 0.0) {
        return Err(Error::domain(format!("rho must be positive, got {rho}")));
    }
    // smallest terms first
    let value = model
        .eigenvalues
        .iter()
        .rev()
        .map(|&mu| mu / (mu + rho))
        .sum();
    let last = *model.eigenvalues.last().expect("non-empty by construction");
    Ok(EffectiveDimension {
        value,
        tail: last / (last + rho),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn m72() -> KernelSpec {
        KernelSpec::default()
    }

    #[test]
    fn zero_distance_is_output_scale() {
        assert_eq!(eval_kernel(&m72(), &[0.3], &[0.3]).unwrap(), 1.0);
        let k = KernelSpec::matern(Smoothness::FiveHalves, 0.2, 2.5).unwrap();
        assert_eq!(eval_kernel(&k, &[0.1, 0.2], &[0.1, 0.2]).unwrap(), 2.5);
    }

    // Reference values from a 30-digit evaluation of the closed forms.
    #[test]
    fn closed_forms_match_reference() {
        let cases = [
            (Smoothness::SevenHalves, 1.0, 1.0, 0.544_942_447_112_874_8),
            (Smoothness::SevenHalves, 0.5, 0.3, 0.789_600_071_376_897_0),
            (Smoothness::FiveHalves, 1.0, 0.7, 0.706_942_681_904_097_7),
            (Smoothness::ThreeHalves, 2.0, 1.2, 0.721_330_423_751_500_4),
            (Smoothness::Half, 2.0, 2.0, 0.367_879_441_171_442_3),
        ];
        for (nu, ell, r, expected) in cases {
            let k = KernelSpec::matern(nu, ell, 1.0).unwrap();
            let v = eval_kernel(&k, &[0.0], &[r]).unwrap();
            assert_relative_eq!(v, expected, max_relative = 1e-14);
        }
    }

    #[test]
    fn rejects_bad_specs_and_points() {
        assert!(Smoothness::try_from(2.0).is_err());
        assert!(KernelSpec::matern(Smoothness::Half, 0.0, 1.0).is_err());
        assert!(KernelSpec::matern(Smoothness::Half, 1.0, -1.0).is_err());
        assert!(eval_kernel(&m72(), &[f64::NAN], &[0.0]).is_err());
        assert!(eval_kernel(&m72(), &[0.0], &[f64::INFINITY]).is_err());
    }

    #[test]
    fn gram_small_cases() {
        let k = KernelSpec::matern(Smoothness::SevenHalves, 1.0, 3.0).unwrap();
        let g = gram_matrix(&k, &Points::from_scalars(&[0.4]).unwrap());
        assert_eq!(g, DMatrix::from_element(1, 1, 3.0));

        let g = gram_matrix(&k, &Points::from_scalars(&[0.4, 0.4]).unwrap());
        assert_eq!(g, DMatrix::from_element(2, 2, 3.0));
        assert_eq!(g.rank(1e-12), 1);
    }

    #[test]
    fn gram_of_random_points_is_psd() {
        let xs = [0.12, 0.93, 0.47, 0.51, 0.08];
        let g = gram_matrix(&m72(), &Points::from_scalars(&xs).unwrap());
        let eig = g.symmetric_eigenvalues();
        assert!(eig.iter().all(|&e| e >= -1e-10), "{eig}");
    }

    #[test]
    fn effective_dimension_examples() {
        let one = SpectralModel::polynomial(2.0, 1).unwrap();
        assert_eq!(effective_dimension(&one, 1.0).unwrap().value, 0.5);
        let big = effective_dimension(&one, 1e8).unwrap().value;
        assert_relative_eq!(big, 1e-8, max_relative = 1e-7);
        assert!(effective_dimension(&one, 0.0).is_err());
        assert!(effective_dimension(&one, -1.0).is_err());
    }

    #[test]
    fn effective_dimension_truncation_against_long_sum() {
        let rho = 1e-4;
        let model = SpectralModel::polynomial(8.0, 10_000).unwrap();
        let ed = effective_dimension(&model, rho).unwrap();
        // brute-force oracle at J = 10^6
        let oracle: f64 = (1..=1_000_000u64)
            .rev()
            .map(|j| {
                let mu = (j as f64).powf(-8.0);
                mu / (mu + rho)
            })
            .sum();
        assert!(ed.tail < 1e-8);
        assert_relative_eq!(ed.value, oracle, max_relative = 1e-12);
        let ratio = ed.value * rho.powf(1.0 / 8.0);
        assert!((0.1..10.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn effective_dimension_scaling_law() {
        for b in [2.0, 4.0, 8.0] {
            let model = SpectralModel::polynomial(b, 200_000).unwrap();
            for e in 1..=6 {
                let rho = 10f64.powi(-e);
                let ed = effective_dimension(&model, rho).unwrap();
                let scaled = ed.value * rho.powf(1.0 / b);
                assert!((0.1..=10.0).contains(&scaled), "b={b} rho={rho}: {scaled}");
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(a in -5.0..5.0f64, b in -5.0..5.0f64, c in -5.0..5.0f64, d in -5.0..5.0f64,
                                 ell in 0.05..5.0f64, scale in 0.1..10.0f64, which in 0usize..4) {
            let nu = [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves, Smoothness::SevenHalves][which];
            let k = KernelSpec::matern(nu, ell, scale).unwrap();
            let v = eval_kernel(&k, &[a, b], &[c, d]).unwrap();
            prop_assert_eq!(v, eval_kernel(&k, &[c, d], &[a, b]).unwrap());
            prop_assert!(v > 0.0 && v <= scale);
        }

        #[test]
        fn decays_with_distance(r1 in 0.0..10.0f64, dr in 1e-6..5.0f64, which in 0usize..4) {
            let nu = [Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves, Smoothness::SevenHalves][which];
            let k = KernelSpec::matern(nu, 1.0, 1.0).unwrap();
            prop_assert!(k.at_distance(r1) >= k.at_distance(r1 + dr));
        }

        #[test]
        fn gram_psd(xs in prop::collection::vec(0.0..1.0f64, 1..50), ell in 0.1..2.0f64, scale in 0.5..4.0f64) {
            let k = KernelSpec::matern(Smoothness::SevenHalves, ell, scale).unwrap();
            let g = gram_matrix(&k, &Points::from_scalars(&xs).unwrap());
            let n = xs.len() as f64;
            let min = g.symmetric_eigenvalues().min();
            prop_assert!(min >= -1e-10 * n * scale, "min eigenvalue {}", min);
        }

        #[test]
        fn effective_dimension_monotone(e1 in -8.0..2.0f64, gap in 0.0..3.0f64, b in 1.5..10.0f64) {
            let model = SpectralModel::polynomial(b, 2_000).unwrap();
            let r1 = 10f64.powf(e1);
            let r2 = 10f64.powf(e1 + gap);
            prop_assert!(effective_dimension(&model, r1).unwrap().value >= effective_dimension(&model, r2).unwrap().value);
        }
    }
}
