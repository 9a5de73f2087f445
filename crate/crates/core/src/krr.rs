//! Kernel ridge regression on a single partition.
//!
//! The estimator maximizes `-(1/2n) sum (y_i - f(X_i))^2 - (rho/2) |f|_H^2`.
//! By the representer theorem `f = sum_i alpha_i k(., X_i)` with
//! `(K + n rho I) alpha = y`.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::kernel::{cross_matrix, gram_matrix, KernelSpec};
use crate::{Error, Points, PredictionSet, Result, Sample};

/// Number of times the jitter is multiplied by ten before giving up.
const JITTER_ESCALATIONS: usize = 3;

#[derive(Debug, Clone)]
pub struct KrrFit {
    kernel: KernelSpec,
    rho: f64,
    anchors: Points,
    weights: Vec<f64>,
    jitter: f64,
    residual: f64,
}

impl KrrFit {
    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn anchors(&self) -> &Points {
        &self.anchors
    }

    /// Dual weights `alpha`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Diagonal jitter that was needed for the factorization (0 if none).
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// `|(K + n rho I) alpha - y| / |y|` of the unjittered system (0 when `y = 0`).
    pub fn relative_residual(&self) -> f64 {
        self.residual
    }

    /// Evaluate the fitted function at a single point.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.anchors
            .rows()
            .zip(&self.weights)
            .map(|(a, w)| w * self.kernel.eval_unchecked(x, a))
            .sum()
    }
}

fn check_rho(rho: f64) -> Result<()> {
    if rho.is_finite() && rho > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("penalty rho must be positive, got {rho}")))
    }
}

/// Fit kernel ridge regression with penalty `rho`.
pub fn fit(sample: &Sample, kernel: &KernelSpec, rho: f64) -> Result<KrrFit> {
    check_rho(rho)?;
    kernel.validate()?;
    let n = sample.len();
    let gram = gram_matrix(kernel, &sample.x);
    let mut system = gram;
    let shift = n as f64 * rho;
    for i in 0..n {
        system[(i, i)] += shift;
    }
    let y = DVector::from_column_slice(&sample.y);

    let (chol, jitter) = factorize(&system)?;
    let mut alpha = chol.solve(&y);
    // one step of iterative refinement against the unjittered system
    let r = &y - &system * &alpha;
    alpha += chol.solve(&r);

    let y_norm = y.norm();
    let residual = if y_norm > 0.0 {
        (&system * &alpha - &y).norm() / y_norm
    } else {
        (&system * &alpha).norm()
    };

    Ok(KrrFit {
        kernel: *kernel,
        rho,
        anchors: sample.x.clone(),
        weights: alpha.as_slice().to_vec(),
        jitter,
        residual,
    })
}

fn factorize(system: &DMatrix<f64>) -> Result<(Cholesky<f64, nalgebra::Dyn>, f64)> {
    if let Some(c) = Cholesky::new(system.clone()) {
        return Ok((c, 0.0));
    }
    let n = system.nrows();
    let base = 1e-12 * system.trace() / n as f64;
    let mut attempted = Vec::with_capacity(JITTER_ESCALATIONS + 1);
    let mut jitter = base;
    for _ in 0..=JITTER_ESCALATIONS {
        attempted.push(jitter);
        let mut m = system.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(c) = Cholesky::new(m) {
            return Ok((c, jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::Factorization { attempted })
}

/// Evaluate the fit at every prediction point.
pub fn predict(fit: &KrrFit, points: &PredictionSet) -> Vec<f64> {
    let cross = cross_matrix(&fit.kernel, points, &fit.anchors);
    let alpha = DVector::from_column_slice(&fit.weights);
    (cross * alpha).as_slice().to_vec()
}

/// Penalty `c * N^{-b / (2 b r' + 1)}`.
pub fn penalty_schedule(n: usize, decay: f64, r_prime: f64, c: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::domain("sample size must be positive"));
    }
    if !(decay.is_finite() && decay > 1.0) {
        return Err(Error::domain(format!("decay exponent must exceed 1, got {decay}")));
    }
    if !(0.5..=1.0).contains(&r_prime) {
        return Err(Error::domain(format!("r' must lie in [1/2, 1], got {r_prime}")));
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::domain(format!("schedule constant must be positive, got {c}")));
    }
    Ok(c * (n as f64).powf(-decay / (2.0 * decay * r_prime + 1.0)))
}

/// Objective value `(1/2n) sum (y - f(X))^2 + (rho/2) alpha' K alpha`
/// for arbitrary dual weights.
pub fn objective(sample: &Sample, kernel: &KernelSpec, rho: f64, weights: &[f64]) -> f64 {
    let k = gram_matrix(kernel, &sample.x);
    let a = DVector::from_column_slice(weights);
    let fitted = &k * &a;
    let n = sample.len() as f64;
    let loss: f64 = sample
        .y
        .iter()
        .zip(fitted.iter())
        .map(|(y, f)| (y - f) * (y - f))
        .sum();
    loss / (2.0 * n) + 0.5 * rho * a.dot(&fitted)
}
