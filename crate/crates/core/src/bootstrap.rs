//! Bootstrap replicates of the averaged prediction vector.
//!
//! The empirical scheme resamples the `P` local prediction vectors with
//! replacement, exactly `P` times per replicate. The multiplier scheme
//! reweights them with i.i.d. weights of mean one and variance one. No
//! kernel is evaluated here: a replicate costs `O(P T)`.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::dnc::LocalPredictionMatrix;
use crate::{exec, seed, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MultiplierDist {
    /// Normal with mean 1 and variance 1.
    #[default]
    Gaussian,
    /// Poisson(1); nonnegative weights.
    Poisson,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Empirical,
    Multiplier,
}

/// `B x T` matrix of bootstrap deviations `f_bar^b - f_bar`.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapDraws {
    scheme: Scheme,
    replicates: usize,
    len: usize,
    deltas: Vec<f64>,
    seed: u64,
}

impl BootstrapDraws {
    /// Wrap an externally produced `B x T` matrix (row-major).
    pub fn from_deltas(scheme: Scheme, len: usize, deltas: Vec<f64>, seed: u64) -> Result<Self> {
        if len == 0 || deltas.is_empty() || deltas.len() % len != 0 {
            return Err(Error::Shape(format!(
                "{} deltas do not form rows of length {len}",
                deltas.len()
            )));
        }
        Ok(Self {
            scheme,
            replicates: deltas.len() / len,
            len,
            deltas,
            seed,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn replicates(&self) -> usize {
        self.replicates
    }

    /// Prediction set size `T`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.deltas.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn deltas(&self) -> &[f64] {
        &self.deltas
    }

    pub fn row(&self, b: usize) -> &[f64] {
        &self.deltas[b * self.len..(b + 1) * self.len]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.deltas.chunks_exact(self.len)
    }

    pub fn column(&self, t: usize) -> Vec<f64> {
        self.rows().map(|r| r[t]).collect()
    }
}

fn check_replicates(replicates: usize) -> Result<()> {
    if replicates == 0 {
        Err(Error::domain("need at least one bootstrap replicate"))
    } else {
        Ok(())
    }
}

fn collect(
    scheme: Scheme,
    len: usize,
    seed: u64,
    rows: Vec<Vec<f64>>,
) -> BootstrapDraws {
    BootstrapDraws {
        scheme,
        replicates: rows.len(),
        len,
        deltas: rows.concat(),
        seed,
    }
}

/// Empirical bootstrap: each replicate averages `P` rows drawn uniformly
/// with replacement. Replicate `b` uses stream `b` of `seed`.
pub fn empirical_draws(
    matrix: &LocalPredictionMatrix,
    replicates: usize,
    seed: u64,
) -> Result<BootstrapDraws> {
    check_replicates(replicates)?;
    let parts = matrix.parts();
    let len = matrix.len();
    let mean = matrix.mean();
    let rows = exec::map_indexed(replicates, |b| {
        let mut rng = seed::stream_rng(seed, b as u64);
        let mut acc = vec![0.0; len];
        for _ in 0..parts {
            let p = rng.random_range(0..parts);
            for (a, v) in acc.iter_mut().zip(matrix.row(p)) {
                *a += v;
            }
        }
        acc.iter()
            .zip(mean)
            .map(|(a, m)| a / parts as f64 - m)
            .collect::<Vec<_>>()
    });
    Ok(collect(Scheme::Empirical, len, seed, rows))
}

fn draw_weights(dist: MultiplierDist, parts: usize, rng: &mut impl Rng) -> Vec<f64> {
    match dist {
        MultiplierDist::Gaussian => {
            let n = Normal::new(1.0, 1.0).expect("valid parameters");
            (0..parts).map(|_| n.sample(rng)).collect()
        }
        MultiplierDist::Poisson => {
            let p = Poisson::new(1.0).expect("valid parameters");
            (0..parts).map(|_| p.sample(rng)).collect()
        }
    }
}

/// Multiplier bootstrap applied to the centred local estimators:
/// `delta = P^{-1} sum_p (w_p - 1) (f_p - f_bar)`.
///
/// Conditionally on the data this has mean zero and the same covariance as
/// the empirical scheme, `P^{-2} sum_p (f_p - f_bar)(f_p - f_bar)'`.
pub fn multiplier_draws(
    matrix: &LocalPredictionMatrix,
    replicates: usize,
    seed: u64,
    dist: MultiplierDist,
) -> Result<BootstrapDraws> {
    check_replicates(replicates)?;
    let parts = matrix.parts();
    let len = matrix.len();
    let mean = matrix.mean();
    let rows = exec::map_indexed(replicates, |b| {
        let mut rng = seed::stream_rng(seed, b as u64);
        let w = draw_weights(dist, parts, &mut rng);
        let mut acc = vec![0.0; len];
        for (p, wp) in w.iter().enumerate() {
            for ((a, v), m) in acc.iter_mut().zip(matrix.row(p)).zip(mean) {
                *a += (wp - 1.0) * (v - m);
            }
        }
        acc.iter().map(|a| a / parts as f64).collect::<Vec<_>>()
    });
    Ok(collect(Scheme::Multiplier, len, seed, rows))
}

/// Multiplier bootstrap on the raw local estimators:
/// `delta = P^{-1} sum_p w_p f_p - f_bar`.
///
/// Its conditional covariance is `P^{-2} sum_p f_p f_p'`, which agrees with
/// the empirical scheme only when the columns of the matrix are centred.
pub fn multiplier_draws_uncentered(
    matrix: &LocalPredictionMatrix,
    replicates: usize,
    seed: u64,
    dist: MultiplierDist,
) -> Result<BootstrapDraws> {
    check_replicates(replicates)?;
    let parts = matrix.parts();
    let len = matrix.len();
    let mean = matrix.mean();
    let rows = exec::map_indexed(replicates, |b| {
        let mut rng = seed::stream_rng(seed, b as u64);
        let w = draw_weights(dist, parts, &mut rng);
        let mut acc = vec![0.0; len];
        for (p, wp) in w.iter().enumerate() {
            for (a, v) in acc.iter_mut().zip(matrix.row(p)) {
                *a += wp * v;
            }
        }
        acc.iter()
            .zip(mean)
            .map(|(a, m)| a / parts as f64 - m)
            .collect::<Vec<_>>()
    });
    Ok(collect(Scheme::Multiplier, len, seed, rows))
}

/// Draw replicates with the requested scheme.
pub fn draw(
    scheme: Scheme,
    matrix: &LocalPredictionMatrix,
    replicates: usize,
    seed: u64,
    dist: MultiplierDist,
) -> Result<BootstrapDraws> {
    match scheme {
        Scheme::Empirical => empirical_draws(matrix, replicates, seed),
        Scheme::Multiplier => multiplier_draws(matrix, replicates, seed, dist),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub mean: Vec<f64>,
    /// Sample standard deviation (denominator `B - 1`).
    pub sd: Vec<f64>,
}

/// Per-component mean and standard deviation of the deltas.
pub fn bootstrap_moments(draws: &BootstrapDraws) -> Result<Moments> {
    let b = draws.replicates();
    if b < 2 {
        return Err(Error::domain("moments need at least two replicates"));
    }
    let mut mean = vec![0.0; draws.len()];
    for row in draws.rows() {
        for (m, v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= b as f64);
    let mut ss = vec![0.0; draws.len()];
    for row in draws.rows() {
        for ((s, v), m) in ss.iter_mut().zip(row).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let sd = ss.iter().map(|s| (s / (b - 1) as f64).sqrt()).collect();
    Ok(Moments { mean, sd })
}
