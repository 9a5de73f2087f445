//! Synthetic coverage study and sup-norm rate study.
//!
//! Data: `X_i ~ U[0,1]`, `y_i = f*(X_i) + eps_i` with
//! `eps_i | X_i ~ N(0, exp(4 |X_i - 0.5|))`, and `f*(x) = sin(2 * 3.14 * x)`.
//! The constant is the literal `3.14`, not `pi`, so `f*(1) != 0`.
//!
//! Every trial draws its data, partition plan and bootstrap replicates from
//! streams derived from `(master seed, P, T, trial)`; results do not depend
//! on thread count or scheduling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bands::{band_intervals, calibrate, covers};
use crate::bootstrap::{self, MultiplierDist, Scheme};
use crate::diagnostics::variance_proxy;
use crate::dnc::{self, KrrLearner, Learner};
use crate::kernel::{KernelSpec, SpectralModel};
use crate::krr::penalty_schedule;
use crate::seed::{self, tag};
use crate::{exec, Error, Points, PredictionSet, Result, Sample};

/// The regression function of the synthetic experiment.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind")]
pub enum TrueFunction {
    /// `sin(2 * 3.14 * x)`.
    #[default]
    Sine,
    /// Piecewise-linear through `(xs[i], ys[i])`, constant outside the range.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl TrueFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            TrueFunction::Sine => (2.0 * 3.14 * x).sin(),
            TrueFunction::Table { xs, ys } => {
                let i = xs.partition_point(|&v| v <= x);
                if i == 0 {
                    ys[0]
                } else if i == xs.len() {
                    ys[xs.len() - 1]
                } else {
                    let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                    ys[i - 1] + w * (ys[i] - ys[i - 1])
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let TrueFunction::Table { xs, ys } = self {
            if xs.is_empty() || xs.len() != ys.len() {
                return Err(Error::domain("table must have equally many, at least one, xs and ys"));
            }
            if xs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::domain("table xs must be strictly increasing"));
            }
            if xs.iter().chain(ys).any(|v| !v.is_finite()) {
                return Err(Error::domain("table entries must be finite"));
            }
        }
        Ok(())
    }
}

/// Conditional noise variance `exp(4 |x - 0.5|)`.
pub fn noise_variance(x: f64) -> f64 {
    (4.0 * (x - 0.5).abs()).exp()
}

fn default_noise_scale() -> f64 {
    1.0
}

/// Data-generating process of the synthetic study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DgpSpec {
    /// Sample size `N`.
    pub n: usize,
    #[serde(default)]
    pub truth: TrueFunction,
    /// Multiplies the noise standard deviation; 0 gives noiseless responses.
    #[serde(default = "default_noise_scale")]
    pub noise_scale: f64,
}

impl DgpSpec {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            truth: TrueFunction::Sine,
            noise_scale: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::domain("sample size must be positive"));
        }
        if !(self.noise_scale.is_finite() && self.noise_scale >= 0.0) {
            return Err(Error::domain("noise scale must be finite and nonnegative"));
        }
        self.truth.validate()
    }
}

/// One synthetic data set with its prediction set and the true values there.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub sample: Sample,
    pub points: PredictionSet,
    pub truth: Vec<f64>,
}

/// Draw `(sample, prediction set, truth)`.
pub fn generate_trial(dgp: &DgpSpec, size: usize, seed: u64) -> Result<Trial> {
    dgp.validate()?;
    if size == 0 {
        return Err(Error::domain("prediction set size must be positive"));
    }
    let mut rng = seed::stream_rng(seed, tag::DATA);
    let xs: Vec<f64> = (0..dgp.n).map(|_| rng.random::<f64>()).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let z: f64 = rng.sample(StandardNormal);
            dgp.truth.eval(x) + dgp.noise_scale * noise_variance(x).sqrt() * z
        })
        .collect();
    let mut rng = seed::stream_rng(seed, tag::PREDICTION);
    let q: Vec<f64> = (0..size).map(|_| rng.random::<f64>()).collect();
    let truth = q.iter().map(|&x| dgp.truth.eval(x)).collect();
    Ok(Trial {
        sample: Sample::new(Points::from_scalars(&xs)?, ys)?,
        points: Points::from_scalars(&q)?,
        truth,
    })
}

/// Pipeline settings shared by all cells of a coverage study.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageSettings {
    pub kernel: KernelSpec,
    pub r_prime: f64,
    pub schedule_c: f64,
    /// Miss probability; bands target simultaneous coverage `1 - alpha`.
    pub alpha: f64,
    pub replicates: usize,
    pub scheme: Scheme,
    pub multiplier: MultiplierDist,
    pub trials: usize,
}

impl Default for CoverageSettings {
    fn default() -> Self {
        Self {
            kernel: KernelSpec::default(),
            r_prime: 0.5,
            schedule_c: 1.0,
            alpha: 0.05,
            replicates: 1000,
            scheme: Scheme::Empirical,
            multiplier: MultiplierDist::Gaussian,
            trials: 500,
        }
    }
}

/// Outcome of one coverage cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub parts: usize,
    pub size: usize,
    pub trials: usize,
    pub hits: usize,
    pub ci99: (f64, f64),
    pub rho: f64,
    /// Theory-side variance driver for one partition (constant set to 1).
    pub variance_proxy: f64,
    /// Average over trials of the smallest across-partition standard
    /// deviation of the local predictions. An estimate, not a bound.
    pub sigma_estimate: f64,
    /// Mean sup-norm error of the averaged estimator at the prediction set.
    pub mean_sup_error: f64,
}

impl CellResult {
    pub fn coverage(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.hits as f64 / self.trials as f64
        }
    }

    /// Ratio of the variance proxy to the estimated local standard deviation.
    pub fn g_estimate(&self) -> f64 {
        self.variance_proxy / self.sigma_estimate
    }
}

/// Truncation large enough that the last eigenvalue term is below `1e-10`.
fn truncation_for(decay: f64, rho: f64) -> usize {
    ((1e10 / rho).powf(1.0 / decay).ceil() as usize).max(1)
}

struct TrialOutcome {
    covered: bool,
    min_sd: f64,
    sup_err: f64,
}

fn run_trial(
    dgp: &DgpSpec,
    settings: &CoverageSettings,
    parts: usize,
    size: usize,
    rho: f64,
    trial_seed: u64,
) -> Result<TrialOutcome> {
    let trial = generate_trial(dgp, size, trial_seed)?;
    let plan = dnc::make_partition_plan(dgp.n, parts, seed::derive(trial_seed, &[tag::PLAN]))?;
    let local = dnc::fit_all_partitions(&trial.sample, &plan, &settings.kernel, rho, &trial.points)?;
    let draws = bootstrap::draw(
        settings.scheme,
        &local,
        settings.replicates,
        seed::derive(trial_seed, &[tag::BOOTSTRAP]),
        settings.multiplier,
    )?;
    let bands = calibrate(&draws, settings.alpha)?;
    let intervals = band_intervals(&bands, local.mean())?;
    let sup_err = local
        .mean()
        .iter()
        .zip(&trial.truth)
        .fold(0.0f64, |m, (f, t)| m.max((f - t).abs()));
    Ok(TrialOutcome {
        covered: covers(&intervals, &trial.truth)?,
        min_sd: local.column_sd().into_iter().fold(f64::INFINITY, f64::min),
        sup_err,
    })
}

/// Seed of trial `r` in cell `(parts, size)`.
pub fn trial_seed(master: u64, parts: usize, size: usize, trial: usize) -> u64 {
    seed::derive(master, &[parts as u64, size as u64, trial as u64])
}

/// Run `settings.trials` independent trials of the full pipeline for one
/// `(P, T)` cell and count how often the bands cover the truth.
pub fn run_coverage_cell(
    dgp: &DgpSpec,
    settings: &CoverageSettings,
    parts: usize,
    size: usize,
    master_seed: u64,
) -> Result<CellResult> {
    dgp.validate()?;
    if parts == 0 || dgp.n % parts != 0 {
        return Err(Error::Indivisible { n: dgp.n, parts });
    }
    let decay = settings.kernel.decay_exponent(1);
    let rho = penalty_schedule(dgp.n, decay, settings.r_prime, settings.schedule_c)?;
    let model = SpectralModel::polynomial(decay, truncation_for(decay, rho))?;
    let proxy = variance_proxy(&model, dgp.n / parts, rho)?;

    let r = settings.trials;
    if r == 0 {
        return Ok(CellResult {
            parts,
            size,
            trials: 0,
            hits: 0,
            ci99: (0.0, 1.0),
            rho,
            variance_proxy: proxy,
            sigma_estimate: f64::NAN,
            mean_sup_error: f64::NAN,
        });
    }
    let outcomes = exec::map_indexed(r, |i| {
        run_trial(dgp, settings, parts, size, rho, trial_seed(master_seed, parts, size, i))
    });
    let outcomes = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
    let hits = outcomes.iter().filter(|o| o.covered).count();
    let sigma = outcomes.iter().map(|o| o.min_sd).sum::<f64>() / r as f64;
    let sup = outcomes.iter().map(|o| o.sup_err).sum::<f64>() / r as f64;
    Ok(CellResult {
        parts,
        size,
        trials: r,
        hits,
        ci99: coverage_ci99(hits, r)?,
        rho,
        variance_proxy: proxy,
        sigma_estimate: sigma,
        mean_sup_error: sup,
    })
}

/// Coverage for every `(P, T)` combination, in `parts`-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub n: usize,
    pub seed: u64,
    pub cells: Vec<CellResult>,
}

impl CoverageReport {
    pub fn cell(&self, parts: usize, size: usize) -> Option<&CellResult> {
        self.cells.iter().find(|c| c.parts == parts && c.size == size)
    }
}

/// Grid cells whose partition count does not divide `n`.
pub fn indivisible_cells(n: usize, parts: &[usize]) -> Vec<usize> {
    parts.iter().copied().filter(|&p| p == 0 || n % p != 0).collect()
}

/// Run the whole grid. Divisibility of every cell is checked before any
/// trial runs.
pub fn run_coverage_grid(
    dgp: &DgpSpec,
    settings: &CoverageSettings,
    parts: &[usize],
    sizes: &[usize],
    master_seed: u64,
) -> Result<CoverageReport> {
    let bad = indivisible_cells(dgp.n, parts);
    if !bad.is_empty() {
        return Err(Error::domain(format!(
            "partition counts {bad:?} do not divide N = {}",
            dgp.n
        )));
    }
    let mut cells = Vec::with_capacity(parts.len() * sizes.len());
    for &p in parts {
        for &t in sizes {
            cells.push(run_coverage_cell(dgp, settings, p, t, master_seed)?);
        }
    }
    Ok(CoverageReport {
        n: dgp.n,
        seed: master_seed,
        cells,
    })
}

/// Exact two-sided Clopper-Pearson interval at confidence `level`.
pub fn clopper_pearson(hits: usize, trials: usize, level: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(Error::domain("confidence interval needs at least one trial"));
    }
    if hits > trials {
        return Err(Error::domain(format!("{hits} hits exceed {trials} trials")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("level must lie in (0, 1), got {level}")));
    }
    let tail = (1.0 - level) / 2.0;
    let (h, r) = (hits as f64, trials as f64);
    let lo = if hits == 0 {
        0.0
    } else {
        statrs::function::beta::inv_beta_reg(h, r - h + 1.0, tail)
    };
    let hi = if hits == trials {
        1.0
    } else {
        statrs::function::beta::inv_beta_reg(h + 1.0, r - h, 1.0 - tail)
    };
    Ok((lo, hi))
}

/// 99% Clopper-Pearson interval for a coverage probability.
pub fn coverage_ci99(hits: usize, trials: usize) -> Result<(f64, f64)> {
    clopper_pearson(hits, trials, 0.99)
}

/// Largest partition count `c N^{(2 b r' - 1)/(2 b r' + 1)}` compatible with
/// sup-norm consistency.
pub fn partition_bound_check(n: usize, decay: f64, r_prime: f64, c: f64) -> Result<f64> {
    if !(decay.is_finite() && decay > 1.0) {
        return Err(Error::domain(format!("decay exponent must exceed 1, got {decay}")));
    }
    if !(r_prime.is_finite() && r_prime > 0.0) {
        return Err(Error::domain(format!("r' must be positive, got {r_prime}")));
    }
    let e = 2.0 * decay * r_prime;
    Ok(c * (n as f64).powf((e - 1.0) / (e + 1.0)))
}

/// Exponent of `N` in the squared sup-norm rate, `-(2 b r' - 1)/(2 b r' + 1)`.
pub fn theoretical_rate_slope(decay: f64, r_prime: f64) -> f64 {
    let e = 2.0 * decay * r_prime;
    -(e - 1.0) / (e + 1.0)
}

/// How the rate study picks `P` for each `N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionRule {
    /// `P = 2^round(log2(N) / 2)`.
    SqrtPow2,
    Fixed(usize),
}

impl PartitionRule {
    pub fn parts(&self, n: usize) -> usize {
        match *self {
            PartitionRule::SqrtPow2 => {
                let e = ((n as f64).log2() / 2.0).round() as u32;
                1usize << e
            }
            PartitionRule::Fixed(p) => p,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub n: usize,
    pub parts: usize,
    /// Median over repetitions of the grid sup-norm error.
    pub median_sup_err: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub rows: Vec<RateRow>,
    /// Least-squares slope of `log(err^2)` on `log N`; `None` when undefined.
    pub slope: Option<f64>,
}

/// Uniform grid of `size` points on `[0, 1]`.
pub fn unit_grid(size: usize) -> Vec<f64> {
    match size {
        0 => Vec::new(),
        1 => vec![0.5],
        _ => (0..size).map(|i| i as f64 / (size - 1) as f64).collect(),
    }
}

/// `size` points drawn uniformly from the box `[lo, hi]`.
pub fn uniform_box(lo: &[f64], hi: &[f64], size: usize, seed: u64) -> Result<Points> {
    if lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a <= b)) {
        return Err(Error::domain("box bounds must satisfy lo <= hi coordinate-wise"));
    }
    let mut rng = seed::stream_rng(seed, tag::PREDICTION);
    let coords = (0..size)
        .flat_map(|_| lo.iter().zip(hi).map(|(a, b)| (*a, *b)).collect::<Vec<_>>())
        .map(|(a, b)| a + rng.random::<f64>() * (b - a))
        .collect();
    Points::new(lo.len(), coords)
}

/// Sup-norm rate study for an arbitrary learner family. `make_learner(N)`
/// gives the base algorithm used at sample size `N`.
pub fn rate_study_with<L, F>(
    dgp: &DgpSpec,
    ns: &[usize],
    rule: PartitionRule,
    reps: usize,
    grid_size: usize,
    master_seed: u64,
    make_learner: F,
) -> Result<RateReport>
where
    L: Learner,
    F: Fn(usize) -> Result<L>,
{
    if reps == 0 || grid_size == 0 {
        return Err(Error::domain("rate study needs positive reps and grid size"));
    }
    let grid_x = unit_grid(grid_size);
    let grid = Points::from_scalars(&grid_x)?;
    let truth: Vec<f64> = grid_x.iter().map(|&x| dgp.truth.eval(x)).collect();
    let mut rows = Vec::with_capacity(ns.len());
    for &n in ns {
        let parts = rule.parts(n);
        if parts == 0 || n % parts != 0 {
            return Err(Error::Indivisible { n, parts });
        }
        let learner = make_learner(n)?;
        let local_dgp = DgpSpec { n, ..dgp.clone() };
        let errs = exec::map_indexed(reps, |rep| -> Result<f64> {
            let s = seed::derive(master_seed, &[n as u64, rep as u64]);
            let trial = generate_trial(&local_dgp, 1, s)?;
            let plan = dnc::make_partition_plan(n, parts, seed::derive(s, &[tag::PLAN]))?;
            let m = dnc::fit_partitions_with(&trial.sample, &plan, &learner, &grid)?;
            Ok(m.mean()
                .iter()
                .zip(&truth)
                .fold(0.0f64, |acc, (f, t)| acc.max((f - t).abs())))
        });
        let mut errs = errs.into_iter().collect::<Result<Vec<_>>>()?;
        rows.push(RateRow {
            n,
            parts,
            median_sup_err: median(&mut errs),
        });
    }
    let slope = log_slope(&rows);
    Ok(RateReport { rows, slope })
}

/// Rate study with kernel ridge regression at the scheduled penalty.
pub fn rate_study(
    dgp: &DgpSpec,
    ns: &[usize],
    rule: PartitionRule,
    settings: &CoverageSettings,
    reps: usize,
    grid_size: usize,
    master_seed: u64,
) -> Result<RateReport> {
    let decay = settings.kernel.decay_exponent(1);
    rate_study_with(dgp, ns, rule, reps, grid_size, master_seed, |n| {
        Ok(KrrLearner {
            kernel: settings.kernel,
            rho: penalty_schedule(n, decay, settings.r_prime, settings.schedule_c)?,
        })
    })
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn log_slope(rows: &[RateRow]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|r| !(r.median_sup_err > 0.0)) {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).ln(), (r.median_sup_err * r.median_sup_err).ln()))
        .collect();
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn noise_variance_values() {
        assert_eq!(noise_variance(0.5), 1.0);
        assert_relative_eq!(noise_variance(0.0), std::f64::consts::E.powi(2), max_relative = 1e-15);
        assert_relative_eq!(noise_variance(1.0), 7.389_056_098_930_65, max_relative = 1e-14);
        for i in 0..=100 {
            assert!(noise_variance(i as f64 / 100.0) >= 1.0);
        }
    }

    #[test]
    fn truth_uses_literal_constant() {
        let f = TrueFunction::Sine;
        assert_relative_eq!(f.eval(0.25), 0.999_999_682_931_834_6, max_relative = 1e-15);
        assert!(f.eval(1.0).abs() > 1e-3);
        for i in 0..=1000 {
            assert!(f.eval(i as f64 / 1000.0).abs() <= 1.0);
        }
    }

    #[test]
    fn table_interpolates() {
        let f = TrueFunction::Table { xs: vec![0.0, 1.0], ys: vec![1.0, 3.0] };
        assert_eq!(f.eval(0.5), 2.0);
        assert_eq!(f.eval(-1.0), 1.0);
        assert_eq!(f.eval(2.0), 3.0);
        assert!(TrueFunction::Table { xs: vec![1.0, 0.0], ys: vec![0.0, 0.0] }.validate().is_err());
    }

    #[test]
    fn trial_is_seeded_and_shaped() {
        let dgp = DgpSpec::new(32);
        let a = generate_trial(&dgp, 5, 9).unwrap();
        let b = generate_trial(&dgp, 5, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sample.len(), 32);
        assert_eq!(a.points.len(), 5);
        for (x, t) in a.points.rows().zip(&a.truth) {
            assert!((0.0..1.0).contains(&x[0]));
            assert_eq!(*t, TrueFunction::Sine.eval(x[0]));
        }
        let noiseless = DgpSpec { noise_scale: 0.0, ..dgp };
        let c = generate_trial(&noiseless, 5, 9).unwrap();
        for (x, y) in c.sample.x.rows().zip(&c.sample.y) {
            assert_eq!(*y, TrueFunction::Sine.eval(x[0]));
        }
    }

    #[test]
    fn clopper_pearson_reference_values() {
        // reference: beta quantiles from an independent statistics library
        let cases = [
            (950, 1000, 0.929_495_624_798_541_9, 0.966_073_337_289_779_7),
            (470, 500, 0.907_211_364_793_466_6, 0.964_056_938_190_415_5),
            (1860, 2000, 0.914_003_741_389_746_3, 0.943_906_065_953_573_2),
            (3, 10, 0.037_007_221_096_232_09, 0.735_113_985_287_130_7),
        ];
        for (h, r, lo, hi) in cases {
            let (a, b) = coverage_ci99(h, r).unwrap();
            assert_relative_eq!(a, lo, max_relative = 1e-9);
            assert_relative_eq!(b, hi, max_relative = 1e-9);
        }
        let (lo, hi) = coverage_ci99(950, 1000).unwrap();
        assert!(lo < 0.95 && 0.95 < hi);
        assert!(lo > 0.92 && hi < 0.97);
    }

    #[test]
    fn clopper_pearson_boundaries() {
        for r in [1usize, 7, 50, 500] {
            let (lo, hi) = coverage_ci99(r, r).unwrap();
            assert_eq!(hi, 1.0);
            assert_relative_eq!(lo, 0.005f64.powf(1.0 / r as f64), max_relative = 1e-10);
            let (lo, hi) = coverage_ci99(0, r).unwrap();
            assert_eq!(lo, 0.0);
            assert_relative_eq!(hi, 1.0 - 0.005f64.powf(1.0 / r as f64), max_relative = 1e-10);
        }
        assert!(coverage_ci99(0, 0).is_err());
        assert!(coverage_ci99(3, 2).is_err());
    }

    #[test]
    fn partition_bounds() {
        let p = partition_bound_check(1 << 16, 8.0, 0.5, 1.0).unwrap();
        assert_relative_eq!(p, 2f64.powf(16.0 * 7.0 / 9.0), max_relative = 1e-12);
        assert!(p.log2() > 12.0 && p.log2() < 12.5);
        assert_eq!(partition_bound_check(1, 8.0, 0.5, 3.0).unwrap(), 3.0);
        let near = partition_bound_check(1 << 20, 8.0, 1.0 / 16.0 + 1e-9, 2.0).unwrap();
        assert_relative_eq!(near, 2.0, max_relative = 1e-6);
        assert_relative_eq!(theoretical_rate_slope(8.0, 0.5), -7.0 / 9.0);
    }

    #[test]
    fn sqrt_rule() {
        let r = PartitionRule::SqrtPow2;
        assert_eq!(r.parts(1 << 10), 32);
        assert_eq!(r.parts(1 << 11), 64);
        assert_eq!(r.parts(1 << 12), 64);
        assert_eq!(r.parts(1 << 13), 128);
        assert_eq!(r.parts(1 << 14), 128);
    }

    #[test]
    fn zero_trials_do_no_work() {
        let dgp = DgpSpec::new(64);
        let s = CoverageSettings { trials: 0, ..Default::default() };
        let c = run_coverage_cell(&dgp, &s, 4, 3, 1).unwrap();
        assert_eq!((c.hits, c.trials), (0, 0));
    }

    #[test]
    fn indivisible_cell_fails_early() {
        let dgp = DgpSpec::new(100);
        let s = CoverageSettings { trials: 1, ..Default::default() };
        assert!(matches!(run_coverage_cell(&dgp, &s, 3, 2, 1), Err(Error::Indivisible { .. })));
        let err = run_coverage_grid(&dgp, &s, &[4, 3, 7], &[2], 1).unwrap_err();
        assert!(err.to_string().contains("[3, 7]"));
    }

    struct Oracle(TrueFunction);

    impl Learner for Oracle {
        fn fit_predict(&self, _: &Sample, points: &PredictionSet) -> Result<Vec<f64>> {
            Ok(points.rows().map(|x| self.0.eval(x[0])).collect())
        }
    }

    #[test]
    fn exact_learner_has_no_slope() {
        let dgp = DgpSpec::new(1);
        let rep = rate_study_with(&dgp, &[64, 128], PartitionRule::Fixed(4), 3, 512, 0, |_| {
            Ok(Oracle(TrueFunction::Sine))
        })
        .unwrap();
        assert!(rep.rows.iter().all(|r| r.median_sup_err == 0.0));
        assert_eq!(rep.slope, None);
    }

    #[test]
    fn slope_of_exact_power_law() {
        let rows: Vec<RateRow> = [1024usize, 2048, 4096]
            .iter()
            .map(|&n| RateRow { n, parts: 1, median_sup_err: (n as f64).powf(-0.4) })
            .collect();
        assert_relative_eq!(log_slope(&rows).unwrap(), -0.8, max_relative = 1e-12);
    }
}
