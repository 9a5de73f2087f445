//! Browser bindings for the dncboot demo page.
//!
//! Three operations are exported: simulate a data set and draw its bootstrap
//! bands, evaluate a kernel profile, and estimate band coverage by repeated
//! simulation. Everything runs single-threaded in the page.

use dncboot::bands::{band_intervals, calibrate, covers};
use dncboot::bootstrap::{empirical_draws, multiplier_draws, MultiplierDist};
use dncboot::dnc;
use dncboot::kernel::{KernelSpec, Smoothness};
use dncboot::krr::penalty_schedule;
use dncboot::seed::{self, tag};
use dncboot::simulation::{generate_trial, unit_grid, DgpSpec};
use dncboot::Points;
use wasm_bindgen::prelude::*;

fn js_err(e: dncboot::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn kernel(nu: f64, lengthscale: f64) -> dncboot::Result<KernelSpec> {
    KernelSpec::matern(Smoothness::try_from(nu)?, lengthscale, 1.0)
}

/// Inputs shared by the simulation entry points.
#[derive(Debug, Clone, Copy)]
pub struct Setup {
    pub n: usize,
    pub parts: usize,
    pub size: usize,
    pub alpha: f64,
    pub replicates: usize,
    pub nu: f64,
    pub lengthscale: f64,
    pub multiplier: bool,
}

/// A simulated data set with its averaged fit and band on a plotting grid.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct BandPlot {
    xs: Vec<f64>,
    ys: Vec<f64>,
    grid: Vec<f64>,
    truth: Vec<f64>,
    f_bar: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rho: f64,
    covered: bool,
    tail_rank: usize,
}

#[wasm_bindgen]
impl BandPlot {
    pub fn xs(&self) -> Vec<f64> {
        self.xs.clone()
    }
    pub fn ys(&self) -> Vec<f64> {
        self.ys.clone()
    }
    pub fn grid(&self) -> Vec<f64> {
        self.grid.clone()
    }
    pub fn truth(&self) -> Vec<f64> {
        self.truth.clone()
    }
    pub fn f_bar(&self) -> Vec<f64> {
        self.f_bar.clone()
    }
    pub fn lower(&self) -> Vec<f64> {
        self.lower.clone()
    }
    pub fn upper(&self) -> Vec<f64> {
        self.upper.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn rho(&self) -> f64 {
        self.rho
    }
    /// Whether the band contains the truth at every grid point.
    #[wasm_bindgen(getter)]
    pub fn covered(&self) -> bool {
        self.covered
    }
    #[wasm_bindgen(getter)]
    pub fn tail_rank(&self) -> usize {
        self.tail_rank
    }
}

/// Core of [`simulate_bands`], usable outside the browser.
pub fn band_plot(setup: &Setup, seed_value: u64) -> dncboot::Result<BandPlot> {
    let k = kernel(setup.nu, setup.lengthscale)?;
    let dgp = DgpSpec::new(setup.n);
    let trial = generate_trial(&dgp, 1, seed_value)?;
    let grid = unit_grid(setup.size);
    let points = Points::from_scalars(&grid)?;
    let rho = penalty_schedule(setup.n, k.decay_exponent(1), 0.5, 1.0)?;
    let plan = dnc::make_partition_plan(setup.n, setup.parts, seed::derive(seed_value, &[tag::PLAN]))?;
    let local = dnc::fit_all_partitions(&trial.sample, &plan, &k, rho, &points)?;
    let boot_seed = seed::derive(seed_value, &[tag::BOOTSTRAP]);
    let draws = if setup.multiplier {
        multiplier_draws(&local, setup.replicates, boot_seed, MultiplierDist::Gaussian)?
    } else {
        empirical_draws(&local, setup.replicates, boot_seed)?
    };
    let bands = calibrate(&draws, setup.alpha)?;
    let intervals = band_intervals(&bands, local.mean())?;
    let truth: Vec<f64> = grid.iter().map(|&x| dgp.truth.eval(x)).collect();
    Ok(BandPlot {
        xs: trial.sample.x.coords().to_vec(),
        ys: trial.sample.y.clone(),
        covered: covers(&intervals, &truth)?,
        grid,
        truth,
        f_bar: local.mean().to_vec(),
        lower: intervals.iter().map(|i| i.lo).collect(),
        upper: intervals.iter().map(|i| i.hi).collect(),
        rho,
        tail_rank: bands.tail_rank,
    })
}

/// Simulate `n` noisy observations of `sin(2 * 3.14 * x)`, fit `parts`
/// local kernel ridge regressions, average them and calibrate a
/// simultaneous band at level `1 - alpha` on a grid of `size` points.
#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn simulate_bands(
    n: usize,
    parts: usize,
    size: usize,
    alpha: f64,
    replicates: usize,
    nu: f64,
    lengthscale: f64,
    multiplier: bool,
    seed: u32,
) -> Result<BandPlot, JsError> {
    let setup = Setup {
        n,
        parts,
        size,
        alpha,
        replicates,
        nu,
        lengthscale,
        multiplier,
    };
    band_plot(&setup, u64::from(seed)).map_err(js_err)
}

/// Matérn kernel value at each distance in `distances`.
#[wasm_bindgen]
pub fn kernel_profile(nu: f64, lengthscale: f64, distances: Vec<f64>) -> Result<Vec<f64>, JsError> {
    let k = kernel(nu, lengthscale).map_err(js_err)?;
    Ok(distances.iter().map(|&r| k.at_distance(r.abs())).collect())
}

/// Fraction of `trials` independent simulations whose band covers the truth
/// at `size` random points.
pub fn coverage_estimate(setup: &Setup, trials: usize, seed_value: u64) -> dncboot::Result<f64> {
    let settings = dncboot::simulation::CoverageSettings {
        kernel: kernel(setup.nu, setup.lengthscale)?,
        alpha: setup.alpha,
        replicates: setup.replicates,
        scheme: if setup.multiplier {
            dncboot::bootstrap::Scheme::Multiplier
        } else {
            dncboot::bootstrap::Scheme::Empirical
        },
        trials,
        ..Default::default()
    };
    let cell = dncboot::simulation::run_coverage_cell(
        &DgpSpec::new(setup.n),
        &settings,
        setup.parts,
        setup.size,
        seed_value,
    )?;
    Ok(cell.coverage())
}

#[allow(clippy::too_many_arguments)]
#[wasm_bindgen]
pub fn estimate_coverage(
    n: usize,
    parts: usize,
    size: usize,
    alpha: f64,
    replicates: usize,
    nu: f64,
    lengthscale: f64,
    multiplier: bool,
    trials: usize,
    seed: u32,
) -> Result<f64, JsError> {
    let setup = Setup {
        n,
        parts,
        size,
        alpha,
        replicates,
        nu,
        lengthscale,
        multiplier,
    };
    coverage_estimate(&setup, trials, u64::from(seed)).map_err(js_err)
}
