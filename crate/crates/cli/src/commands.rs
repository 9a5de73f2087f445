use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use dncboot::bands::{band_intervals, calibrate};
use dncboot::bootstrap;
use dncboot::diagnostics::{
    check_interpolation_inequality, check_trace_bound, dense_grid, random_expansion,
    variance_proxy, variance_proxy_simplified,
};
use dncboot::dnc::{self, LocalPredictionMatrix};
use dncboot::export::{self, Metadata};
use dncboot::kernel::{effective_dimension, SpectralModel};
use dncboot::krr::penalty_schedule;
use dncboot::seed::{self, tag};
use dncboot::simulation::{
    generate_trial, indivisible_cells, rate_study, run_coverage_grid, theoretical_rate_slope,
    uniform_box, unit_grid, CoverageReport,
};
use dncboot::{Error, Points, Sample};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

/// Everything a subcommand needs besides its own flags.
pub struct Context {
    pub config: RunConfig,
    pub out_dir: PathBuf,
    pub data: Option<PathBuf>,
}

impl Context {
    fn metadata(&self) -> Metadata {
        Metadata::new(self.config.hash(), self.config.seed)
    }

    fn create(&self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        std::fs::create_dir_all(&self.out_dir)?;
        let path = self.out_dir.join(name);
        let file = File::create(&path)?;
        Ok((path, BufWriter::new(file)))
    }

    fn sample(&self) -> Result<Sample> {
        match self.data.as_ref().or(self.config.data.path.as_ref()) {
            Some(path) => crate::data::read_sample(path),
            None => {
                let trial = generate_trial(&self.config.dgp_spec(), 1, self.config.seed)?;
                Ok(trial.sample)
            }
        }
    }
}

/// Prediction set for `fit` and `bands`: an evenly spaced grid over the
/// covariate range in one dimension, seeded uniform draws over the bounding
/// box otherwise.
fn prediction_set(sample: &Sample, size: usize, seed: u64) -> Result<Points> {
    let dim = sample.x.dim();
    let mut lo = vec![f64::INFINITY; dim];
    let mut hi = vec![f64::NEG_INFINITY; dim];
    for row in sample.x.rows() {
        for j in 0..dim {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    if dim == 1 {
        let xs: Vec<f64> = unit_grid(size)
            .into_iter()
            .map(|u| lo[0] + u * (hi[0] - lo[0]))
            .collect();
        return Ok(Points::from_scalars(&xs)?);
    }
    Ok(uniform_box(&lo, &hi, size, seed)?)
}

struct Fitted {
    points: Points,
    local: LocalPredictionMatrix,
    rho: f64,
    n: usize,
    parts: usize,
}

fn fit_local(ctx: &Context) -> Result<Fitted> {
    let cfg = &ctx.config;
    let sample = ctx.sample()?;
    let n = sample.len();
    let parts = cfg.grid.parts[0];
    if n % parts != 0 {
        return Err(Error::Indivisible { n, parts }.into());
    }
    let decay = cfg.kernel.decay_exponent(sample.x.dim());
    let rho = penalty_schedule(n, decay, cfg.schedule.r_prime, cfg.schedule.c)?;
    let points = prediction_set(&sample, cfg.grid.sizes[0], cfg.seed)?;
    let plan = dnc::make_partition_plan(n, parts, seed::derive(cfg.seed, &[tag::PLAN]))?;
    let local = dnc::fit_all_partitions(&sample, &plan, &cfg.kernel, rho, &points)?;
    Ok(Fitted {
        points,
        local,
        rho,
        n,
        parts,
    })
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

pub fn fit(ctx: &Context) -> Result<()> {
    let f = fit_local(ctx)?;
    let (path, w) = ctx.create("predictions.csv")?;
    let meta = ctx.metadata().with("rho", f.rho);
    export::write_predictions(w, &meta, &f.points, f.local.mean())?;
    println!("N = {}, P = {}, T = {}, rho = {:.4e}", f.n, f.parts, f.points.len(), f.rho);
    announce(&path);
    Ok(())
}

pub fn bands(ctx: &Context, dump_deltas: bool) -> Result<()> {
    let cfg = &ctx.config;
    let f = fit_local(ctx)?;
    let draws = bootstrap::draw(
        cfg.bootstrap.scheme,
        &f.local,
        cfg.bootstrap.replicates,
        seed::derive(cfg.seed, &[tag::BOOTSTRAP]),
        cfg.bootstrap.multiplier,
    )?;
    let bands = calibrate(&draws, cfg.bands.alpha)?;
    let intervals = band_intervals(&bands, f.local.mean())?;
    let meta = ctx
        .metadata()
        .with("alpha", cfg.bands.alpha)
        .with("tail_rank", bands.tail_rank)
        .with("target_met", bands.target_met);
    let (path, w) = ctx.create("bands.csv")?;
    export::write_bands(w, &meta, &f.points, f.local.mean(), &intervals)?;
    println!(
        "N = {}, P = {}, T = {}, B = {}: tail rank {}, bootstrap coverage {:.4}{}",
        f.n,
        f.parts,
        f.points.len(),
        draws.replicates(),
        bands.tail_rank,
        bands.coverage,
        if bands.target_met { "" } else { " (target not met)" }
    );
    if bands.has_degenerate() {
        let k = bands.degenerate.iter().filter(|&&d| d).count();
        println!("{k} prediction point(s) have zero bootstrap spread");
    }
    announce(&path);
    if dump_deltas {
        let (path, w) = ctx.create("deltas.csv")?;
        export::write_deltas(w, &ctx.metadata(), &draws)?;
        announce(&path);
    }
    Ok(())
}

fn print_summary(report: &CoverageReport, diagnostics: bool) {
    print!("{:>6} {:>6} {:>7} {:>9} {:>17}", "P", "T", "trials", "coverage", "99% CI");
    if diagnostics {
        print!(" {:>10} {:>10} {:>10}", "rho", "G_est", "sup_err");
    }
    println!();
    for c in &report.cells {
        print!(
            "{:>6} {:>6} {:>7} {:>9.4} [{:.4}, {:.4}]",
            c.parts,
            c.size,
            c.trials,
            c.coverage(),
            c.ci99.0,
            c.ci99.1
        );
        if diagnostics {
            print!(" {:>10.3e} {:>10.4} {:>10.4}", c.rho, c.g_estimate(), c.mean_sup_error);
        }
        println!();
    }
}

pub fn coverage(ctx: &Context, diagnostics: bool) -> Result<()> {
    let cfg = &ctx.config;
    let report = run_coverage_grid(
        &cfg.dgp_spec(),
        &cfg.coverage_settings(),
        &cfg.grid.parts,
        &cfg.grid.sizes,
        cfg.seed,
    )?;
    print_summary(&report, diagnostics);
    let meta = ctx.metadata().with("alpha", cfg.bands.alpha).with("n", cfg.dgp.n);
    let (path, w) = ctx.create("coverage.csv")?;
    export::write_coverage(w, &meta, &report, diagnostics)?;
    announce(&path);
    let (path, w) = ctx.create("coverage_long.csv")?;
    export::write_coverage_long(w, &meta, &report)?;
    announce(&path);
    Ok(())
}

pub fn rate(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let r = &cfg.rate;
    let report = rate_study(
        &cfg.dgp_spec(),
        &r.ns,
        r.partitions,
        &cfg.coverage_settings(),
        r.reps,
        r.grid_size,
        cfg.seed,
    )?;
    let theory = theoretical_rate_slope(cfg.kernel.decay_exponent(1), cfg.schedule.r_prime);
    println!("{:>8} {:>6} {:>14}", "N", "P", "median sup err");
    for row in &report.rows {
        println!("{:>8} {:>6} {:>14.5}", row.n, row.parts, row.median_sup_err);
    }
    match report.slope {
        Some(s) => println!("slope of log err^2 on log N: {s:.4} (theory {theory:.4})"),
        None => println!("slope undefined (theory {theory:.4})"),
    }
    let (path, w) = ctx.create("rate.csv")?;
    export::write_rate(w, &ctx.metadata().with("reps", r.reps), &report, theory)?;
    announce(&path);
    Ok(())
}

pub fn diagnostics(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let d = &cfg.diagnostics;
    let decay = cfg.kernel.decay_exponent(1);
    let model = SpectralModel::polynomial(decay, d.truncation)?;
    let local_n = (cfg.dgp.n / cfg.grid.parts[0]).max(1);

    let mut rows = Vec::with_capacity(d.rhos.len());
    let mut violations = 0;
    for &rho in &d.rhos {
        let tb = check_trace_bound(&model, rho)?;
        violations += usize::from(!tb.holds());
        let ed = effective_dimension(&model, rho)?;
        rows.push(vec![
            rho.to_string(),
            d.truncation.to_string(),
            ed.value.to_string(),
            tb.lhs.to_string(),
            tb.rhs.to_string(),
            tb.ratio.to_string(),
            tb.holds().to_string(),
            local_n.to_string(),
            variance_proxy(&model, local_n, rho)?.to_string(),
            variance_proxy_simplified(decay, local_n, rho)?.to_string(),
        ]);
    }
    let header = [
        "rho",
        "truncation",
        "effective_dimension",
        "trace_lhs",
        "trace_rhs",
        "trace_ratio",
        "holds",
        "local_n",
        "variance_proxy",
        "variance_proxy_simplified",
    ];
    let meta = ctx.metadata().with("decay", decay);
    let (path, w) = ctx.create("diagnostics.csv")?;
    export::write_table(w, &meta, &header, &rows)?;
    println!(
        "trace bound: {} of {} penalty values violate sum mu/(mu+rho)^2 <= T(rho)/rho",
        violations,
        d.rhos.len()
    );
    announce(&path);

    let grid = dense_grid(d.grid_size);
    let mut rows = Vec::with_capacity(d.expansions);
    let mut worst = 0.0f64;
    for i in 0..d.expansions {
        let f = random_expansion(&model, 20, seed::derive(cfg.seed, &[tag::PREDICTION, i as u64]))?;
        let a = check_interpolation_inequality(&f, &grid);
        let b = check_interpolation_inequality(&f.scaled(10.0), &grid);
        worst = worst.max(a.ratio);
        rows.push(vec![
            i.to_string(),
            a.sup_norm.to_string(),
            a.bound.to_string(),
            a.ratio.to_string(),
            b.ratio.to_string(),
        ]);
    }
    let (path, w) = ctx.create("interpolation.csv")?;
    export::write_table(
        w,
        &meta,
        &["expansion", "sup_norm", "bound", "ratio", "ratio_scaled_x10"],
        &rows,
    )?;
    println!("interpolation: largest sup / (|f|_H^(1/b) |f|^(1-1/b)) over {} expansions = {worst:.4}", d.expansions);
    announce(&path);
    Ok(())
}

/// Validate the config, check divisibility and report the work each command
/// would do, without computing anything.
pub fn dry_run(ctx: &Context) -> Result<()> {
    let cfg = &ctx.config;
    let n = cfg.dgp.n;
    let cells = cfg.grid.parts.len() * cfg.grid.sizes.len();
    println!("config hash {} seed {}", cfg.hash(), cfg.seed);
    println!(
        "coverage grid: {} partition counts x {} prediction sizes = {cells} cells",
        cfg.grid.parts.len(),
        cfg.grid.sizes.len()
    );
    let bad = indivisible_cells(n, &cfg.grid.parts);
    if !bad.is_empty() {
        println!("cells with P not dividing N = {n}: P in {bad:?}");
    }
    let decay = cfg.kernel.decay_exponent(1);
    let rho = penalty_schedule(n, decay, cfg.schedule.r_prime, cfg.schedule.c)?;
    let trials = cfg.coverage.trials;
    let mut ops = 0.0;
    for &p in &cfg.grid.parts {
        let local = (n / p.max(1)) as f64;
        for &t in &cfg.grid.sizes {
            // Cholesky per partition plus bootstrap averaging
            let per_trial = p as f64 * (local.powi(3) / 3.0 + local * t as f64)
                + (cfg.bootstrap.replicates * p * t) as f64;
            ops += per_trial * trials as f64;
        }
    }
    println!("N = {n}, rho = {rho:.4e}, trials per cell = {trials}, B = {}", cfg.bootstrap.replicates);
    println!("estimated work: {:.2e} floating-point operations", ops);
    println!(
        "rate study: N in {:?}, {} reps, {} grid points",
        cfg.rate.ns, cfg.rate.reps, cfg.rate.grid_size
    );
    println!("output directory: {}", ctx.out_dir.display());
    if bad.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("partition counts {bad:?} do not divide N = {n}")))
    }
}
