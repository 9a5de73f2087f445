//! CSV writers. Every file starts with one `#` metadata line carrying the
//! config hash and master seed, followed by a header row.

use std::io::Write;

use crate::bands::Interval;
use crate::bootstrap::BootstrapDraws;
use crate::simulation::{CoverageReport, RateReport};
use crate::{Points, Result};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Metadata {
    pub config_hash: String,
    pub seed: u64,
    pub extra: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(config_hash: impl Into<String>, seed: u64) -> Self {
        Self {
            config_hash: config_hash.into(),
            seed,
            extra: Vec::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    fn write_line<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write!(w, "# config_hash={} seed={}", self.config_hash, self.seed)?;
        for (k, v) in &self.extra {
            write!(w, " {k}={v}")?;
        }
        writeln!(w)
    }
}

fn writer<W: Write>(mut w: W, meta: &Metadata) -> Result<csv::Writer<W>> {
    meta.write_line(&mut w)?;
    Ok(csv::Writer::from_writer(w))
}

fn point_label(p: &[f64]) -> String {
    p.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
}

/// Columns `t, x_tilde, f_bar`. Multi-dimensional points are `;`-joined.
pub fn write_predictions<W: Write>(w: W, meta: &Metadata, points: &Points, f_bar: &[f64]) -> Result<()> {
    let mut out = writer(w, meta)?;
    out.write_record(["t", "x_tilde", "f_bar"])?;
    for (t, (x, f)) in points.rows().zip(f_bar).enumerate() {
        out.write_record([t.to_string(), point_label(x), f.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `t, x_tilde, f_bar, lower, upper`, where `lower`/`upper` bound the
/// true value at `x_tilde`.
pub fn write_bands<W: Write>(
    w: W,
    meta: &Metadata,
    points: &Points,
    f_bar: &[f64],
    intervals: &[Interval],
) -> Result<()> {
    let mut out = writer(w, meta)?;
    out.write_record(["t", "x_tilde", "f_bar", "lower", "upper"])?;
    for (t, ((x, f), iv)) in points.rows().zip(f_bar).zip(intervals).enumerate() {
        out.write_record([
            t.to_string(),
            point_label(x),
            f.to_string(),
            iv.lo.to_string(),
            iv.hi.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per replicate, header `t0..t{T-1}`.
pub fn write_deltas<W: Write>(w: W, meta: &Metadata, draws: &BootstrapDraws) -> Result<()> {
    let mut out = writer(w, meta)?;
    out.write_record((0..draws.len()).map(|t| format!("t{t}")))?;
    for row in draws.rows() {
        out.write_record(row.iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}

/// Columns `P, T, trials, hits, coverage, ci_lo, ci_hi`, plus diagnostic
/// columns when `diagnostics` is set.
pub fn write_coverage<W: Write>(
    w: W,
    meta: &Metadata,
    report: &CoverageReport,
    diagnostics: bool,
) -> Result<()> {
    let mut out = writer(w, meta)?;
    let mut header = vec!["P", "T", "trials", "hits", "coverage", "ci_lo", "ci_hi"];
    if diagnostics {
        header.extend([
            "rho",
            "variance_proxy",
            "sigma_estimate",
            "g_estimate",
            "mean_sup_error",
        ]);
    }
    out.write_record(&header)?;
    for c in &report.cells {
        let mut rec = vec![
            c.parts.to_string(),
            c.size.to_string(),
            c.trials.to_string(),
            c.hits.to_string(),
            c.coverage().to_string(),
            c.ci99.0.to_string(),
            c.ci99.1.to_string(),
        ];
        if diagnostics {
            rec.extend([
                c.rho.to_string(),
                c.variance_proxy.to_string(),
                c.sigma_estimate.to_string(),
                c.g_estimate().to_string(),
                c.mean_sup_error.to_string(),
            ]);
        }
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Long format for plotting coverage against `log2 P`, one series per `T`.
pub fn write_coverage_long<W: Write>(w: W, meta: &Metadata, report: &CoverageReport) -> Result<()> {
    let meta = meta
        .clone()
        .with("x_axis", "log2_P")
        .with("series", "log2_T");
    let mut out = writer(w, &meta)?;
    out.write_record(["log2_P", "log2_T", "P", "T", "coverage", "ci_lo", "ci_hi"])?;
    for c in &report.cells {
        out.write_record([
            (c.parts as f64).log2().to_string(),
            (c.size as f64).log2().to_string(),
            c.parts.to_string(),
            c.size.to_string(),
            c.coverage().to_string(),
            c.ci99.0.to_string(),
            c.ci99.1.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// One row per `N` with columns `N, P, median_sup_err, slope`, followed by a
/// footer row whose `N` field is `slope`.
pub fn write_rate<W: Write>(w: W, meta: &Metadata, report: &RateReport, theoretical: f64) -> Result<()> {
    let mut out = writer(w, meta)?;
    out.write_record(["N", "P", "median_sup_err", "slope"])?;
    for r in &report.rows {
        out.write_record([
            r.n.to_string(),
            r.parts.to_string(),
            r.median_sup_err.to_string(),
            String::new(),
        ])?;
    }
    let slope = report
        .slope
        .map(|s| s.to_string())
        .unwrap_or_else(|| "undefined".to_string());
    out.write_record(["slope", "", "", slope.as_str()])?;
    out.write_record(["theoretical_slope", "", "", theoretical.to_string().as_str()])?;
    out.flush()?;
    Ok(())
}

/// Generic table writer for diagnostics.
pub fn write_table<W: Write>(w: W, meta: &Metadata, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut out = writer(w, meta)?;
    out.write_record(header)?;
    for r in rows {
        out.write_record(r)?;
    }
    out.flush()?;
    Ok(())
}
