//! The `simulate`, `analytic`, `compare` and `fit-tail` commands.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use hcthin_core::estimators::{
    empirical_radius_tail, estimate_cover_covariance, estimate_intensity,
    estimate_pair_correlation, estimate_volume_fraction, fit_tail_exponent, Measurement, TailFit,
};
use hcthin_core::simulate::{replicate, sample_boolean, thin, BooleanSample, ThinnedSample};
use hcthin_core::{c_alpha_d, AsymptoticLaw, CurveKind, ModelSpec, Statistic, WeightKernel};
use serde::Serialize;

use crate::config::ExperimentConfig;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<()> {
    let mut out = create(dir, name)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

/// Wall time goes to its own file so the other outputs stay byte-stable.
fn write_meta(dir: &Path, command: &str, started: Instant) -> Result<()> {
    #[derive(Serialize)]
    struct Meta<'a> {
        command: &'a str,
        wall_seconds: f64,
    }
    write_json(
        dir,
        &format!("{command}_meta.json"),
        &Meta {
            command,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    )
}

fn prepare(cfg: &ExperimentConfig) -> Result<PathBuf> {
    cfg.validate()?;
    fs::create_dir_all(&cfg.output)
        .with_context(|| format!("creating output directory {}", cfg.output.display()))?;
    Ok(cfg.output.clone())
}

/// One replication: the Boolean sample and its thinnings in kernel order.
struct Replication {
    sample: BooleanSample,
    thinned: Vec<(BooleanSample, ThinnedSample)>,
}

fn run_replications(cfg: &ExperimentConfig) -> Result<Vec<Replication>> {
    let window = cfg.window()?;
    let law = cfg.law.build()?;
    let kernels = cfg.kernel.kernels();
    replicate(cfg.replications, |rep| {
        let sample = sample_boolean(cfg.lambda, &law, kernels[0], &window, cfg.seed, rep)?;
        let thinned = kernels
            .iter()
            .map(|&k| {
                let weighted = sample.with_kernel(k)?;
                let t = thin(&weighted);
                Ok((weighted, t))
            })
            .collect::<hcthin_core::Result<Vec<_>>>()?;
        Ok(Replication { sample, thinned })
    })
    .map_err(Into::into)
}

#[derive(Debug, Serialize)]
pub struct KernelSummary {
    pub kernel: WeightKernel,
    pub intensity: Measurement,
    pub volume_fraction: Measurement,
    pub retained_mean: f64,
}

#[derive(Debug, Serialize)]
pub struct SimulateSummary {
    pub config_hash: String,
    pub replications: u64,
    pub margin: f64,
    pub bias_bound: f64,
    pub grains_per_replication: Vec<usize>,
    pub germ_intensity: Measurement,
    pub volume_fraction: Measurement,
    pub thinned: Vec<KernelSummary>,
}

/// Writes one grain file per replication for the Boolean sample and for each
/// thinning, then `simulate_summary.json`.
pub fn run_simulate(cfg: &ExperimentConfig) -> Result<SimulateSummary> {
    let started = Instant::now();
    let dir = prepare(cfg)?;
    let reps = run_replications(cfg)?;
    let header = cfg.header();
    for r in &reps {
        let rep = r.sample.replication;
        let mut out = create(&dir, &format!("grains_original_rep{rep:03}.csv"))?;
        r.sample.write_csv(&mut out, None, &header)?;
        out.flush()?;
        for (weighted, t) in &r.thinned {
            let mut out = create(&dir, &format!("grains_{}_rep{rep:03}.csv", t.kernel))?;
            weighted.write_csv(&mut out, Some(&t.mask), &header)?;
            out.flush()?;
        }
    }
    let samples: Vec<BooleanSample> = reps.iter().map(|r| r.sample.clone()).collect();
    let mut thinned = Vec::new();
    for (i, kernel) in cfg.kernel.kernels().into_iter().enumerate() {
        let ts: Vec<ThinnedSample> = reps.iter().map(|r| r.thinned[i].1.clone()).collect();
        thinned.push(KernelSummary {
            kernel,
            intensity: estimate_intensity(&ts)?,
            volume_fraction: estimate_volume_fraction(&ts, cfg.volume_probes, cfg.seed)?,
            retained_mean: ts.iter().map(|t| t.retained.len() as f64).sum::<f64>()
                / ts.len() as f64,
        });
    }
    let summary = SimulateSummary {
        config_hash: cfg.hash(),
        replications: cfg.replications,
        margin: samples[0].window.margin(),
        bias_bound: samples[0].bias_bound,
        grains_per_replication: samples.iter().map(|s| s.grains.len()).collect(),
        germ_intensity: estimate_intensity(&samples)?,
        volume_fraction: estimate_volume_fraction(&samples, cfg.volume_probes, cfg.seed)?,
        thinned,
    };
    write_json(&dir, "simulate_summary.json", &summary)?;
    write_meta(&dir, "simulate", started)?;
    Ok(summary)
}

#[derive(Debug, Serialize)]
pub struct KernelScalars {
    pub kernel: WeightKernel,
    pub thinned_intensity: f64,
    pub thinned_volume_fraction: f64,
    pub laws: Vec<(Statistic, AsymptoticLaw)>,
}

#[derive(Debug, Serialize)]
pub struct AnalyticSummary {
    pub config_hash: String,
    pub volume_fraction: f64,
    pub c_alpha_d: Option<f64>,
    pub kernels: Vec<KernelScalars>,
    /// Curves that could not be produced, with the reason.
    pub skipped: Vec<String>,
}

fn curve_grid(kind: CurveKind, cfg: &ExperimentConfig) -> Vec<f64> {
    match kind {
        CurveKind::RadiusTail | CurveKind::Retention => cfg.radii.points(),
        _ => cfg.curve.points(),
    }
}

fn asymptote_statistic(kind: CurveKind) -> Option<Statistic> {
    match kind {
        CurveKind::ThinnedCovariance => Some(Statistic::CoverCovariance),
        CurveKind::TwoPointCorrelation => Some(Statistic::TwoPoint),
        CurveKind::RadiusTail => Some(Statistic::RadiusTail),
        _ => None,
    }
}

/// Writes `curve_<kernel>_<statistic>.csv` for every kernel and statistic,
/// the asymptotic law or bound beside each, and `analytic_summary.json`.
pub fn run_analytic(cfg: &ExperimentConfig) -> Result<AnalyticSummary> {
    let started = Instant::now();
    let dir = prepare(cfg)?;
    let header = cfg.header();
    let mut skipped = Vec::new();
    let kernels = cfg.kernel.kernels();
    let base = cfg.spec(kernels[0])?;

    let boolean = base.curve(CurveKind::BooleanCovariance, &cfg.curve.points())?;
    let mut out = create(&dir, "curve_boolean_covariance.csv")?;
    boolean.write_csv(&mut out, &header)?;
    out.flush()?;

    let mut scalars = Vec::new();
    for kernel in kernels {
        let spec = base.with_kernel(kernel);
        for kind in [
            CurveKind::ThinnedCovariance,
            CurveKind::TwoPointCorrelation,
            CurveKind::RadiusTail,
            CurveKind::Retention,
        ] {
            let grid = curve_grid(kind, cfg);
            match spec.curve(kind, &grid) {
                Ok(curve) => {
                    let mut out = create(&dir, &format!("curve_{kernel}_{}.csv", kind.name()))?;
                    curve.write_csv(&mut out, &header)?;
                    out.flush()?;
                }
                Err(e) => skipped.push(format!("{kernel} {}: {e}", kind.name())),
            }
            let Some(stat) = asymptote_statistic(kind) else {
                continue;
            };
            match spec.asymptotic_law(stat) {
                Ok(law) => {
                    let mut out = create(&dir, &format!("asymptote_{kernel}_{}.csv", kind.name()))?;
                    let kind_line = if law.is_bound() { "bound" } else { "asymptote" };
                    for line in &header {
                        writeln!(out, "# {line}")?;
                    }
                    writeln!(out, "# {kind_line}")?;
                    writeln!(out, "lag,value")?;
                    for x in &grid {
                        writeln!(out, "{x:.10e},{:.10e}", law.evaluate(*x))?;
                    }
                    out.flush()?;
                }
                Err(e) => skipped.push(format!("{kernel} {} asymptote: {e}", kind.name())),
            }
        }
        scalars.push(KernelScalars {
            kernel,
            thinned_intensity: spec.thinned_intensity(),
            thinned_volume_fraction: spec.thinned_volume_fraction(),
            laws: Statistic::ALL
                .into_iter()
                .filter_map(|s| spec.asymptotic_law(s).ok().map(|l| (s, l)))
                .collect(),
        });
    }
    let c = match &base.law {
        hcthin_core::RadiusLaw::Pareto { alpha, .. } => c_alpha_d(*alpha, base.dim).ok(),
        _ => None,
    };
    let summary = AnalyticSummary {
        config_hash: cfg.hash(),
        volume_fraction: base.boolean_volume_fraction(),
        c_alpha_d: c,
        kernels: scalars,
        skipped,
    };
    write_json(&dir, "analytic_summary.json", &summary)?;
    write_meta(&dir, "analytic", started)?;
    Ok(summary)
}

/// One empirical value set against its prediction.
#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub statistic: String,
    pub kernel: String,
    pub x: f64,
    pub analytic: f64,
    pub empirical: f64,
    pub stderr: f64,
    pub asymptotic: Option<f64>,
    pub z_score: f64,
    pub pass: bool,
}

/// Long-range check of one analytic curve: a fitted slope against the
/// predicted exponent, or the curve against its bound.
#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub kernel: String,
    pub statistic: String,
    pub expected: String,
    pub observed: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub config_hash: String,
    pub sigma: f64,
    pub rows: Vec<ComparisonRow>,
    pub table: Vec<TableRow>,
    pub pointwise_pass: bool,
    pub table_pass: bool,
}

impl ComparisonReport {
    /// Recomputes z-scores and verdicts from the stored values.
    pub fn rescore(&mut self) {
        for row in &mut self.rows {
            let m = Measurement {
                mean: row.empirical,
                stderr: row.stderr,
                replications: 0,
            };
            row.z_score = m.z_score(row.analytic);
            row.pass = row.z_score.abs() <= self.sigma;
        }
        self.pointwise_pass = self.rows.iter().all(|r| r.pass);
        self.table_pass = self.table.iter().all(|r| r.pass);
    }

    pub fn passed(&self) -> bool {
        self.pointwise_pass && self.table_pass
    }

    /// Columns `statistic,kernel,x,analytic,empirical,stderr,asymptotic,z_score,pass`.
    pub fn write_csv<W: Write>(&self, mut out: W, header: &[String]) -> std::io::Result<()> {
        for line in header {
            writeln!(out, "# {line}")?;
        }
        writeln!(
            out,
            "statistic,kernel,x,analytic,empirical,stderr,asymptotic,z_score,pass"
        )?;
        for r in &self.rows {
            let asym = r.asymptotic.map_or(String::new(), |a| format!("{a:.10e}"));
            writeln!(
                out,
                "{},{},{:.10e},{:.10e},{:.10e},{:.10e},{asym},{:.4},{}",
                r.statistic, r.kernel, r.x, r.analytic, r.empirical, r.stderr, r.z_score, r.pass
            )?;
        }
        Ok(())
    }
}

fn row(
    statistic: &str,
    kernel: &str,
    x: f64,
    analytic: f64,
    m: Measurement,
    asymptotic: Option<f64>,
) -> ComparisonRow {
    ComparisonRow {
        statistic: statistic.into(),
        kernel: kernel.into(),
        x,
        analytic,
        empirical: m.mean,
        stderr: m.stderr,
        asymptotic,
        z_score: 0.0,
        pass: false,
    }
}

fn table_row(
    spec: &ModelSpec,
    stat: Statistic,
    kind: CurveKind,
    cfg: &ExperimentConfig,
) -> Result<Option<TableRow>> {
    let law = match spec.asymptotic_law(stat) {
        Ok(l) => l,
        Err(hcthin_core::Error::NoPrediction { .. }) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let mut grid: Vec<f64> = curve_grid(kind, cfg)
        .into_iter()
        .chain(cfg.curve.points())
        .filter(|x| *x >= cfg.fit_range.0 && *x <= cfg.fit_range.1)
        .collect();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let curve = match spec.curve(kind, &grid) {
        Ok(c) => c,
        Err(hcthin_core::Error::Unsupported(_)) => return Ok(None),
        Err(e) => return Err(e.into()),
    };
    let (expected, observed, pass) = match law {
        AsymptoticLaw::PowerLaw { exponent, .. } => {
            let (lo, hi) = cfg.fit_range;
            match fit_tail_exponent(&curve.grid, &curve.values, lo, hi) {
                Ok(TailFit { slope, .. }) => (
                    format!("slope {:.3} ± {}", -exponent, cfg.slope_tolerance),
                    format!("slope {slope:.4}"),
                    (slope + exponent).abs() <= cfg.slope_tolerance,
                ),
                Err(e) => (format!("slope {:.3}", -exponent), e.to_string(), false),
            }
        }
        bound => {
            let worst = curve
                .grid
                .iter()
                .zip(&curve.values)
                .map(|(x, v)| v.abs() - bound.evaluate(*x))
                .fold(f64::NEG_INFINITY, f64::max);
            (
                "below exponential bound".into(),
                format!("max excess {worst:.3e}"),
                worst <= 0.0,
            )
        }
    };
    Ok(Some(TableRow {
        kernel: spec.kernel.name().into(),
        statistic: stat.name().into(),
        expected,
        observed,
        pass,
    }))
}

/// Joins simulation, analytics and asymptotics into `compare_report.csv`,
/// `compare_table.csv` and `compare_verdict.json`.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<ComparisonReport> {
    let started = Instant::now();
    let dir = prepare(cfg)?;
    let window = cfg.window()?;
    let lags = cfg.lags.points();
    let reach = lags.last().copied().unwrap_or(0.0) + cfg.pair_half_width;
    let shortest = window.sides().into_iter().fold(f64::INFINITY, f64::min);
    if 2.0 * reach >= shortest {
        bail!(
            "grid.lags: largest lag plus half-width ({reach}) must be below half the core side ({})",
            0.5 * shortest
        );
    }
    let reps = run_replications(cfg)?;
    let kernels = cfg.kernel.kernels();
    let base = cfg.spec(kernels[0])?;
    let d = cfg.dim;
    let mut rows = Vec::new();

    let samples: Vec<BooleanSample> = reps.iter().map(|r| r.sample.clone()).collect();
    rows.push(row(
        "volume_fraction",
        "none",
        0.0,
        base.boolean_volume_fraction(),
        estimate_volume_fraction(&samples, cfg.volume_probes, cfg.seed)?,
        None,
    ));
    rows.push(row(
        "intensity",
        "none",
        0.0,
        cfg.lambda,
        estimate_intensity(&samples)?,
        None,
    ));
    let cov = estimate_cover_covariance(&samples, &lags, cfg.covariance_probes, cfg.seed)?;
    let boolean_law = base.boolean_covariance_asymptote().ok();
    for (j, &z) in lags.iter().enumerate() {
        rows.push(row(
            "cover_covariance",
            "none",
            z,
            base.boolean_covariance(z),
            cov.at(j),
            boolean_law.map(|l| l.evaluate(z)),
        ));
    }

    let radii = cfg.radii.points();
    let mut table = Vec::new();
    for (i, &kernel) in kernels.iter().enumerate() {
        let spec = base.with_kernel(kernel);
        let name = kernel.name();
        let ts: Vec<ThinnedSample> = reps.iter().map(|r| r.thinned[i].1.clone()).collect();
        let law = |s: Statistic| spec.asymptotic_law(s).ok().filter(|l| !l.is_bound());

        rows.push(row(
            "intensity",
            name,
            0.0,
            spec.thinned_intensity(),
            estimate_intensity(&ts)?,
            None,
        ));
        rows.push(row(
            "volume_fraction",
            name,
            0.0,
            spec.thinned_volume_fraction(),
            estimate_volume_fraction(&ts, cfg.volume_probes, cfg.seed)?,
            None,
        ));
        let tail = empirical_radius_tail(&ts, &radii)?;
        let tail_law = law(Statistic::RadiusTail);
        for (j, &r) in radii.iter().enumerate() {
            rows.push(row(
                "radius_tail",
                name,
                r,
                spec.thinned_radius_tail(r),
                tail.at(j),
                tail_law.map(|l| l.evaluate(r)),
            ));
        }
        if d <= 2 {
            let cov = estimate_cover_covariance(&ts, &lags, cfg.covariance_probes, cfg.seed)?;
            let cov_law = law(Statistic::CoverCovariance);
            for (j, &z) in lags.iter().enumerate() {
                rows.push(row(
                    "cover_covariance",
                    name,
                    z,
                    spec.thinned_covariance(z)?,
                    cov.at(j),
                    cov_law.map(|l| l.evaluate(z)),
                ));
            }
        }
        let xi = estimate_pair_correlation(&ts, &lags, cfg.pair_half_width)?;
        let xi_law = law(Statistic::TwoPoint);
        for (j, &z) in lags.iter().enumerate() {
            rows.push(row(
                "two_point",
                name,
                z,
                spec.thinned_two_point_correlation(z),
                xi.at(j),
                xi_law.map(|l| l.evaluate(z)),
            ));
        }

        for (stat, kind) in [
            (Statistic::CoverCovariance, CurveKind::ThinnedCovariance),
            (Statistic::TwoPoint, CurveKind::TwoPointCorrelation),
            (Statistic::RadiusTail, CurveKind::RadiusTail),
        ] {
            if let Some(t) = table_row(&spec, stat, kind, cfg)? {
                table.push(t);
            }
        }
    }

    let mut report = ComparisonReport {
        config_hash: cfg.hash(),
        sigma: cfg.sigma,
        rows,
        table,
        pointwise_pass: false,
        table_pass: false,
    };
    report.rescore();
    let header = cfg.header();
    let mut out = create(&dir, "compare_report.csv")?;
    report.write_csv(&mut out, &header)?;
    out.flush()?;
    let mut out = create(&dir, "compare_table.csv")?;
    for line in &header {
        writeln!(out, "# {line}")?;
    }
    writeln!(out, "kernel,statistic,expected,observed,pass")?;
    for t in &report.table {
        writeln!(
            out,
            "{},{},{},{},{}",
            t.kernel, t.statistic, t.expected, t.observed, t.pass
        )?;
    }
    out.flush()?;
    #[derive(Serialize)]
    struct Verdict<'a> {
        config_hash: &'a str,
        pointwise_pass: bool,
        table_pass: bool,
        failing_rows: usize,
        failing_table_rows: usize,
    }
    write_json(
        &dir,
        "compare_verdict.json",
        &Verdict {
            config_hash: &report.config_hash,
            pointwise_pass: report.pointwise_pass,
            table_pass: report.table_pass,
            failing_rows: report.rows.iter().filter(|r| !r.pass).count(),
            failing_table_rows: report.table.iter().filter(|r| !r.pass).count(),
        },
    )?;
    write_meta(&dir, "compare", started)?;
    Ok(report)
}

/// Reads the first two columns of a curve CSV, skipping `#` lines and a
/// header row.
pub fn read_curve(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let (mut x, mut y) = (Vec::new(), Vec::new());
    for (n, line) in BufReader::new(f).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',');
        let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
            bail!(
                "{}:{}: expected at least two columns",
                path.display(),
                n + 1
            );
        };
        match (a.trim().parse::<f64>(), b.trim().parse::<f64>()) {
            (Ok(a), Ok(b)) => {
                x.push(a);
                y.push(b);
            }
            _ if x.is_empty() => continue,
            _ => bail!("{}:{}: not a number", path.display(), n + 1),
        }
    }
    Ok((x, y))
}

/// Fits a log-log slope to a curve file; writes `fit.json` into the output
/// directory.
pub fn run_fit_tail(input: &Path, lo: f64, hi: f64, out: Option<&Path>) -> Result<TailFit> {
    let (x, y) = read_curve(input)?;
    let fit = fit_tail_exponent(&x, &y, lo, hi)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        write_json(dir, "fit.json", &fit)?;
    }
    Ok(fit)
}
