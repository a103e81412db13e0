use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use hcthin_cli::{run_analytic, run_compare, run_fit_tail, run_simulate, ExperimentConfig};

#[derive(Parser)]
#[command(
    name = "hcthin",
    version,
    about = "Hard-core thinnings of heavy-tailed Boolean models"
)]
struct Cli {
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Ten times fewer replications and a ten times smaller core.
    #[arg(long, global = true)]
    quick: bool,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample the model, thin it, write grain files and a summary.
    Simulate,
    /// Evaluate analytic curves, asymptotes and scalars.
    Analytic,
    /// Compare simulation with analytics; exits with status 2 on a failed verdict.
    Compare,
    /// Fit a log-log slope to a `lag,value` curve file.
    FitTail {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long)]
        hi: Option<f64>,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.output = out;
    }
    if cli.quick {
        cfg.quick();
    }
    match cli.command {
        Command::Simulate => {
            let s = run_simulate(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Analytic => {
            let s = run_analytic(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&s)?);
        }
        Command::Compare => {
            let r = run_compare(&cfg)?;
            for t in &r.table {
                let tag = if t.pass { "PASS" } else { "FAIL" };
                println!(
                    "{tag} {} {}: {} ({})",
                    t.kernel, t.statistic, t.observed, t.expected
                );
            }
            let failing = r.rows.iter().filter(|r| !r.pass).count();
            println!(
                "pointwise: {}/{} rows within {} stderr",
                r.rows.len() - failing,
                r.rows.len(),
                r.sigma
            );
            if !r.passed() {
                return Ok(ExitCode::from(2));
            }
        }
        Command::FitTail { input, lo, hi } => {
            let fit = run_fit_tail(
                &input,
                lo.unwrap_or(cfg.fit_range.0),
                hi.unwrap_or(cfg.fit_range.1),
                cli.config.as_ref().map(|_| cfg.output.as_path()),
            )?;
            println!("{}", serde_json::to_string(&fit)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}
