use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use oplink::hardening::write_hardening_report;
use oplink::sim::{run_sweep, write_sweep};
use oplink::{init_workers, selftest, HardeningPlan, SimulationPlan};

#[derive(Parser)]
#[command(name = "oplink", version, about = "Orthogonally precoded OFDM link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML plan file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the plan
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Output directory
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run a BER sweep from a plan file and write ber.csv
    Simulate,
    /// Write the hardening table and eigenvalue spectra
    Hardening,
    /// Run the built-in oracle checks
    Selftest,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let c = cli.common;
    if let Some(n) = c.workers {
        if n == 0 {
            bail!("--workers must be at least 1");
        }
        init_workers(n)?;
    }
    match cli.command {
        Command::Simulate => {
            let path = c.config.context("simulate needs --config <plan.toml>")?;
            let mut plan = SimulationPlan::load(&path)?;
            if let Some(s) = c.seed {
                plan.seed = s;
            }
            let out = run_sweep::<f64>(&plan, |r| {
                eprintln!(
                    "{} {} {} {:>5.1} dB  it{}  ber {:.3e}  ({} frames)",
                    r.channel, r.basis, r.estimation, r.ebn0_db, r.iteration, r.ber, r.frames
                );
            })?;
            for p in write_sweep(&c.out, &plan, &out)? {
                println!("{}", p.display());
            }
        }
        Command::Hardening => {
            let mut plan = match &c.config {
                Some(p) => HardeningPlan::load(p)?,
                None => HardeningPlan::default(),
            };
            if let Some(s) = c.seed {
                plan.seed = s;
            }
            let rows = plan.run()?;
            for r in &rows {
                let emp = r.variance_empirical.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                eprintln!(
                    "{:<20} var analytic {:.4}  empirical {emp}  eigenvalues {}",
                    r.preset.to_string(),
                    r.variance_analytic,
                    r.spectrum.reported.len()
                );
            }
            for p in write_hardening_report(&c.out, &rows)? {
                println!("{}", p.display());
            }
        }
        Command::Selftest => {
            let checks = selftest::run(c.seed.unwrap_or(0));
            let mut failed = 0;
            for ch in &checks {
                let tag = if ch.passed() { "PASS" } else { "FAIL" };
                println!("{tag}  {:<32} error {:.3e}  tol {:.1e}", ch.name, ch.error, ch.tolerance);
                failed += usize::from(!ch.passed());
            }
            if failed > 0 {
                bail!("{failed} of {} checks failed", checks.len());
            }
        }
    }
    Ok(())
}
