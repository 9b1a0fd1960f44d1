use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use trailstop::{AssumptionClause, Error};
use trailstop_cli::{commands, RunConfig, VerifyOptions};

#[derive(Parser)]
#[command(name = "trailstop", version, about = "Optimal trailing-stop liquidation and acquisition thresholds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Monte Carlo seed; overrides the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = "TRAILSTOP_THREADS")]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Thresholds and regime flags.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also tabulate the fixed-stop threshold b(f(m)) over the grid.
        #[arg(long)]
        fixed_table: bool,
    },
    /// Curve data for plotting.
    Curves {
        #[command(flatten)]
        common: Common,
    },
    /// Thresholds across the configured parameter sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Analytic values against Monte Carlo.
    Verify {
        #[command(flatten)]
        common: Common,
    },
}

fn setup(common: &Common) -> Result<(RunConfig, PathBuf)> {
    if let Some(n) = common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let cfg = RunConfig::load(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    Ok((cfg, out))
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Solve { common, fixed_table } => {
            let (cfg, out) = setup(&common)?;
            let report = commands::solve(&cfg, &out, fixed_table)?;
            for (k, v) in report.rows() {
                println!("{k:<32} {v}");
            }
            Ok(true)
        }
        Command::Curves { common } => {
            let (cfg, out) = setup(&common)?;
            for name in commands::curves(&cfg, &out)? {
                println!("{}", out.join(name).display());
            }
            Ok(true)
        }
        Command::Sweep { common } => {
            let (cfg, out) = setup(&common)?;
            let rows = commands::sweep(&cfg, &out)?;
            for r in rows {
                let b = r.b_star.map_or("none".into(), |v| format!("{v:.6}"));
                let e = r.b_lower.map_or("no-entry".into(), |v| format!("{v:.6}"));
                println!("{:<10.4} b_f* {b:<10} x0 {:<10.6} b_lower {e}", r.value, r.x0);
            }
            Ok(true)
        }
        Command::Verify { common } => {
            let (cfg, out) = setup(&common)?;
            let checks = commands::verify(&cfg, &out, VerifyOptions { seed: common.seed, threshold_shift: 0.0 })?;
            let mut ok = true;
            for c in &checks {
                let fine = c.z_fine().map_or(String::new(), |z| format!(" z(dt/2) {z:+.2}"));
                let status = if c.passed() { "ok" } else { "FAIL" };
                println!(
                    "{status:<4} {:<32} analytic {:.6} mc {:.6} se {:.1e} z {:+.2}{fine}",
                    c.quantity,
                    c.analytic,
                    c.coarse.mean,
                    c.coarse.stderr,
                    c.z()
                );
                ok &= c.passed();
            }
            Ok(ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("verification failed");
            ExitCode::from(1)
        }
        Err(e) => {
            if let Some(Error::AssumptionFailure { clause, .. }) = e.downcast_ref::<Error>() {
                eprintln!("assumption failed: {}", clause_name(*clause));
            }
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn clause_name(c: AssumptionClause) -> &'static str {
    match c {
        AssumptionClause::ConvexConcaveShape => "convex-concave-shape",
        AssumptionClause::VanishingAtOrigin => "vanishing-at-origin",
        AssumptionClause::SlopeAtInfinity => "slope-at-infinity",
        AssumptionClause::PositiveSomewhere => "positive-somewhere",
        AssumptionClause::AcquisitionShape => "acquisition-shape",
    }
}
