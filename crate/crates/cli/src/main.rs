use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use plasma_charge::config::{RunConfig, SweepConfig};
use plasma_charge::desingularization::{sweep, sweep_plot_script, write_sweep_csv};
use plasma_charge::run::{output_dir, run};
use plasma_charge::verify::{run_suite, Suite, VerifyOptions};
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "sim", version, about = "Plasma and point charges in a convex domain")]
struct Cli {
    /// Worker threads for force evaluation (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured run and write its artifacts.
    Run {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Particle snapshot interval in steps.
        #[arg(long)]
        snapshot_every: Option<usize>,
    },
    /// Run a verification suite: greens, bem, conserve or desing.
    Verify {
        suite: Suite,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Smaller problem sizes.
        #[arg(long)]
        quick: bool,
    },
    /// Compare blob barycenters with point charges over a list of blob radii.
    DesingSweep {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            snapshot_every,
        } => {
            let mut cfg = RunConfig::load(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(k) = snapshot_every {
                cfg.snapshot_every = k;
            }
            let dir = output_dir(out.as_deref(), "out");
            let summary = run(&cfg, &dir)?;
            println!(
                "{}: t = {}, steps = {}, energy drift = {:.3e}, output in {}",
                summary.status,
                summary.t_final,
                summary.steps,
                summary.energy_drift_rel,
                dir.display()
            );
            if let Some(r) = &summary.reason {
                println!("reason: {r}");
            }
            Ok(summary.ok())
        }
        Command::Verify { suite, out, quick } => {
            let dir = output_dir(out.as_deref(), "verify");
            std::fs::create_dir_all(&dir)?;
            let report = run_suite(suite, VerifyOptions { quick }, &dir.join("work"))?;
            for c in &report.checks {
                let tag = if c.passed { "PASS" } else { "FAIL" };
                println!("{tag} {} ({:.1}s): {}", c.name, c.seconds, c.detail);
            }
            let path = dir.join(format!("{}.xml", suite.name()));
            std::fs::write(&path, report.to_junit())?;
            println!("report written to {}", path.display());
            Ok(report.passed())
        }
        Command::DesingSweep { config, out } => {
            let cfg = SweepConfig::load(&config)
                .with_context(|| format!("reading {}", config.display()))?;
            let ev = Arc::new(cfg.evaluator()?);
            let rows = sweep(&cfg.spec(), ev, &cfg.h_cha_density()?, &cfg.epsilons)?;
            let dir = output_dir(out.as_deref(), "sweep");
            std::fs::create_dir_all(&dir)?;
            let mut f = std::io::BufWriter::new(std::fs::File::create(dir.join("desing_sweep.csv"))?);
            write_sweep_csv(&mut f, &rows)?;
            f.flush()?;
            std::fs::write(dir.join("desing_sweep.gp"), sweep_plot_script("desing_sweep.csv"))?;
            for r in &rows {
                println!(
                    "eps {:<8} sigma {:.5} sup_p {:.3e} ({:.1}s)",
                    r.epsilon, r.sigma, r.sup_p, r.wall_seconds
                );
            }
            Ok(true)
        }
    }
}
