use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infmodel_cli::run::{run_macro, run_simulate, run_steady, run_sweep, worker_count};
use infmodel_cli::verify::{run_verify, Level, VerifyOptions, DEFAULT_SEED};
use infmodel_cli::{CliError, Result, RunConfig, SweepSpec};

/// Simulate, analyse and verify the infinitesimal-model population equation.
///
/// Exit codes: 0 success, 1 check failure, 2 usage or config error,
/// 3 numerical failure, 4 I/O error.
#[derive(Parser)]
#[command(name = "infmodel", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one configuration and write trajectory, snapshot and
    /// macro-comparison CSVs.
    Simulate { config: PathBuf },
    /// Simulate every combination of a sweep spec (workers from INFMODEL_WORKERS).
    Sweep { config: PathBuf, sweep_spec: PathBuf },
    /// Solve for the steady state by fixed-point iteration.
    Steady { config: PathBuf },
    /// Roots of the macroscopic field and the ODE path from the initial mean.
    Macro { config: PathBuf },
    /// Run the acceptance checks.
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Comma-separated check ids, e.g. `1,2,11a`.
        #[arg(long, value_delimiter = ',')]
        only: Option<Vec<String>>,
        /// Also write the report as CSV.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Simulate { config } => {
            let cfg = RunConfig::load(&config)?;
            let summary = run_simulate(&cfg)?;
            println!("{summary}");
            println!("wrote {}", summary.directory.display());
        }
        Command::Sweep { config, sweep_spec } => {
            let cfg = RunConfig::load(&config)?;
            let spec = SweepSpec::load(&sweep_spec)?;
            let summary = run_sweep(&cfg, &spec, worker_count()?)?;
            for row in &summary.rows {
                let c = row.combination;
                match &row.outcome {
                    Ok(s) => println!("run {:03} a={} s2={}: {s}", row.run, c.alpha, c.sigma2),
                    Err(msg) => println!(
                        "run {:03} a={} Z0={} s2={}: FAILED {msg}",
                        row.run, c.alpha, c.z0, c.sigma2
                    ),
                }
            }
            println!("wrote {}", summary.index.display());
            let failed = summary.failures();
            if failed > 0 {
                return Err(CliError::Numerical(infmodel::Error::InvalidParams(format!(
                    "{failed} of {} sweep runs failed",
                    summary.rows.len()
                ))));
            }
        }
        Command::Steady { config } => {
            let cfg = RunConfig::load(&config)?;
            let r = run_steady(&cfg)?;
            println!(
                "iterations = {}  residual = {:.3e}  w2_to_gaussian = {:.6e}  mean = {:.6}  Z_bar = {}",
                r.iterations,
                r.residual,
                r.w2_to_gaussian,
                r.mean(),
                r.z_bar_macro.map_or("none".to_string(), |z| format!("{z:.6}"))
            );
            println!("wrote {}", cfg.output.directory.display());
        }
        Command::Macro { config } => {
            let cfg = RunConfig::load(&config)?;
            let m = run_macro(&cfg)?;
            println!("{} root(s) of F", m.roots.roots.len());
            for r in &m.roots.roots {
                println!(
                    "  Z = {:+.6}  F'(Z) = {:+.6}  {}",
                    r.location,
                    r.f_prime,
                    if r.stable { "stable" } else { "unstable" }
                );
            }
            println!("Y(0) = {}  ->  Y(T) = {:.6}", m.y0, m.ode.terminal());
            println!("wrote {}", cfg.output.directory.display());
        }
        Command::Verify {
            level,
            seed,
            only,
            report,
        } => {
            let opts = VerifyOptions {
                level,
                seed,
                only,
                ..Default::default()
            };
            let r = run_verify(&opts);
            println!("{r}");
            if let Some(path) = report {
                std::fs::write(&path, r.to_csv()).map_err(|source| CliError::Io { path, source })?;
            }
            if !r.all_passed() {
                return Err(CliError::ChecksFailed {
                    failed: r.failures(),
                    total: r.checks.len(),
                });
            }
        }
    }
    Ok(())
}
