use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crystal_relax::config::{parse_config, RunConfig};
use crystal_relax::drivers::{run_refinement, run_single, run_verify, thread_cap, Status, EXIT_ERROR};
use crystal_relax::oracles::{Counterexample, SampleConfig};

#[derive(Parser)]
#[command(name = "crystal-relax", version, about = "Crystal surface relaxation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// March one trajectory and write diagnostics and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Retry with half the time step on non-convergence (once unless the
        /// config asks for more).
        #[arg(long)]
        retry_halve_dt: bool,
    },
    /// Run the same problem with j, 2j, 4j, ... steps and tabulate the
    /// distance between consecutive levels.
    Refine {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
    },
    /// Check the inequality suite on random samples.
    Verify {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        samples: Option<u64>,
    },
    /// Print the fully resolved configuration.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text).with_context(|| format!("in {}", path.display()))
}

fn report(status: Status, messages: &[String]) -> u8 {
    for m in messages {
        eprintln!("{m}");
    }
    status.exit_code() as u8
}

fn dispatch(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Run {
            config,
            retry_halve_dt,
        } => {
            let mut cfg = load(&config)?;
            if retry_halve_dt {
                cfg.retry_halve_dt = cfg.retry_halve_dt.max(1);
            }
            let r = run_single(&cfg)?;
            println!(
                "{} steps of {} written to {}",
                r.steps_completed,
                r.j,
                cfg.output_dir.display()
            );
            Ok(report(r.status, &r.messages))
        }
        Command::Refine { config, levels } => {
            let cfg = load(&config)?;
            let r = run_refinement(&cfg, levels, thread_cap()?)?;
            for row in &r.rows {
                println!("{} -> {}: {:.6e}", row.j_coarse, row.j_fine, row.norm);
            }
            Ok(report(r.status, &r.messages))
        }
        Command::Verify { seed, samples } => {
            let mut sc = SampleConfig::default();
            if let Some(s) = seed {
                sc.seed = s;
            }
            if let Some(n) = samples {
                sc.count = n;
            }
            let r = run_verify(&sc, thread_cap()?)?;
            let failed: Vec<_> = r.reports.iter().filter(|o| !o.passed()).collect();
            if !failed.is_empty() {
                println!("{}", Counterexample::CSV_HEADER);
                for o in &failed {
                    for c in &o.counterexamples {
                        println!("{}", c.csv_row());
                    }
                }
            }
            for o in &r.reports {
                let verdict = if o.passed() { "ok" } else { "FAILED" };
                eprintln!("{:<22} {:>9} samples  {:>7} failures  {verdict}", o.oracle, o.samples, o.failures);
            }
            Ok(r.status.exit_code() as u8)
        }
        Command::PrintConfig { config } => {
            let cfg = match config {
                Some(path) => load(&path)?,
                None => RunConfig::default(),
            };
            print!("{}", cfg.to_text());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR as u8)
        }
    }
}
