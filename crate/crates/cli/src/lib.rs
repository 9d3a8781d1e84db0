//! Command-line driver: `synth`, `sample`, `fit`, `evaluate`, `scan`.

pub mod config;
pub mod error;
pub mod pipeline;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use config::Overrides;
use error::{CliError, EXIT_OK, EXIT_VALIDATION};
use pipeline::*;

#[derive(Parser, Debug)]
#[command(name = "nntt", version, about = "Nonnegative tensor-train state tomography experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write the target ρ, its MPO, the exact outcome distribution and a manifest
    Synth {
        #[command(flatten)]
        opts: Overrides,
    },
    /// Draw train and test datasets from a snapshot
    Sample {
        #[arg(long)]
        snapshot: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Fit a nonnegative tensor train to a training dataset
    Fit {
        #[arg(long = "train-file")]
        train_file: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Compare a fitted tensor train with a snapshot
    Evaluate {
        #[arg(long)]
        tt: PathBuf,
        #[arg(long)]
        snapshot: PathBuf,
        #[arg(long = "test-file")]
        test_file: PathBuf,
        #[command(flatten)]
        opts: Overrides,
    },
    /// Run the full pipeline over a parameter grid
    Scan {
        #[command(flatten)]
        opts: Overrides,
    },
}

fn execute(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Synth { opts } => {
            let cfg = opts.resolve()?;
            cfg.validate()?;
            let m = synthesize(&cfg, &cfg.out)?;
            println!("wrote snapshot to {} (d = {}, trace = {})", cfg.out.display(), m.d, m.trace);
        }
        Command::Sample { snapshot, opts } => {
            let cfg = opts.resolve()?;
            cfg.validate()?;
            let snap = read_snapshot(&snapshot)?;
            let (train, test) = draw(&snap.distribution, cfg.train, cfg.test, cfg.seed)?;
            write_samples(&cfg.out, &train, &test)?;
            println!("wrote {} train and {} test samples to {}", train.total(), test.total(), cfg.out.display());
        }
        Command::Fit { train_file, opts } => {
            let cfg = opts.resolve()?;
            cfg.validate()?;
            let train = read_samples(&train_file)?;
            let run = run_fit(&train, &cfg)?;
            write_fit(&cfg.out, &run, cfg.record_timing)?;
            if run.summary.degenerate {
                return Err(CliError::Degenerate(run.summary.degenerate_reason.unwrap_or_default()));
            }
            println!(
                "best trial {} with loss {} written to {}",
                run.summary.best_trial.unwrap_or_default(),
                run.summary.best_loss.unwrap_or(f64::NAN),
                cfg.out.join(TT_FILE).display()
            );
        }
        Command::Evaluate { tt, snapshot, test_file, opts } => {
            let cfg = opts.resolve()?;
            let snap = read_snapshot(&snapshot)?;
            let tt = read_tt(&tt)?;
            let test = read_samples(&test_file)?;
            let report = evaluate(&tt, Some(&snap.rho), &snap.distribution, &test, cfg.record_timing)?;
            write_report(&cfg.out.join(REPORT_FILE), &report)?;
            println!("{}", serde_json::to_string(&report).expect("serializable"));
        }
        Command::Scan { opts } => {
            let cfg = opts.resolve()?;
            cfg.validate()?;
            cfg.axes()?;
            if cfg.min_n {
                let rows = min_n_search(&cfg, &cfg.out)?;
                println!("wrote {} rows to {}", rows.len(), cfg.out.join(MIN_N_FILE).display());
            } else {
                let rows = scan(&cfg, &cfg.out)?;
                let failed = rows.iter().filter(|r| r.error.is_some()).count();
                println!("wrote {} rows ({failed} failed) to {}", rows.len(), cfg.out.join(SCAN_FILE).display());
            }
        }
    }
    Ok(())
}

/// Parses `args` (including the program name) and runs the command; returns
/// the process exit code.
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
