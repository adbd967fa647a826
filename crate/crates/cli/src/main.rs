//! `spikemei` command line.
//!
//! Exit codes: 0 success, 1 input error, 2 runtime failure, 3 partial
//! completion (some sweep cells failed, or report inputs were missing).

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand};
use spikemei::harness::{
    run_benchmarks, run_mei_sweep, run_report, run_training_with_snapshots, with_workers, BenchSettings,
    ExperimentConfig,
};
use spikemei::stimulus::conformance_check;
use spikemei::Error;

#[derive(Parser, Debug)]
#[command(name = "spikemei", version, about = "Most exciting inputs of spiking-network neurons via tensor-train optimization")]
struct Cli {
    /// TOML experiment config; every key is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Objective evaluations per optimizer run (overrides the config).
    #[arg(long, global = true)]
    budget: Option<usize>,
    /// Log progress (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train the toy network and write epoch checkpoints.
    Train,
    /// Search the most exciting input of every target neuron at every
    /// checkpoint; finished cells are skipped.
    Sweep,
    /// Write analysis tables from finished sweep cells.
    Report,
    /// Run every method on the synthetic benchmark suite.
    Bench {
        /// Seeds per (problem, method).
        #[arg(long, default_value_t = 10)]
        repeats: usize,
    },
    /// Check that an external generator speaks the protocol.
    GenTest {
        /// Decode requests to send.
        #[arg(long, default_value_t = 50)]
        requests: usize,
        /// Generator command; defaults to `generator.command` from the config.
        #[arg(last = true)]
        command: Vec<String>,
    },
}

enum Outcome {
    Done,
    Partial,
}

fn load_config(cli: &Cli) -> spikemei::Result<ExperimentConfig> {
    let mut c = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = cli.seed {
        c.seed = s;
    }
    if let Some(o) = &cli.out {
        c.out = Some(o.clone());
    }
    if let Some(w) = cli.workers {
        c.workers = w;
    }
    if let Some(b) = cli.budget {
        c.budget = b;
    }
    c.validate()?;
    Ok(c)
}

fn run(cli: &Cli) -> spikemei::Result<Outcome> {
    let config = load_config(cli)?;
    with_workers(config.workers, || -> spikemei::Result<Outcome> {
        match &cli.command {
            Command::Train => {
                let out = config.out_dir()?;
                let s = run_training_with_snapshots(&config, out)?;
                println!(
                    "trained {} epochs, {} checkpoints, final test accuracy {:.3}",
                    s.epochs.len(),
                    s.checkpoints.len(),
                    s.final_accuracy().unwrap_or(f64::NAN)
                );
                Ok(Outcome::Done)
            }
            Command::Sweep => {
                let out = config.out_dir()?;
                let s = run_mei_sweep(&config, out)?;
                println!(
                    "{} cells: {} computed, {} reused, {} failed; {} evaluations",
                    s.cells,
                    s.computed,
                    s.skipped,
                    s.failed.len(),
                    s.evaluations
                );
                for f in &s.failed {
                    eprintln!("failed {}: {}", f.cell, f.error);
                }
                Ok(if s.complete() { Outcome::Done } else { Outcome::Partial })
            }
            Command::Report => {
                let out = config.out_dir()?;
                let s = run_report(out)?;
                println!("report over {} records written to {}", s.records, out.join("report").display());
                for w in &s.warnings {
                    eprintln!("missing input: {w}");
                }
                Ok(if s.complete() { Outcome::Done } else { Outcome::Partial })
            }
            Command::Bench { repeats } => {
                let out = config.out_dir()?;
                let s = run_benchmarks(&BenchSettings::from_config(&config, *repeats), out)?;
                println!("{:<20} {:<14} {:>5} {:>12}", "problem", "method", "hits", "median_best");
                for c in &s.cells {
                    println!("{:<20} {:<14} {:>2}/{:<2} {:>12.6}", c.problem, c.method.name(), c.hits, c.runs, c.median_best + 0.0);
                }
                Ok(Outcome::Done)
            }
            Command::GenTest { requests, command } => {
                let command = if command.is_empty() { &config.generator.command } else { command };
                if command.is_empty() {
                    return Err(Error::Input(
                        "no generator command: pass it after `--` or set generator.command".into(),
                    ));
                }
                let report = conformance_check(
                    command,
                    config.generator.grid()?,
                    config.generator.canvas()?,
                    *requests,
                    config.seed,
                    Duration::from_secs_f64(config.generator.timeout_secs),
                )?;
                println!("{}", serde_json::to_string_pretty(&report)?);
                if report.passed() {
                    Ok(Outcome::Done)
                } else {
                    Err(Error::Protocol(
                        report.failure.clone().unwrap_or_else(|| "conformance check failed".into()),
                    ))
                }
            }
        }
    })?
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input() { 1 } else { 2 })
        }
    }
}
