use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lidskii_cli::{generate_fixture, run_scenario, verify_all, RunOptions, VerifyOptions, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

#[derive(Parser)]
#[command(name = "lidskii", version, about = "Run and verify Abel-Lidskii evolution scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write report.json plus CSV tables.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Evaluate grid points in parallel.
        #[arg(long)]
        parallel: bool,
    },
    /// Write a scenario for a seeded fixture.
    Gen {
        /// diagonal, jordan-mixed or sectorial-random
        #[arg(long)]
        kind: String,
        #[arg(long)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rerun every scenario in a directory and compare with its golden report.
    VerifyAll {
        dir: PathBuf,
        /// Relative tolerance for metric comparison, overriding the goldens.
        #[arg(long)]
        tol: Option<f64>,
        /// Run scenarios concurrently.
        #[arg(long)]
        parallel: bool,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Regenerate the golden files instead of comparing.
        #[arg(long)]
        bless: bool,
    },
}

fn code(c: i32) -> ExitCode {
    ExitCode::from(c as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return code(if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS });
        }
    };
    match cli.command {
        Command::Run { scenario, out_dir, parallel } => match run_scenario(&scenario, &RunOptions { out_dir, parallel }) {
            Ok(outcome) => {
                for c in &outcome.report.checks {
                    let status = if c.pass { "PASS" } else { "FAIL" };
                    match &c.error {
                        Some(e) => println!("{status} {} ({}: {})", c.name, e.kind, e.message),
                        None => println!("{status} {}", c.name),
                    }
                }
                println!("report: {}", outcome.out_dir.join("report.json").display());
                code(outcome.exit_code())
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
        Command::Gen { kind, dim, seed, out } => match generate_fixture(&kind, dim, seed, &out) {
            Ok(s) => {
                println!("wrote {} ({})", out.display(), s.name);
                code(EXIT_PASS)
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
        Command::VerifyAll {
            dir,
            tol,
            parallel,
            out_dir,
            bless,
        } => match verify_all(&dir, &VerifyOptions { tol, parallel, out_dir, bless }) {
            Ok(entries) => {
                for e in &entries {
                    println!("{} {}", if e.pass { "PASS" } else { "FAIL" }, e.name);
                    for d in &e.diffs {
                        println!("    {d}");
                    }
                }
                code(if entries.iter().all(|e| e.pass) { EXIT_PASS } else { EXIT_FAIL })
            }
            Err(e) => {
                eprintln!("error: {e}");
                code(e.exit_code())
            }
        },
    }
}
