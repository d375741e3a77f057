//! `anchored run | verify | preset`: batch runner for the anchored solvers.
//!
//! Exit codes: 0 success, 1 failed verification, 2 invalid config,
//! 3 divergence (partial traces kept), 4 missing or corrupt traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anchored::experiment::{preset, run_experiment, verify, RunConfig, RunReport, PRESETS};
use anchored::Error;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "anchored",
    version,
    about = "Anchored extragradient and Popov experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (solver, seed) cell of a config.
    Run { config: PathBuf },
    /// Check stored traces of a config against the diagnostics suite.
    Verify { config: PathBuf },
    /// Write a figure config into DIR and run it.
    Preset {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
        name: String,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        workers: usize,
        #[arg(long = "seed-base", default_value_t = 0)]
        seed_base: u64,
    },
}

const EXIT_VERIFY: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_DIVERGED: u8 = 3;
const EXIT_TRACES: u8 = 4;

fn fail(e: &Error, traces_phase: bool) -> ExitCode {
    eprintln!("error: {e}");
    let code = match e {
        Error::Config(_) | Error::ScheduleDivergence { .. } => EXIT_CONFIG,
        Error::Diverged { .. } => EXIT_DIVERGED,
        Error::TraceUnavailable { .. } | Error::Parse(_) => EXIT_TRACES,
        Error::Io(_) if traces_phase => EXIT_TRACES,
        _ => EXIT_CONFIG,
    };
    ExitCode::from(code)
}

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    RunConfig::from_toml(&text).map_err(|e| fail(&e, false))
}

fn base_of(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn report_run(report: &RunReport) -> ExitCode {
    println!(
        "wrote {} cells to {}",
        report.cells.len(),
        report.output.display()
    );
    let mut diverged = false;
    for c in report.diverged() {
        diverged = true;
        eprintln!(
            "diverged: {} seed {} ({})",
            c.solver,
            c.seed,
            c.diverged.as_deref().unwrap_or("")
        );
    }
    if diverged {
        ExitCode::from(EXIT_DIVERGED)
    } else {
        ExitCode::SUCCESS
    }
}

fn run_cmd(path: &Path) -> ExitCode {
    let config = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match run_experiment(&config, base_of(path)) {
        Ok(report) => report_run(&report),
        Err(e) => fail(&e, false),
    }
}

fn verify_cmd(path: &Path) -> ExitCode {
    let config = match load(path) {
        Ok(c) => c,
        Err(code) => return code,
    };
    match verify(&config, base_of(path)) {
        Ok(report) => {
            for c in &report.checks {
                println!(
                    "{:<4} {:<28} {:<18} {}",
                    c.status.label(),
                    c.solver,
                    c.name,
                    c.detail
                );
            }
            if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_VERIFY)
            }
        }
        Err(e) => fail(&e, true),
    }
}

fn preset_cmd(name: &str, out: &Path, workers: usize, seed_base: u64) -> ExitCode {
    let config = match preset(name, seed_base, workers) {
        Ok(c) => c,
        Err(e) => return fail(&e, false),
    };
    let written =
        fs::create_dir_all(out).and_then(|_| fs::write(out.join("config.toml"), config.to_toml()));
    if let Err(e) = written {
        eprintln!("error: cannot write to {}: {e}", out.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    match run_experiment(&config, out) {
        Ok(report) => report_run(&report),
        Err(e) => fail(&e, false),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run { config } => run_cmd(config),
        Command::Verify { config } => verify_cmd(config),
        Command::Preset {
            name,
            out,
            workers,
            seed_base,
        } => preset_cmd(name, out, *workers, *seed_base),
    }
}
