use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use viscoflow_cli::commands::{run, Command};
use viscoflow_cli::config::parse_config;
use viscoflow_cli::output::format_float;
use viscoflow_cli::CliError;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Solve,
    GradCheck,
    RhoSweep,
    Optimize,
    CheckKkt,
}

/// Experiments for the viscous stick-slip control problem.
#[derive(Debug, Parser)]
#[command(name = "viscoflow", version)]
struct Args {
    command: Cmd,
    /// Experiment file with `[section]` headers and `key = value` lines.
    #[arg(long)]
    config: PathBuf,
    /// Exit with status 3 when a built-in check fails.
    #[arg(long)]
    assert: bool,
    /// Overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(&args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("viscoflow: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(args: &Args) -> Result<(), CliError> {
    let mut exp = parse_config(&args.config)?;
    if let Some(out) = &args.out {
        exp.output_dir.clone_from(out);
    }
    let cmd = match args.command {
        Cmd::Solve => Command::Solve,
        Cmd::GradCheck => Command::GradCheck,
        Cmd::RhoSweep => Command::RhoSweep,
        Cmd::Optimize => Command::Optimize,
        Cmd::CheckKkt => Command::CheckKkt,
    };
    let summary = run(cmd, &exp, args.assert)?;
    for (k, v) in &summary.metrics {
        println!("{k} = {}", format_float(*v));
    }
    for f in &summary.failures {
        println!("check failed: {f}");
    }
    println!("wrote {} files to {}", summary.files.len(), exp.output_dir.display());
    Ok(())
}
