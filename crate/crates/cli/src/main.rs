use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use polyhardy_cli::{env_tol, format_report, format_summary, run, suite, write_report, CliError, RunOptions};

#[derive(Parser)]
#[command(name = "polyhardy", version, about = "Run polyhardy scenario files")]
struct Cli {
    /// Print machine-readable JSON on stdout.
    #[arg(long, global = true)]
    json: bool,
    /// Print nothing except errors.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run {
        file: PathBuf,
        /// Where to write the report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Tolerance override.
        #[arg(long)]
        tol: Option<f64>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run every `*.json` scenario of a directory.
    Suite {
        dir: PathBuf,
        /// Directory for one report per scenario.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match execute(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("polyhardy: {e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(cli: &Cli) -> Result<i32, CliError> {
    let env = env_tol()?;
    match &cli.command {
        Command::Run { file, out, tol, seed } => {
            let report = run(file, &RunOptions { tol: *tol, seed: *seed, env_tol: env })?;
            if let Some(p) = out {
                write_report(&report, p)?;
            }
            if cli.json {
                println!("{}", polyhardy::io::to_json(&report)?);
            } else if !cli.quiet {
                print!("{}", format_report(&report));
            }
            Ok(report.exit_code)
        }
        Command::Suite { dir, out, tol, seed } => {
            let summary = suite(dir, &RunOptions { tol: *tol, seed: *seed, env_tol: env }, out.as_deref())?;
            if cli.json {
                println!("{}", polyhardy::io::to_json(&summary)?);
            } else if !cli.quiet {
                print!("{}", format_summary(&summary));
            }
            Ok(summary.exit_code)
        }
    }
}
