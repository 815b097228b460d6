use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use ratsemi::config::{Command, RunConfig};
use ratsemi::{CliError, EXIT_CONFIG};

/// Semigroups of rational maps: relations, measures, orbits and transfer
/// operators.
#[derive(Parser)]
#[command(name = "ratsemi", version)]
struct Cli {
    /// Run the configuration in this JSON file instead of a subcommand.
    #[arg(long, conflicts_with_all = ["seed", "report"])]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Write the JSON report here instead of stdout.
    #[arg(long, global = true)]
    report: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

fn config(cli: Cli) -> Result<RunConfig, CliError> {
    match (cli.config, cli.command) {
        (Some(path), None) => RunConfig::from_file(&path),
        (None, Some(command)) => Ok(RunConfig { command, seed: cli.seed, report: cli.report }),
        (Some(_), Some(_)) => Err(CliError::Config("give either --config or a subcommand, not both".into())),
        (None, None) => Err(CliError::Config("no command given; see --help".into())),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return fail(&CliError::Config(e.kind().to_string()));
        }
    };
    let cfg = match config(cli) {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    match ratsemi::run(&cfg) {
        Ok(out) => {
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(&out.stdout).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(EXIT_CONFIG as u8);
            }
            ExitCode::from(out.status as u8)
        }
        Err(e) => fail(&e),
    }
}
