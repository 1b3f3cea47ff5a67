mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};
use commands::{CliError, Context};

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage {
                flag: "threads",
                message: "must be at least 1".into(),
            });
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::Usage {
                flag: "threads",
                message: e.to_string(),
            })?;
    }
    let ctx = Context {
        seed: cli.seed.unwrap_or(0),
        seed_given: cli.seed.is_some(),
        out: cli.out,
    };
    match &cli.command {
        Command::Fit(a) => commands::fit(a, &ctx),
        Command::EnumerateClass(a) => commands::enumerate_class(a, &ctx),
        Command::Mintrace(a) => commands::mintrace(a, &ctx),
        Command::CiScan(a) => commands::ci_scan(a, &ctx),
        Command::Simulate(a) => commands::simulate(a, &ctx),
        Command::Diagnose(a) => commands::diagnose(a, &ctx),
    }
}

fn main() -> ExitCode {
    // clap exits with status 2 on argument errors and names the flag
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
