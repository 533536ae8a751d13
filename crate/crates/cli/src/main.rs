use std::fs;
use std::process::ExitCode;

use anchor_crc_cli::{render_estimate, run_estimate, run_simulate, Cli, CliError, Command};
use clap::Parser;

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Estimate(args) => {
            let report = run_estimate(&args)?;
            let text = render_estimate(&report, args.format)?;
            match &args.output {
                Some(path) => fs::write(path, text).map_err(|e| {
                    CliError::Input(format!("cannot write {}: {e}", path.display()))
                })?,
                None => print!("{text}"),
            }
        }
        Command::Simulate(args) => {
            let outcome = run_simulate(&args)?;
            for path in &outcome.files {
                eprintln!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
