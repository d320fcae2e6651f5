mod args;
mod commands;
mod error;
mod input;
mod output;

use clap::Parser;

use crate::args::{Cli, Command};
use crate::error::{CliError, CliResult};

fn run(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => commands::cmd_fit(a),
        Command::Ci(a) => commands::cmd_ci(a),
        Command::Simulate(a) => commands::cmd_simulate(a),
        Command::VerifyWeights(a) => commands::cmd_verify_weights(a),
    }
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.threads {
        Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cli)),
            Err(e) => Err(CliError::Usage(format!("cannot start {n} worker threads: {e}"))),
        },
        None => run(&cli),
    };
    if let Err(e) = result {
        eprintln!("wildqr: {e}");
        std::process::exit(e.exit_code());
    }
}
