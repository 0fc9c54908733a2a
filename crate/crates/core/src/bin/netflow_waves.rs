use std::process::ExitCode;

use clap::Parser;
use netflow_waves::cli::{self, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // help/version requests are not usage errors
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(cli::EXIT_USAGE);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    ExitCode::from(cli::run(cli))
}
