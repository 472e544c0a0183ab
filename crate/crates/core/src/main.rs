use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use siamcal::cli::{error_line, run, Cli};
use siamcal::Error;

fn main() -> ExitCode {
    let result = match Cli::try_parse() {
        Ok(cli) => run(cli.command),
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            e.exit()
        }
        Err(e) => Err(Error::InvalidConfig(
            e.to_string().lines().next().unwrap_or_default().to_owned(),
        )),
    };
    match result {
        Ok(_) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", error_line(&err));
            ExitCode::FAILURE
        }
    }
}
