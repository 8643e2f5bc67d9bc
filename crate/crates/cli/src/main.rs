use std::io;
use std::process::ExitCode;

use clap::Parser;
use syncbt_cli::{execute, Cli, EXIT_DATA_ERR};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the data-error code so 2 stays reserved for truncation.
            return ExitCode::from(if e.use_stderr() { EXIT_DATA_ERR as u8 } else { 0 });
        }
    };
    let code = execute(&cli, &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(code as u8)
}
