use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let args = bspline_ilt::cli::Cli::parse();
    match bspline_ilt::cli::run(args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
