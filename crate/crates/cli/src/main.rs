use std::process::ExitCode;

use clap::Parser;

use coalsim::args::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match coalsim::run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("coalsim: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
