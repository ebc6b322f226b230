//! Command-line front end: argument parsing, experiment configuration and
//! deterministic CSV/JSON output.

pub mod args;
pub mod config;
pub mod error;
pub mod exec;
pub mod output;

use std::path::Path;
use std::process::ExitCode;

use args::Cli;
use error::CliError;

fn write_or_print(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
        }
    }
    Ok(())
}

/// Runs one invocation; exit status 1 means a self-check failed.
pub fn run(cli: &Cli) -> Result<ExitCode, CliError> {
    let threads = cli.threads()?;
    let cfg = cli.resolve()?;
    if cli.dump_config {
        write_or_print(cli.out.as_deref(), &cfg.to_canonical_json())?;
        return Ok(ExitCode::SUCCESS);
    }
    let rendered = exec::execute(&cfg, threads)?;
    write_or_print(cli.out.as_deref(), &rendered.main)?;
    if let (Some(path), Some((ext, text))) = (&cli.out, &rendered.companion) {
        let side = path.with_extension(ext);
        if side != *path {
            std::fs::write(side, text)?;
        }
    }
    Ok(if rendered.failed { ExitCode::from(1) } else { ExitCode::SUCCESS })
}
