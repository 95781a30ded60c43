//! `strip-anderson`: sweeps, estimators and checks for random Schrödinger
//! operators on a strip, with CSV/JSON outputs and reproducibility manifests.
//!
//! Exit codes: 0 success, 1 parameter error (including bad flags), 2
//! numerical failure.

mod args;
mod cache;
mod commands;
mod error;
mod output;

use std::time::Instant;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::{CliError, CliResult};

const THREADS_ENV: &str = "STRIP_ANDERSON_THREADS";

fn thread_count(flag: Option<usize>) -> CliResult<Option<usize>> {
    if let Some(n) = flag {
        return Ok(Some(n));
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| CliError::param(format!("{THREADS_ENV}='{v}' is not a thread count"))),
        Err(_) => Ok(None),
    }
}

fn configure_threads(flag: Option<usize>) -> CliResult<usize> {
    if let Some(n) = thread_count(flag)? {
        if n == 0 {
            return Err(CliError::param("thread count must be positive"));
        }
        // A second call (replay) finds the pool already built; keep it.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

fn run(argv: Vec<String>) -> CliResult<()> {
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let benign = matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if benign { Ok(()) } else { Err(CliError::param("invalid command line")) };
        }
    };
    let threads = configure_threads(cli.threads)?;
    if let Command::Replay(r) = &cli.command {
        let (argv, cwd) = commands::replay_target(&r.manifest)?;
        std::env::set_current_dir(&cwd).map_err(|e| CliError::param(format!("cannot enter {}: {e}", cwd.display())))?;
        return run(argv);
    }
    let ctx = commands::Context { argv, threads, started: Instant::now() };
    commands::execute(&cli.command, &ctx)
}

fn main() {
    let code = match run(std::env::args().collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("strip-anderson: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
