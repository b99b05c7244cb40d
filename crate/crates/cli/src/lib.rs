//! Batch runner behind the `beltrami-lab` binary.

pub mod commands;
pub mod config;

use beltrami_core::Error;
use clap::Parser;

pub use config::{Cli, Command, RunConfig};

pub mod exit {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const BOUND_VIOLATION: i32 = 2;
    pub const FLAGGED: i32 = 3;
}

/// Exit code for an error that escaped a command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::BoundViolation { .. } => exit::BOUND_VIOLATION,
        Error::MaxIterations { .. }
        | Error::OuterDivergence { .. }
        | Error::ResidualAboveTolerance { .. }
        | Error::DegenerateNormalization(_) => exit::FLAGGED,
        _ => exit::CONFIG,
    }
}

/// Caps the global worker pool from `BELTRAMI_THREADS`.
pub fn init_threads() -> Result<(), String> {
    let Ok(text) = std::env::var("BELTRAMI_THREADS") else { return Ok(()) };
    let n: usize = text.trim().parse().map_err(|_| format!("BELTRAMI_THREADS = `{text}` is not a count"))?;
    if n == 0 {
        return Err("BELTRAMI_THREADS must be at least 1".into());
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

/// Parses `args`, runs the command and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::CONFIG } else { exit::OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(msg) = init_threads() {
        eprintln!("error: {msg}");
        return exit::CONFIG;
    }
    let result = RunConfig::from_cli(cli).and_then(|cfg| commands::run(&cfg));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
