//! Command-line front end. `run` parses arguments, executes one command and
//! writes `<command>.json` plus the command's CSV traces into the output
//! directory.
//!
//! Exit codes: 0 on success, 2 when any acceptance check is violated, 1 on
//! usage or runtime errors.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};

pub use config::{parse_sweep, resolve, Args, Command, RunConfig, TOLERANCES};
pub use output::{sci, to_json, Checks, Violation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

/// Executes a resolved configuration and returns the violations found.
pub fn execute(cfg: &RunConfig) -> Result<Vec<Violation>, String> {
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| format!("cannot create {}: {e}", cfg.output_dir.display()))?;
    let (results, checks) = match cfg.command {
        Command::Constants => commands::constants(cfg),
        Command::Duality => commands::duality(cfg),
        Command::Flow => commands::flow(cfg),
        Command::Fastdiff => commands::fastdiff(cfg),
        Command::Gradflow => commands::gradflow(cfg),
        Command::Identities => commands::identities(cfg),
        Command::Rigidity => commands::rigidity(cfg),
        Command::Report => commands::report(cfg),
    }?;
    let report = output::Report {
        command: cfg.command.name(),
        params: cfg,
        results,
        violations: &checks.violations,
    };
    let name = format!("{}.json", cfg.command.name());
    std::fs::write(cfg.output_dir.join(&name), to_json(&report)).map_err(|e| format!("cannot write {name}: {e}"))?;
    Ok(checks.violations)
}

/// The binary's entry point, with `args` including the program name.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let parsed = match Args::try_parse_from(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_ERROR,
            };
        }
    };
    let cfg = match resolve(&parsed, std::env::var_os("GNSLAB_OUT").map(PathBuf::from)) {
        Ok(c) => c,
        Err(msg) => {
            eprintln!("error: {msg}\n");
            eprintln!("{}", Args::command().render_usage());
            return EXIT_ERROR;
        }
    };
    match execute(&cfg) {
        Ok(v) if v.is_empty() => EXIT_OK,
        Ok(v) => {
            for x in &v {
                eprintln!(
                    "violation: {} expected {} got {} tolerance {}",
                    x.check,
                    sci(x.expected),
                    sci(x.got),
                    sci(x.tolerance)
                );
            }
            EXIT_VIOLATION
        }
        Err(msg) => {
            eprintln!("error: {msg}");
            EXIT_ERROR
        }
    }
}
