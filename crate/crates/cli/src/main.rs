//! `ldp`: runs one study per invocation and writes CSV plus a JSON manifest.
//!
//! Exit status is 0 on success, 2 when a statistical check is out of band
//! and 1 on any error.

mod params;
mod run;

use std::fmt;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ldp_core::LdpError;

use params::merge;
use run::Status;

#[derive(Parser)]
#[command(name = "ldp", version = run::VERSION, about = "Liouville dynamical percolation laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    Calibrate(params::Calibrate),
    Field(params::FieldCmd),
    Gmc(params::Gmc),
    Simulate(params::Simulate),
    Spectrum(params::Spectrum),
    Mixing(params::Mixing),
    Frozen(params::Frozen),
    Switchcheck(params::Switchcheck),
    Regime(params::Regime),
}

/// One-line error with a category tag and a hint for humans.
#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
    hint: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>, hint: impl Into<String>) -> Self {
        CliError { kind: "usage", message: message.into(), hint: hint.into() }
    }

    pub fn invalid(message: impl Into<String>, hint: impl Into<String>) -> Self {
        CliError { kind: "invalid-parameter", message: message.into(), hint: hint.into() }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError { kind: "io", message: message.into(), hint: "check that the output directory exists and is writable".into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error[{}]: {}", self.kind, self.message.replace('\n', " "))
    }
}

impl From<LdpError> for CliError {
    fn from(e: LdpError) -> Self {
        let (kind, hint) = match &e {
            LdpError::InvalidParameter(_) => ("invalid-parameter", "check the parameter ranges in --help"),
            LdpError::Budget(_) | LdpError::LatticeTooLarge(_) => ("budget", "reduce the mesh, horizon or problem size"),
            LdpError::MissingCalibration(_) => ("calibration", "run `ldp calibrate` or pass --alpha4-exponent"),
            LdpError::Factorization { .. } => ("numerics", "use --kernel brw for large lattices"),
            LdpError::Fit(_) => ("fit", "widen the grid or add replicas"),
            LdpError::Io(_) | LdpError::Json(_) => ("io", "check file paths and permissions"),
            _ => ("internal", "rerun with RUST_LOG=debug for details"),
        };
        CliError { kind, message: e.to_string(), hint: hint.into() }
    }
}

/// Merges the config file under the flags, then runs on `threads` workers.
fn go<P, F>(flags: P, config: Option<std::path::PathBuf>, threads: impl Fn(&P) -> Option<usize>, f: F) -> Result<Status, CliError>
where
    P: serde::Serialize + serde::de::DeserializeOwned + Send,
    F: FnOnce(P) -> Result<Status, CliError> + Send,
{
    let p = merge(&flags, config.as_deref())?;
    let n = threads(&p).unwrap_or(0);
    ldp_core::par::with_threads(n, move || f(p))
}

fn dispatch(cmd: Command) -> Result<Status, CliError> {
    match cmd {
        Command::Calibrate(p) => go(p.clone(), p.config, |p| p.threads, run::calibrate),
        Command::Field(p) => go(p.clone(), p.config, |p| p.threads, run::field),
        Command::Gmc(p) => go(p.clone(), p.config, |p| p.threads, run::gmc),
        Command::Simulate(p) => go(p.clone(), p.config, |p| p.threads, run::simulate),
        Command::Spectrum(p) => go(p.clone(), p.config, |p| p.threads, run::spectrum),
        Command::Mixing(p) => go(p.clone(), p.config, |p| p.threads, run::mixing),
        Command::Frozen(p) => go(p.clone(), p.config, |p| p.threads, run::frozen),
        Command::Switchcheck(p) => go(p.clone(), p.config, |p| p.threads, run::switchcheck),
        Command::Regime(p) => go(p.clone(), p.config, |p| p.threads, run::regime),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                let _ = e.print();
                return ExitCode::from(1);
            }
            let rendered = e.to_string();
            let first = rendered.lines().next().unwrap_or("").trim_start_matches("error: ");
            eprintln!("{}", CliError::usage(first, ""));
            eprintln!("hint: run `ldp --help` or `ldp <command> --help`");
            return ExitCode::from(1);
        }
    };
    match dispatch(cli.command) {
        Ok(Status::Ok) => ExitCode::SUCCESS,
        Ok(Status::Soft(msg)) => {
            eprintln!("check out of band: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("{e}");
            eprintln!("hint: {}", e.hint);
            ExitCode::from(1)
        }
    }
}
