//! Command-line driver for `manifold-core`: file formats, run manifests and
//! the `manifold` subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod io;
pub mod manifest;

use serde::Serialize;

pub use args::Cli;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] manifold_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: invalid JSON: {message}")]
    Json { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{what} digest mismatch for {path}: manifest {expected}, found {found}")]
    DigestMismatch {
        what: &'static str,
        path: String,
        expected: String,
        found: String,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Core(e) if e.is_numerical() => "numerical",
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
            _ => "validation",
        }
    }
}

#[derive(Serialize)]
struct JsonError<'a> {
    kind: &'a str,
    message: String,
    exit_code: i32,
}

/// Version string with the build hash.
pub fn version() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), " (", env!("MANIFOLD_BUILD_HASH"), ")")
}

/// Runs the CLI on `argv` (program name first) and returns the exit code.
pub fn main_with_args(argv: Vec<String>) -> i32 {
    let json_errors = argv.iter().any(|a| a == "--json-errors");
    let report = |err: &CliError| {
        if json_errors {
            let body = JsonError {
                kind: err.kind(),
                message: err.to_string(),
                exit_code: err.exit_code(),
            };
            eprintln!("{}", serde_json::json!({ "error": body }));
        } else {
            eprintln!("error: {err}");
        }
        err.exit_code()
    };
    let (resolved, cli) = match config::resolve(argv) {
        Ok(Ok(v)) => v,
        Ok(Err(clap_err)) => {
            use clap::error::ErrorKind;
            return match clap_err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = clap_err.print();
                    0
                }
                _ if json_errors => report(&CliError::Usage(clap_err.to_string().trim().to_string())),
                _ => {
                    let _ = clap_err.print();
                    1
                }
            };
        }
        Err(e) => return report(&e),
    };
    if let Some(t) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            return report(&CliError::Usage(format!("cannot configure {t} threads: {e}")));
        }
    }
    match commands::dispatch(&cli, &resolved) {
        Ok(()) => 0,
        Err(e) => report(&e),
    }
}
