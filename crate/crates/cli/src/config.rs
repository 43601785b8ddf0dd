//! Merges a `key = value` config file into the argument list so that
//! explicit flags override file values, which override built-in defaults.

use std::path::Path;

use clap::Parser;

use crate::{Cli, CliError};

const GLOBAL_WITH_VALUE: [&str; 2] = ["--threads", "--config"];

/// Parses a config file into flag arguments. Keys are flag names with or
/// without leading dashes (`_` and `-` are interchangeable); `true` and
/// `false` toggle switches; `#` starts a comment.
pub fn config_args(path: &Path) -> Result<Vec<String>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Format {
                path: path.display().to_string(),
                line: idx + 1,
                message: "expected key = value".into(),
            });
        };
        let key = key.trim().trim_start_matches('-').replace('_', "-");
        let value = value.trim().trim_matches('"');
        match value {
            "true" => out.push(format!("--{key}")),
            "false" => {}
            _ => {
                out.push(format!("--{key}"));
                out.push(value.to_string());
            }
        }
    }
    Ok(out)
}

/// Index of the subcommand token in `argv`.
fn subcommand_index(argv: &[String]) -> Option<usize> {
    let mut i = 1;
    while i < argv.len() {
        let a = argv[i].as_str();
        if GLOBAL_WITH_VALUE.contains(&a) {
            i += 2;
        } else if a.starts_with('-') {
            i += 1;
        } else {
            return Some(i);
        }
    }
    None
}

/// Returns the resolved subcommand arguments (config merged, global flags
/// removed) and the parsed command line.
pub fn resolve(argv: Vec<String>) -> Result<Result<(Vec<String>, Cli), clap::Error>, CliError> {
    let mut config = None;
    let mut rest = Vec::with_capacity(argv.len());
    let mut it = argv.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            config = it.next();
        } else if let Some(v) = a.strip_prefix("--config=") {
            config = Some(v.to_string());
        } else {
            rest.push(a);
        }
    }
    let mut merged = rest.clone();
    if let (Some(path), Some(idx)) = (config, subcommand_index(&rest)) {
        let extra = config_args(Path::new(&path))?;
        merged.splice(idx + 1..idx + 1, extra);
    }
    let cli = match Cli::try_parse_from(&merged) {
        Ok(cli) => cli,
        Err(e) => return Ok(Err(e)),
    };
    let resolved = match subcommand_index(&merged) {
        Some(idx) => merged[idx..]
            .iter()
            .filter(|a| a.as_str() != "--json-errors")
            .cloned()
            .collect(),
        None => Vec::new(),
    };
    Ok(Ok((strip_globals(resolved), cli)))
}

fn strip_globals(args: Vec<String>) -> Vec<String> {
    let mut out = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--threads" {
            it.next();
        } else if !a.starts_with("--threads=") {
            out.push(a);
        }
    }
    out
}
