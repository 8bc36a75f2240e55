//! Failure classes, exit codes and file writing.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use platelat::Error;
use serde::Serialize;

#[derive(Debug)]
pub enum Failure {
    /// Malformed or out-of-range configuration or input.
    Config(String),
    /// A checked invariant failed; outputs were still written.
    Invariant(String),
    Insufficient(String),
    Runtime(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Invariant(_) => 3,
            Failure::Insufficient(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Invariant(m) => write!(f, "invariant violated: {m}"),
            Failure::Insufficient(m) => write!(f, "insufficient statistics: {m}"),
            Failure::Runtime(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::InvalidParameter(_)
            | Error::OutsideBox(_)
            | Error::Parse(_)
            | Error::Incompatible(_)
            | Error::TooLarge(_)
            | Error::NotConvergent(_) => Failure::Config(msg),
            Error::InsufficientStatistics(_) => Failure::Insufficient(msg),
            Error::Inconsistent(_) | Error::ImpossibleConfiguration(_) => Failure::Invariant(msg),
            _ => Failure::Runtime(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(format!("I/O: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            Failure::Runtime(format!("I/O: {e}"))
        } else {
            Failure::Config(format!("CSV: {e}"))
        }
    }
}

pub fn prepare_dir(out: &Path) -> Result<(), Failure> {
    fs::create_dir_all(out)
        .map_err(|e| Failure::Runtime(format!("cannot create {}: {e}", out.display())))
}

pub fn write_json<T: Serialize>(path: PathBuf, value: &T) -> Result<(), Failure> {
    let mut w = BufWriter::new(File::create(&path)?);
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Turns collected violations into a failure after outputs are written.
pub fn check_violations(violations: &[String]) -> Result<(), Failure> {
    match violations.first() {
        None => Ok(()),
        Some(first) => Err(Failure::Invariant(format!(
            "{} violation(s), first: {first}",
            violations.len()
        ))),
    }
}
