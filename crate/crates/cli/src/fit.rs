//! `fit-decay`: exponential fits of binned correlation data.

use std::path::Path;

use platelat::gcmc::fit_decay;
use platelat::stats::Estimate;
use platelat::Error;
use serde::{Deserialize, Serialize};

use crate::config::FORMAT_VERSION;
use crate::output::{prepare_dir, write_json, Failure};

#[derive(Deserialize)]
struct Row {
    #[serde(default)]
    o1: Option<String>,
    #[serde(default)]
    o2: Option<String>,
    r: f64,
    value: f64,
    error: f64,
}

#[derive(Serialize)]
struct FitResult {
    #[serde(skip_serializing_if = "Option::is_none")]
    o1: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    o2: Option<String>,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    window: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    residuals: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    noise_floor: Option<f64>,
}

#[derive(Serialize)]
struct Report {
    format_version: u32,
    fits: Vec<FitResult>,
}

type Key = (Option<String>, Option<String>);

pub fn run(input: &Path, out: &Path) -> Result<(), Failure> {
    let mut reader = csv::Reader::from_path(input)?;
    let mut groups: Vec<(Key, Vec<(f64, Estimate)>)> = Vec::new();
    for row in reader.deserialize() {
        let row: Row = row?;
        let key = (row.o1, row.o2);
        let point = (row.r, Estimate::new(row.value, row.error));
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(point),
            None => groups.push((key, vec![point])),
        }
    }
    if groups.is_empty() {
        return Err(Failure::Config(format!("{}: no correlation data", input.display())));
    }
    let mut fits = Vec::new();
    for ((o1, o2), series) in groups {
        fits.push(match fit_decay(&series) {
            Ok(f) => FitResult {
                o1,
                o2,
                status: "ok",
                reason: None,
                xi: Some(f.xi),
                xi_error: Some(f.xi_error),
                amplitude: Some(f.amplitude),
                window: Some(f.window),
                residuals: Some(f.residuals),
                noise_floor: Some(f.noise_floor),
            },
            Err(Error::Undefined(reason)) => FitResult {
                o1,
                o2,
                status: "no_decay_measurable",
                reason: Some(reason),
                xi: None,
                xi_error: None,
                amplitude: None,
                window: None,
                residuals: None,
                noise_floor: None,
            },
            Err(e) => return Err(e.into()),
        });
    }
    prepare_dir(out)?;
    write_json(
        out.join("fit.json"),
        &Report {
            format_version: FORMAT_VERSION,
            fits,
        },
    )
}
