//! `simulate`: sampler runs, observable stream, snapshots and summary.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::thread;

use platelat::configuration::{write_snapshots, Snapshot, SnapshotHeader};
use platelat::gcmc::{self, fit_decay, pair_correlation, MoveTally, ObservableAccumulator, RunOutput};
use platelat::stats::Estimate;
use platelat::{Error, Orientation, PlateType};
use serde::Serialize;

use crate::analyze::Analyzer;
use crate::config::{RunConfig, FORMAT_VERSION};
use crate::output::{check_violations, prepare_dir, write_json, Failure};

pub const OBSERVABLE_COLUMNS: [&str; 14] = [
    "replica",
    "sweep",
    "N",
    "N_1a",
    "N_1b",
    "N_2a",
    "N_2b",
    "N_3a",
    "N_3b",
    "S",
    "acc_insert",
    "acc_delete",
    "acc_translate",
    "acc_reorient",
];

/// Violations listed verbatim in the summary; the rest are only counted.
const MAX_LISTED_VIOLATIONS: usize = 100;

#[derive(Serialize)]
struct ContourSummary {
    snapshots: usize,
    /// Number of snapshots per contour count.
    count_histogram: BTreeMap<usize, u64>,
    bad_block_fraction: f64,
    violations: usize,
}

#[derive(Serialize)]
struct PebbleSummary {
    snapshots: usize,
    mixed_blocks: usize,
    threshold: f64,
    min_atypical: Option<usize>,
    below_threshold: usize,
    tile_violations: usize,
}

#[derive(Serialize)]
struct DecaySummary {
    o1: Orientation,
    o2: Orientation,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi: Option<Estimate>,
    #[serde(skip_serializing_if = "Option::is_none")]
    amplitude: Option<f64>,
}

#[derive(Serialize)]
struct Summary {
    format_version: u32,
    k: f64,
    alpha: f64,
    #[serde(rename = "L")]
    side: f64,
    mode: platelat::BoundaryMode,
    z: f64,
    sweeps: u64,
    seed: u64,
    replicas: u64,
    boundary_q: Option<u8>,
    steps_per_sweep: u64,
    samples: usize,
    observable_columns: Vec<&'static str>,
    acceptance: BTreeMap<&'static str, f64>,
    densities: BTreeMap<String, Estimate>,
    total_density: Estimate,
    type_fractions: BTreeMap<String, Estimate>,
    order_parameter: Estimate,
    mixed_block_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    contours: Option<ContourSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pebbles: Option<PebbleSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pair_correlation: Option<Vec<DecaySummary>>,
    violations: Vec<String>,
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let params = cfg.params()?;
    let sim_box = cfg.sim_box()?;
    let runs: Vec<_> = (0..cfg.run.replicas)
        .map(|r| cfg.run_params(r))
        .collect::<Result<_, _>>()?;
    prepare_dir(out)?;
    std::fs::write(out.join("config.json"), cfg.to_json() + "\n")?;

    let results: Vec<platelat::Result<(RunOutput, Vec<Snapshot>)>> = thread::scope(|s| {
        let handles: Vec<_> = runs
            .iter()
            .map(|rp| {
                let (params, sim_box) = (&params, &sim_box);
                s.spawn(move || gcmc::run(params, sim_box, rp))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("replica thread panicked"))
            .collect()
    });
    let mut outputs = Vec::new();
    for r in results {
        outputs.push(r?);
    }

    let mut csv = csv::Writer::from_path(out.join("observables.csv"))?;
    csv.write_record(OBSERVABLE_COLUMNS)?;
    for (r, (o, _)) in outputs.iter().enumerate() {
        for row in &o.rows {
            let mut rec = vec![r.to_string(), row.sweep.to_string(), row.total().to_string()];
            rec.extend(row.counts.iter().map(|c| c.to_string()));
            rec.push(fmt_opt(row.order_parameter));
            rec.extend(row.acceptance.iter().map(|a| a.to_string()));
            csv.write_record(&rec)?;
        }
    }
    csv.flush()?;

    if cfg.run.snapshot_stride > 0 {
        let header = SnapshotHeader::new(&params, &sim_box, cfg.run.seed);
        for (r, (_, snaps)) in outputs.iter().enumerate() {
            let name = if outputs.len() == 1 {
                "snapshots.jsonl".to_string()
            } else {
                format!("snapshots-{r}.jsonl")
            };
            let mut w = BufWriter::new(File::create(out.join(name))?);
            write_snapshots(&mut w, &header, snaps)?;
            w.flush()?;
        }
    }

    let mut acc = ObservableAccumulator::new(sim_box.volume());
    let mut tallies = [MoveTally::default(); 4];
    for (o, _) in &outputs {
        acc.merge(o.accumulator.clone())?;
        for (t, u) in tallies.iter_mut().zip(o.tallies) {
            t.proposed += u.proposed;
            t.accepted += u.accepted;
        }
    }
    let snapshots: Vec<&Snapshot> = outputs.iter().flat_map(|(_, s)| s).collect();
    let mut violations = Vec::new();

    let a = &cfg.analysis;
    let analyzer = if a.contours || a.pebbles {
        let boundary = cfg.boundary()?.map(|q| (q, cfg.run.boundary_depth));
        Some(Analyzer::new(&params, &sim_box, boundary)?)
    } else {
        None
    };
    let contours = match (&analyzer, a.contours) {
        (Some(an), true) => {
            let mut hist = BTreeMap::new();
            let mut bad = 0.0;
            let mut count = 0;
            for s in &snapshots {
                let pass = an.contours(s)?;
                *hist.entry(pass.contours.len()).or_insert(0) += 1;
                bad += pass.bad_block_fraction;
                count += pass.violations.len();
                violations.extend(pass.violations.into_iter().map(|v| format!("sweep {}: {v}", s.sweep)));
            }
            Some(ContourSummary {
                snapshots: snapshots.len(),
                count_histogram: hist,
                bad_block_fraction: if snapshots.is_empty() { 0.0 } else { bad / snapshots.len() as f64 },
                violations: count,
            })
        }
        _ => None,
    };
    let pebbles = match (&analyzer, a.pebbles) {
        (Some(an), true) => {
            let mut sum = PebbleSummary {
                snapshots: snapshots.len(),
                mixed_blocks: 0,
                threshold: an.threshold(),
                min_atypical: None,
                below_threshold: 0,
                tile_violations: 0,
            };
            for s in &snapshots {
                let pass = an.pebbles(s)?;
                for b in &pass.blocks {
                    sum.mixed_blocks += 1;
                    sum.min_atypical = Some(sum.min_atypical.map_or(b.atypical, |m| m.min(b.atypical)));
                    if (b.atypical as f64) < an.threshold() - 1e-9 {
                        sum.below_threshold += 1;
                    }
                    sum.tile_violations += b.tile_violations;
                }
                violations.extend(pass.violations.into_iter().map(|v| format!("sweep {}: {v}", s.sweep)));
            }
            Some(sum)
        }
        _ => None,
    };
    let pair = if a.pair_correlation {
        let owned: Vec<Snapshot> = snapshots.iter().map(|s| (*s).clone()).collect();
        let pc = pair_correlation(&owned, &sim_box, cfg.bins()?)?;
        let mut w = csv::Writer::from_path(out.join("pair_correlation.csv"))?;
        w.write_record(["o1", "o2", "r", "value", "error"])?;
        let mut fits = Vec::new();
        for o1 in Orientation::ALL {
            for o2 in Orientation::ALL {
                let series = pc.series(o1, o2);
                for (r, e) in &series {
                    w.write_record([o1.token().to_string(), o2.token().to_string(), r.to_string(), e.mean.to_string(), e.error.to_string()])?;
                }
                if o2.index() < o1.index() {
                    continue;
                }
                fits.push(match fit_decay(&series) {
                    Ok(f) => DecaySummary {
                        o1,
                        o2,
                        status: "ok",
                        xi: Some(Estimate::new(f.xi, f.xi_error)),
                        amplitude: Some(f.amplitude),
                    },
                    Err(Error::Undefined(_)) | Err(Error::InvalidParameter(_)) => DecaySummary {
                        o1,
                        o2,
                        status: "no_decay_measurable",
                        xi: None,
                        amplitude: None,
                    },
                    Err(e) => return Err(e.into()),
                });
            }
        }
        w.flush()?;
        Some(fits)
    } else {
        None
    };

    let summary = Summary {
        format_version: FORMAT_VERSION,
        k: params.k(),
        alpha: params.alpha(),
        side: sim_box.side(),
        mode: sim_box.mode(),
        z: cfg.run.z,
        sweeps: cfg.run.sweeps,
        seed: cfg.run.seed,
        replicas: cfg.run.replicas,
        boundary_q: cfg.run.boundary_q,
        steps_per_sweep: outputs.first().map_or(0, |(o, _)| o.steps_per_sweep),
        samples: acc.sample_count(),
        observable_columns: OBSERVABLE_COLUMNS.to_vec(),
        acceptance: ["insert", "delete", "translate", "reorient"]
            .into_iter()
            .zip(tallies.map(|t| t.rate()))
            .collect(),
        densities: Orientation::ALL
            .iter()
            .map(|&o| (o.token().to_string(), acc.orientation_density(o)))
            .collect(),
        total_density: acc.total_density(),
        type_fractions: PlateType::ALL
            .iter()
            .map(|&t| (t.number().to_string(), acc.type_fraction(t)))
            .collect(),
        order_parameter: acc.order_parameter(),
        mixed_block_fraction: acc.mixed_block_fraction(),
        contours,
        pebbles,
        pair_correlation: pair,
        violations: violations.iter().take(MAX_LISTED_VIOLATIONS).cloned().collect(),
    };
    write_json(out.join("summary.json"), &summary)?;
    check_violations(&violations)
}
