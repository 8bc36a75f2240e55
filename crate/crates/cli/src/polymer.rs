//! `polymer-check`: truncated cluster expansion against exact partition
//! functions of random polymer models.

use std::path::Path;

use platelat::expansion::polymer::{polymer_log_z_cluster, polymer_z_exact, PolymerModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{RunConfig, FORMAT_VERSION};
use crate::output::{check_violations, prepare_dir, write_json, Failure};

#[derive(Serialize)]
struct ModelRow {
    index: usize,
    polymers: usize,
    log_z_exact: f64,
    log_z_cluster: f64,
    error: f64,
    remainder: f64,
    rigorous: bool,
    ok: bool,
}

#[derive(Serialize)]
struct Report {
    format_version: u32,
    seed: u64,
    dims: [usize; 3],
    max_cluster_size: usize,
    models: usize,
    passed: usize,
    rows: Vec<ModelRow>,
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let e = &cfg.expansion;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.run.seed);
    let mut rows = Vec::new();
    let mut violations = Vec::new();
    for index in 0..e.polymer_models {
        let model = PolymerModel::random(
            e.polymer_dims,
            e.polymers_per_model,
            e.polymer_max_size,
            e.polymer_max_activity,
            &mut rng,
        )?;
        let z = polymer_z_exact(&model)?;
        let exact = z.ln();
        let est = polymer_log_z_cluster(&model, e.max_cluster_size)?;
        let error = (est.value - exact).abs();
        // Rounding of the exact sum sets a floor on the comparison.
        let ok = error <= est.remainder + 4.0 * f64::EPSILON * z;
        if !ok {
            violations.push(format!(
                "model {index}: error {error:e} exceeds remainder {:e}",
                est.remainder
            ));
        }
        rows.push(ModelRow {
            index,
            polymers: model.len(),
            log_z_exact: exact,
            log_z_cluster: est.value,
            error,
            remainder: est.remainder,
            rigorous: est.rigorous,
            ok,
        });
    }
    prepare_dir(out)?;
    write_json(
        out.join("polymer_check.json"),
        &Report {
            format_version: FORMAT_VERSION,
            seed: cfg.run.seed,
            dims: e.polymer_dims,
            max_cluster_size: e.max_cluster_size,
            models: rows.len(),
            passed: rows.iter().filter(|r| r.ok).count(),
            rows,
        },
    )?;
    check_violations(&violations)
}
