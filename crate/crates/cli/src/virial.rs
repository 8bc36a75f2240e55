//! `virial`: excluded-volume table, scaling classes and series cross-checks.

use std::path::Path;

use platelat::expansion::{brute_force_log_z, mayer_log_z, BruteForce, SeriesEstimate};
use platelat::geometry::excluded_volume;
use platelat::{BoundaryMode, Orientation, ScalingClass, SimBox};
use serde::Serialize;

use crate::config::{RunConfig, FORMAT_VERSION};
use crate::output::{check_violations, prepare_dir, write_json, Failure};

#[derive(Serialize)]
struct ClassRow {
    class: ScalingClass,
    label: &'static str,
    exponent: f64,
    /// `k` raised to the class exponent.
    scale: f64,
    min: f64,
    max: f64,
    pairs: Vec<[Orientation; 2]>,
}

#[derive(Serialize)]
struct CrossCheck {
    region: [f64; 3],
    z: f64,
    mayer: SeriesEstimate,
    brute_force: SeriesEstimate,
    difference: f64,
    /// Remainders plus three statistical standard errors.
    allowed: f64,
    agree: bool,
}

#[derive(Serialize)]
struct Report {
    format_version: u32,
    k: f64,
    alpha: f64,
    orientations: [Orientation; 6],
    excluded_volume: Vec<Vec<f64>>,
    symmetric: bool,
    classes: Vec<ClassRow>,
    /// Every class lies strictly below the next one.
    ordering_holds: bool,
    orientations_used: Vec<Orientation>,
    cross_checks: Vec<CrossCheck>,
}

pub fn run(cfg: &RunConfig, out: &Path) -> Result<(), Failure> {
    let params = cfg.params()?;
    let matrix: Vec<Vec<f64>> = Orientation::ALL
        .iter()
        .map(|&a| Orientation::ALL.iter().map(|&b| excluded_volume(a, b, &params)).collect())
        .collect();
    let symmetric = (0..6).all(|i| (0..6).all(|j| matrix[i][j] == matrix[j][i]));

    let mut classes: Vec<ClassRow> = Vec::new();
    for class in [
        ScalingClass::SameOrientation,
        ScalingClass::SameType,
        ScalingClass::ParallelMajor,
        ScalingClass::Crossed,
    ] {
        let pairs: Vec<[Orientation; 2]> = Orientation::ALL
            .iter()
            .flat_map(|&a| Orientation::ALL.iter().map(move |&b| [a, b]))
            .filter(|[a, b]| a.index() <= b.index() && ScalingClass::of(*a, *b) == class)
            .collect();
        let values: Vec<f64> = pairs.iter().map(|[a, b]| excluded_volume(*a, *b, &params)).collect();
        let exponent = class.exponent(params.alpha());
        classes.push(ClassRow {
            class,
            label: class.label(),
            exponent,
            scale: params.k().powf(exponent),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            pairs,
        });
    }
    let ordering_holds = classes
        .windows(2)
        .all(|w| w[0].max < w[1].min && w[0].exponent < w[1].exponent);

    let z = cfg.expansion_z();
    let orientations = cfg.orientations();
    let e = &cfg.expansion;
    let opts = BruteForce {
        n_max: e.n_max,
        tolerance: e.tolerance,
        mc_samples: e.mc_samples,
        seed: cfg.run.seed,
        hard_core: true,
    };
    let mut checks = Vec::new();
    let mut violations = Vec::new();
    for region in cfg.regions()? {
        let b = SimBox::cuboid(region, BoundaryMode::Open)?;
        let mayer = mayer_log_z(&params, &b, &orientations, z, e.order)?;
        let brute = brute_force_log_z(&params, &b, &orientations, z, &opts)?;
        let difference = mayer.value - brute.value;
        let allowed = mayer.remainder
            + brute.remainder
            + 3.0 * mayer.stat_error.hypot(brute.stat_error)
            + 1e-12 * brute.value.abs();
        let agree = difference.abs() <= allowed;
        if !agree {
            violations.push(format!(
                "region {region:?}: Mayer and direct sums differ by {difference:e} > {allowed:e}"
            ));
        }
        checks.push(CrossCheck {
            region,
            z,
            mayer,
            brute_force: brute,
            difference,
            allowed,
            agree,
        });
    }
    if !symmetric {
        violations.push("excluded-volume matrix is not symmetric".into());
    }

    prepare_dir(out)?;
    write_json(
        out.join("virial.json"),
        &Report {
            format_version: FORMAT_VERSION,
            k: params.k(),
            alpha: params.alpha(),
            orientations: Orientation::ALL,
            excluded_volume: matrix,
            symmetric,
            classes,
            ordering_holds,
            orientations_used: orientations,
            cross_checks: checks,
        },
    )?;
    check_violations(&violations)
}
