//! Per-snapshot coarse-graining passes: contours and pebbles.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use platelat::coarsegrain::{
    assign_spins, assign_spins_with_boundary, atypical_threshold, bad_region,
    contour_invariant_violations, extract_contours, pebble_classify, BlockLattice, ContourReport,
    SpinField,
};
use platelat::configuration::{read_snapshots, Snapshot};
use platelat::{BoundaryMode, ModelParams, Plate, PlateType, SimBox};
use serde::Serialize;

use crate::config::{RunConfig, FORMAT_VERSION};
use crate::output::{check_violations, prepare_dir, write_json, Failure};

/// Coarse-graining context of one box.
pub struct Analyzer {
    params: ModelParams,
    lattice: BlockLattice,
    boundary: Option<(PlateType, usize)>,
    threshold: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ContourPass {
    pub sweep: u64,
    pub contours: Vec<ContourReport>,
    pub bad_block_fraction: f64,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PebbleBlock {
    pub block: [usize; 3],
    pub types: u32,
    pub atypical: usize,
    pub tile_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct PebblePass {
    pub sweep: u64,
    pub blocks: Vec<PebbleBlock>,
    pub violations: Vec<String>,
}

impl Analyzer {
    pub fn new(
        params: &ModelParams,
        sim_box: &SimBox,
        boundary: Option<(PlateType, usize)>,
    ) -> Result<Self, Failure> {
        Ok(Self {
            params: params.clone(),
            lattice: BlockLattice::new(params, sim_box)?,
            boundary,
            threshold: atypical_threshold(params),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn spins(&self, plates: &[Plate]) -> SpinField {
        match self.boundary {
            Some((q, depth)) => assign_spins_with_boundary(plates, &self.lattice, q, depth),
            None => assign_spins(plates, &self.lattice),
        }
    }

    pub fn contours(&self, snap: &Snapshot) -> Result<ContourPass, Failure> {
        let sigma = self.spins(&snap.plates);
        let violations = contour_invariant_violations(&sigma, &snap.plates, &self.lattice)?;
        let region = bad_region(&sigma, &self.lattice)?;
        let bad = region.b.iter().filter(|&&x| x).count();
        let contours = match extract_contours(&sigma, &snap.plates, &self.lattice) {
            Ok(cs) => cs.iter().map(|c| c.report(&self.lattice)).collect(),
            // Already listed among the violations.
            Err(_) => Vec::new(),
        };
        Ok(ContourPass {
            sweep: snap.sweep,
            contours,
            bad_block_fraction: bad as f64 / self.lattice.len() as f64,
            violations,
        })
    }

    /// Classifies every block holding at least two plate types.
    pub fn pebbles(&self, snap: &Snapshot) -> Result<PebblePass, Failure> {
        let mut by_block: BTreeMap<usize, Vec<Plate>> = BTreeMap::new();
        for p in &snap.plates {
            by_block
                .entry(self.lattice.block_of(&p.center))
                .or_default()
                .push(*p);
        }
        let mut blocks = Vec::new();
        let mut violations = Vec::new();
        for (&b, plates) in &by_block {
            let types = plates
                .iter()
                .fold(0u8, |m, p| m | 1 << p.plate_type().index())
                .count_ones();
            if types < 2 {
                continue;
            }
            let grid = pebble_classify(b, plates, &self.params, &self.lattice)?;
            let atypical = grid.count_atypical();
            let tiles = grid.check_tile_properties();
            let coords = self.lattice.coords(b);
            if (atypical as f64) < self.threshold - 1e-9 {
                violations.push(format!(
                    "block {coords:?}: {atypical} atypical pebbles, below {}",
                    self.threshold
                ));
            }
            for v in &tiles.violations {
                violations.push(format!("block {coords:?}: {v:?}"));
            }
            blocks.push(PebbleBlock {
                block: coords,
                types,
                atypical,
                tile_violations: tiles.violations.len(),
            });
        }
        Ok(PebblePass {
            sweep: snap.sweep,
            blocks,
            violations,
        })
    }
}

#[derive(Serialize)]
struct FileReport<T> {
    file: String,
    snapshots: Vec<T>,
}

#[derive(Serialize)]
struct Report<T> {
    format_version: u32,
    threshold: Option<f64>,
    files: Vec<FileReport<T>>,
}

fn boundary_of(cfg: Option<&RunConfig>) -> Result<Option<(PlateType, usize)>, Failure> {
    match cfg {
        None => Ok(None),
        Some(c) => Ok(c.boundary()?.map(|q| (q, c.run.boundary_depth))),
    }
}

fn load(path: &Path) -> Result<(ModelParams, SimBox, Vec<Snapshot>), Failure> {
    let f = File::open(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let (header, snaps) = read_snapshots(BufReader::new(f))?;
    Ok((header.params()?, header.sim_box()?, snaps))
}

pub fn contours(cfg: Option<&RunConfig>, inputs: &[PathBuf], out: &Path) -> Result<(), Failure> {
    let boundary = boundary_of(cfg)?;
    let mut files = Vec::new();
    let mut violations = Vec::new();
    for path in inputs {
        let (params, sim_box, snaps) = load(path)?;
        if sim_box.mode() != BoundaryMode::Open {
            return Err(Failure::Config(format!(
                "{}: contours need snapshots from an open box",
                path.display()
            )));
        }
        let a = Analyzer::new(&params, &sim_box, boundary)?;
        let mut passes = Vec::new();
        for s in &snaps {
            let pass = a.contours(s)?;
            violations.extend(
                pass.violations
                    .iter()
                    .map(|v| format!("{} sweep {}: {v}", path.display(), s.sweep)),
            );
            passes.push(pass);
        }
        files.push(FileReport {
            file: path.display().to_string(),
            snapshots: passes,
        });
    }
    prepare_dir(out)?;
    write_json(
        out.join("contours.json"),
        &Report {
            format_version: FORMAT_VERSION,
            threshold: None,
            files,
        },
    )?;
    check_violations(&violations)
}

pub fn pebbles(cfg: Option<&RunConfig>, inputs: &[PathBuf], out: &Path) -> Result<(), Failure> {
    let boundary = boundary_of(cfg)?;
    let mut files = Vec::new();
    let mut violations = Vec::new();
    let mut threshold = None;
    for path in inputs {
        let (params, sim_box, snaps) = load(path)?;
        let a = Analyzer::new(&params, &sim_box, boundary)?;
        threshold = Some(a.threshold());
        let mut passes = Vec::new();
        for s in &snaps {
            let pass = a.pebbles(s)?;
            violations.extend(
                pass.violations
                    .iter()
                    .map(|v| format!("{} sweep {}: {v}", path.display(), s.sweep)),
            );
            passes.push(pass);
        }
        files.push(FileReport {
            file: path.display().to_string(),
            snapshots: passes,
        });
    }
    prepare_dir(out)?;
    write_json(
        out.join("pebbles.json"),
        &Report {
            format_version: FORMAT_VERSION,
            threshold,
            files,
        },
    )?;
    check_violations(&violations)
}
