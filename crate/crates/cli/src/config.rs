//! Run configuration: one JSON document, validated before any work starts.

use std::path::Path;

use platelat::coarsegrain::{pebbles_per_side, BlockLattice};
use platelat::expansion::polymer::{MAX_CLUSTER_SIZE, MAX_LATTICE_BLOCKS, MAX_POLYMER_SIZE};
use platelat::gcmc::{MoveWeights, PairBins, RunParams};
use platelat::{BoundaryMode, Error, ModelParams, Orientation, PlateType, Result, SimBox};
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "format_version")]
    pub format_version: u32,
    pub model: ModelSection,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub sim_box: Option<BoxSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub expansion: ExpansionSection,
}

fn format_version() -> u32 {
    FORMAT_VERSION
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub k: f64,
    pub alpha: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSection {
    #[serde(rename = "L")]
    pub side: f64,
    pub mode: BoundaryMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub z: f64,
    pub sweeps: u64,
    pub seed: u64,
    /// Independent chains, one generator stream each.
    pub replicas: u64,
    pub move_weights: MoveWeights,
    pub boundary_q: Option<u8>,
    pub boundary_depth: usize,
    pub snapshot_stride: u64,
    pub record_stride: u64,
    pub burn_in_fraction: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        let d = RunParams::default();
        Self {
            z: d.z,
            sweeps: d.sweeps,
            seed: d.seed,
            replicas: 1,
            move_weights: d.move_weights,
            boundary_q: None,
            boundary_depth: d.boundary_depth,
            snapshot_stride: d.snapshot_stride,
            record_stride: d.record_stride,
            burn_in_fraction: d.burn_in_fraction,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub contours: bool,
    pub pebbles: bool,
    pub pair_correlation: bool,
    /// Defaults to width `k/4` out to half the box side.
    pub bins: Option<PairBins>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExpansionSection {
    /// Activity of the expansion cross-checks; falls back to `run.z`.
    pub z: Option<f64>,
    /// Open regions compared between the Mayer series and direct
    /// summation; empty means a single block of side `k/2`.
    pub regions: Vec<[f64; 3]>,
    /// Orientations allowed in the expansions; empty means all six.
    pub orientations: Vec<Orientation>,
    pub order: usize,
    pub n_max: usize,
    pub mc_samples: u64,
    pub tolerance: f64,
    pub polymer_models: usize,
    pub polymer_dims: [usize; 3],
    pub polymers_per_model: usize,
    pub polymer_max_size: usize,
    pub polymer_max_activity: f64,
    pub max_cluster_size: usize,
}

impl Default for ExpansionSection {
    fn default() -> Self {
        Self {
            z: None,
            regions: Vec::new(),
            orientations: Vec::new(),
            order: 2,
            n_max: 3,
            mc_samples: 200_000,
            tolerance: 1e-3,
            polymer_models: 100,
            polymer_dims: [4, 4, 4],
            polymers_per_model: 6,
            polymer_max_size: 3,
            polymer_max_activity: 1e-3,
            max_cluster_size: 4,
        }
    }
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.model.k, self.model.alpha)
    }

    pub fn sim_box(&self) -> Result<SimBox> {
        let b = self
            .sim_box
            .as_ref()
            .ok_or_else(|| invalid("config has no box section"))?;
        SimBox::cubic(b.side, b.mode)
    }

    pub fn boundary(&self) -> Result<Option<PlateType>> {
        match self.run.boundary_q {
            None => Ok(None),
            Some(q) => PlateType::from_number(q)
                .map(Some)
                .ok_or_else(|| invalid(format!("boundary_q = {q} must be 1, 2 or 3"))),
        }
    }

    pub fn run_params(&self, replica: u64) -> Result<RunParams> {
        let r = &self.run;
        let p = RunParams {
            z: r.z,
            sweeps: r.sweeps,
            seed: r.seed,
            replica,
            move_weights: r.move_weights,
            boundary: self.boundary()?,
            boundary_depth: r.boundary_depth,
            burn_in_fraction: r.burn_in_fraction,
            record_stride: r.record_stride,
            snapshot_stride: r.snapshot_stride,
            hard_core: true,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn bins(&self) -> Result<PairBins> {
        let params = self.params()?;
        let bins = match self.analysis.bins {
            Some(b) => b,
            None => {
                let width = params.k() / 4.0;
                let half = self.sim_box()?.side() / 2.0;
                PairBins {
                    width,
                    count: ((half / width).floor() as usize).max(1),
                }
            }
        };
        if !(bins.width > 0.0 && bins.width.is_finite()) || bins.count == 0 {
            return Err(invalid("bins need a positive width and count"));
        }
        Ok(bins)
    }

    pub fn expansion_z(&self) -> f64 {
        self.expansion.z.unwrap_or(self.run.z)
    }

    pub fn orientations(&self) -> Vec<Orientation> {
        if self.expansion.orientations.is_empty() {
            Orientation::ALL.to_vec()
        } else {
            self.expansion.orientations.clone()
        }
    }

    pub fn regions(&self) -> Result<Vec<[f64; 3]>> {
        if self.expansion.regions.is_empty() {
            let ell = self.params()?.block_side();
            Ok(vec![[ell; 3]])
        } else {
            Ok(self.expansion.regions.clone())
        }
    }

    /// Checks every field against the preconditions of the operations it
    /// feeds.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(invalid(format!(
                "format_version {} is not supported (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        let params = self.params()?;
        self.run_params(0)?;
        if self.run.replicas == 0 {
            return Err(invalid("replicas must be at least 1"));
        }
        if let Some(b) = &self.sim_box {
            let sim_box = SimBox::cubic(b.side, b.mode)?;
            platelat::PlateSet::new(params.clone(), sim_box.clone())?;
            if self.run.boundary_q.is_some() {
                if b.mode != BoundaryMode::Open {
                    return Err(invalid("boundary_q needs an open box"));
                }
                BlockLattice::new(&params, &sim_box)?;
            }
            if self.analysis.contours {
                if b.mode != BoundaryMode::Open {
                    return Err(invalid("contour analysis needs an open box"));
                }
                let lat = BlockLattice::new(&params, &sim_box)?;
                if !lat.smoothing_aligned() {
                    return Err(invalid(format!(
                        "contour analysis needs (L/ℓ + 2) divisible by 8, L/ℓ = {}",
                        lat.n()
                    )));
                }
            }
            if self.analysis.pebbles {
                BlockLattice::new(&params, &sim_box)?;
                pebbles_per_side(&params)?;
            }
            if self.analysis.pair_correlation {
                let bins = self.bins()?;
                if b.mode == BoundaryMode::Periodic && bins.r_max() > b.side / 2.0 {
                    return Err(invalid("pair-correlation range exceeds half the box"));
                }
            }
        } else if self.run.sweeps > 0
            || self.analysis.contours
            || self.analysis.pebbles
            || self.analysis.pair_correlation
        {
            return Err(invalid("a run or analysis needs a box section"));
        }
        let e = &self.expansion;
        if let Some(z) = e.z {
            if !(z.is_finite() && z >= 0.0) {
                return Err(invalid("expansion.z must be ≥ 0"));
            }
        }
        for r in &e.regions {
            if r.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return Err(invalid(format!("region {r:?} needs positive sides")));
            }
        }
        if !(1..=2).contains(&e.order) {
            return Err(invalid("expansion.order must be 1 or 2"));
        }
        if e.n_max > 4 {
            return Err(invalid("expansion.n_max must be at most 4"));
        }
        if !(e.tolerance > 0.0) {
            return Err(invalid("expansion.tolerance must be positive"));
        }
        if e.polymer_dims.iter().product::<usize>() == 0
            || e.polymer_dims.iter().product::<usize>() > MAX_LATTICE_BLOCKS
        {
            return Err(invalid(format!(
                "polymer lattice must hold 1..={MAX_LATTICE_BLOCKS} blocks"
            )));
        }
        if !(1..=MAX_POLYMER_SIZE).contains(&e.polymer_max_size) {
            return Err(invalid(format!("polymer_max_size must be in 1..={MAX_POLYMER_SIZE}")));
        }
        if !(1..=MAX_CLUSTER_SIZE).contains(&e.max_cluster_size) {
            return Err(invalid(format!("max_cluster_size must be in 1..={MAX_CLUSTER_SIZE}")));
        }
        if !(e.polymer_max_activity.is_finite() && e.polymer_max_activity >= 0.0) {
            return Err(invalid("polymer_max_activity must be ≥ 0"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FULL: &str = r#"{
        "model": {"k": 8, "alpha": 0.8},
        "box": {"L": 56, "mode": "open"},
        "run": {"z": 0.001, "sweeps": 10, "seed": 7, "boundary_q": 3,
                "boundary_depth": 2, "snapshot_stride": 5},
        "analysis": {"contours": true, "pair_correlation": true,
                     "bins": {"width": 2.0, "count": 10}},
        "expansion": {"z": 0.0001, "regions": [[4, 4, 4]], "orientations": ["3a", "3b"]}
    }"#;

    #[test]
    fn round_trip_is_identity() {
        let a = RunConfig::from_json(FULL).unwrap();
        let b = RunConfig::from_json(&a.to_json()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json(), b.to_json());
        let minimal = RunConfig::from_json(r#"{"model": {"k": 8, "alpha": 0.8}}"#).unwrap();
        assert_eq!(RunConfig::from_json(&minimal.to_json()).unwrap(), minimal);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = FULL.replace("\"seed\": 7", "\"seed\": 7, \"temperature\": 1");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Parse(_))));
        let bad = r#"{"model": {"k": 8, "alpha": 0.8, "beta": 1}}"#;
        assert!(RunConfig::from_json(bad).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (from, to) in [
            ("\"boundary_q\": 3", "\"boundary_q\": 4"),
            ("\"z\": 0.001", "\"z\": -1"),
            ("\"L\": 56", "\"L\": 57"),
            ("\"mode\": \"open\"", "\"mode\": \"periodic\""),
            ("\"alpha\": 0.8", "\"alpha\": 1.5"),
        ] {
            let text = FULL.replace(from, to);
            assert!(RunConfig::from_json(&text).is_err(), "{from} -> {to}");
        }
    }
}
