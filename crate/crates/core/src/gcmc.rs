//! Grand-canonical Metropolis sampling of the hard-plate gas and the
//! estimators built on it.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coarsegrain::{assign_spins, assign_spins_with_boundary, BlockLattice};
use crate::configuration::{BoundaryMode, PlateSet, SimBox, Snapshot};
use crate::error::{Error, Result};
use crate::expansion::quadrature::{configuration_integral, CenterBox};
use crate::geometry::{ModelParams, Orientation, Plate, PlateType};
use crate::stats::{self, Estimate};

/// Proposal probabilities of the four move kinds.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MoveWeights {
    pub insert: f64,
    pub delete: f64,
    pub translate: f64,
    pub reorient: f64,
}

impl Default for MoveWeights {
    fn default() -> Self {
        Self {
            insert: 0.35,
            delete: 0.35,
            translate: 0.2,
            reorient: 0.1,
        }
    }
}

impl MoveWeights {
    fn as_array(&self) -> [f64; 4] {
        [self.insert, self.delete, self.translate, self.reorient]
    }

    pub fn validate(&self) -> Result<()> {
        let w = self.as_array();
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::InvalidParameter("move weights must be nonnegative".into()));
        }
        if (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter("move weights must sum to 1".into()));
        }
        if self.insert != self.delete {
            return Err(Error::InvalidParameter(
                "insert and delete weights must be equal".into(),
            ));
        }
        if self.insert == 0.0 {
            return Err(Error::InvalidParameter("insert/delete weight must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MoveKind {
    Insert,
    Delete,
    Translate,
    Reorient,
}

impl MoveKind {
    pub const ALL: [MoveKind; 4] = [
        MoveKind::Insert,
        MoveKind::Delete,
        MoveKind::Translate,
        MoveKind::Reorient,
    ];

    fn index(self) -> usize {
        self as usize
    }
}

/// Parameters of one Markov chain.
#[derive(Clone, Debug, PartialEq)]
pub struct RunParams {
    pub z: f64,
    pub sweeps: u64,
    pub seed: u64,
    /// Stream of the generator; distinct replicas of one seed use distinct streams.
    pub replica: u64,
    pub move_weights: MoveWeights,
    /// Plates centered within `boundary_depth` blocks of the outside must be
    /// of this type.
    pub boundary: Option<PlateType>,
    pub boundary_depth: usize,
    /// Leading fraction of sweeps discarded.
    pub burn_in_fraction: f64,
    /// Sweeps between recorded samples.
    pub record_stride: u64,
    /// Sweeps between stored snapshots; 0 stores none.
    pub snapshot_stride: u64,
    /// Test hook: with `false` plates never interact.
    pub hard_core: bool,
}

impl Default for RunParams {
    fn default() -> Self {
        Self {
            z: 0.0,
            sweeps: 0,
            seed: 0,
            replica: 0,
            move_weights: MoveWeights::default(),
            boundary: None,
            boundary_depth: 8,
            burn_in_fraction: 0.2,
            record_stride: 1,
            snapshot_stride: 0,
            hard_core: true,
        }
    }
}

impl RunParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.z.is_finite() && self.z >= 0.0) {
            return Err(Error::InvalidParameter(format!("activity z = {} must be ≥ 0", self.z)));
        }
        self.move_weights.validate()?;
        if !(0.0..1.0).contains(&self.burn_in_fraction) {
            return Err(Error::InvalidParameter("burn-in fraction must be in [0, 1)".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidParameter("record stride must be positive".into()));
        }
        Ok(())
    }

    pub fn burn_in_sweeps(&self) -> u64 {
        (self.sweeps as f64 * self.burn_in_fraction).floor() as u64
    }
}

/// Moves per sweep: the expected particle number, capped by a dense-packing
/// scale `|Λ|/k^{1+α}` and at least one.
pub fn steps_per_sweep(z: f64, volume: f64, params: &ModelParams) -> u64 {
    let cap = volume / params.k().powf(1.0 + params.alpha());
    (6.0 * z * volume).min(cap).round().max(1.0) as u64
}

/// Metropolis acceptance of an insertion into a state with `n` plates.
pub fn insert_acceptance(z: f64, volume: f64, n: usize) -> f64 {
    (6.0 * z * volume / (n as f64 + 1.0)).min(1.0)
}

/// Metropolis acceptance of a deletion from a state with `n` plates.
pub fn delete_acceptance(z: f64, volume: f64, n: usize) -> f64 {
    let a = 6.0 * z * volume;
    if a == 0.0 {
        1.0
    } else {
        (n as f64 / a).min(1.0)
    }
}

#[derive(Clone, Debug)]
struct BoundaryRule {
    lattice: BlockLattice,
    q: PlateType,
    depth: usize,
}

impl BoundaryRule {
    fn allows(&self, p: &Plate) -> bool {
        p.plate_type() == self.q || self.lattice.depth(self.lattice.block_of(&p.center)) > self.depth
    }
}

#[derive(Copy, Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoveTally {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveTally {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// A Markov chain over plate configurations.
#[derive(Clone, Debug)]
pub struct Sampler {
    set: PlateSet,
    run: RunParams,
    rule: Option<BoundaryRule>,
    rng: ChaCha8Rng,
    volume: f64,
    cumulative: [f64; 4],
    tallies: [MoveTally; 4],
    steps_per_sweep: u64,
}

impl Sampler {
    /// Chain started from the empty box.
    pub fn new(params: ModelParams, sim_box: SimBox, run: RunParams) -> Result<Self> {
        let set = PlateSet::new(params, sim_box)?;
        Self::from_set(set, run)
    }

    /// Chain started from `set`, which must satisfy the hard-core and
    /// boundary constraints.
    pub fn from_set(set: PlateSet, run: RunParams) -> Result<Self> {
        run.validate()?;
        let rule = match run.boundary {
            None => None,
            Some(q) => {
                if set.sim_box().mode() != BoundaryMode::Open {
                    return Err(Error::InvalidParameter(
                        "a boundary type needs an open box".into(),
                    ));
                }
                Some(BoundaryRule {
                    lattice: BlockLattice::new(set.params(), set.sim_box())?,
                    q,
                    depth: run.boundary_depth,
                })
            }
        };
        if let Some(r) = &rule {
            if set.iter().any(|p| !r.allows(p)) {
                return Err(Error::InvalidParameter(
                    "initial state violates the boundary condition".into(),
                ));
            }
        }
        if run.hard_core && !set.hard_core_holds() {
            return Err(Error::InvalidParameter("initial state has overlaps".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(run.seed);
        rng.set_stream(run.replica);
        let w = run.move_weights.as_array();
        let mut cumulative = [0.0; 4];
        let mut acc = 0.0;
        for i in 0..4 {
            acc += w[i];
            cumulative[i] = acc;
        }
        cumulative[3] = f64::INFINITY;
        let volume = set.sim_box().volume();
        let steps_per_sweep = steps_per_sweep(run.z, volume, set.params());
        Ok(Self {
            set,
            run,
            rule,
            rng,
            volume,
            cumulative,
            tallies: [MoveTally::default(); 4],
            steps_per_sweep,
        })
    }

    pub fn set(&self) -> &PlateSet {
        &self.set
    }

    pub fn into_set(self) -> PlateSet {
        self.set
    }

    pub fn run_params(&self) -> &RunParams {
        &self.run
    }

    pub fn steps_per_sweep(&self) -> u64 {
        self.steps_per_sweep
    }

    pub fn tallies(&self) -> [MoveTally; 4] {
        self.tallies
    }

    pub fn acceptance_rates(&self) -> [f64; 4] {
        self.tallies.map(|t| t.rate())
    }

    fn allowed(&self, p: &Plate) -> bool {
        self.rule.as_ref().is_none_or(|r| r.allows(p))
    }

    /// One Metropolis move of a randomly chosen kind; returns acceptance.
    pub fn step(&mut self) -> bool {
        let u: f64 = self.rng.gen();
        let kind = MoveKind::ALL[self.cumulative.iter().position(|&c| u < c).unwrap_or(3)];
        self.propose(kind)
    }

    /// One Metropolis move of the given kind; returns acceptance.
    pub fn propose(&mut self, kind: MoveKind) -> bool {
        let accepted = match kind {
            MoveKind::Insert => self.try_insert(),
            MoveKind::Delete => self.try_delete(),
            MoveKind::Translate => self.try_translate(),
            MoveKind::Reorient => self.try_reorient(),
        };
        let t = &mut self.tallies[kind.index()];
        t.proposed += 1;
        t.accepted += accepted as u64;
        accepted
    }

    /// `steps_per_sweep` moves.
    pub fn sweep(&mut self) {
        for _ in 0..self.steps_per_sweep {
            self.step();
        }
    }

    fn random_center(&mut self) -> [f64; 3] {
        let s = self.set.sim_box().sides();
        let mut c = [0.0; 3];
        for i in 0..3 {
            c[i] = self.rng.gen::<f64>() * s[i];
        }
        c
    }

    fn try_insert(&mut self) -> bool {
        let center = self.random_center();
        let o = Orientation::ALL[self.rng.gen_range(0..6)];
        let u: f64 = self.rng.gen();
        let p = Plate::new(center, o);
        if u >= insert_acceptance(self.run.z, self.volume, self.set.len()) || !self.allowed(&p) {
            return false;
        }
        if self.run.hard_core {
            matches!(self.set.insert_if_free(p), Ok(Some(_)))
        } else {
            self.set.admissible(&p) && self.set.insert_unchecked(p).is_ok()
        }
    }

    fn try_delete(&mut self) -> bool {
        let n = self.set.len();
        if n == 0 {
            return false;
        }
        let h = self.set.handle_at(self.rng.gen_range(0..n));
        let u: f64 = self.rng.gen();
        if u >= delete_acceptance(self.run.z, self.volume, n) {
            return false;
        }
        self.set.remove(h).is_ok()
    }

    fn try_move_to(&mut self, h: crate::configuration::PlateHandle, p: Plate) -> bool {
        if !self.allowed(&p) {
            return false;
        }
        if self.run.hard_core {
            self.set.move_if_free(h, p).unwrap_or(false)
        } else {
            self.set.admissible(&p) && self.set.replace_unchecked(h, p).is_ok()
        }
    }

    fn try_translate(&mut self) -> bool {
        let n = self.set.len();
        if n == 0 {
            return false;
        }
        let h = self.set.handle_at(self.rng.gen_range(0..n));
        let old = *self.set.get(h).expect("live handle");
        let s = self.set.params().intermediate_side();
        let mut c = old.center;
        for x in &mut c {
            *x += (self.rng.gen::<f64>() - 0.5) * s;
        }
        let c = self.set.sim_box().wrap(c);
        if !self.set.sim_box().contains(&c) {
            return false;
        }
        self.try_move_to(h, Plate::new(c, old.orientation))
    }

    fn try_reorient(&mut self) -> bool {
        let n = self.set.len();
        if n == 0 {
            return false;
        }
        let h = self.set.handle_at(self.rng.gen_range(0..n));
        let old = *self.set.get(h).expect("live handle");
        let mut j = self.rng.gen_range(0..5);
        if j >= old.orientation.index() {
            j += 1;
        }
        let o = Orientation::ALL[j];
        self.try_move_to(h, Plate::new(old.center, o))
    }

    /// Whether no plate violates the boundary condition.
    pub fn boundary_holds(&self) -> bool {
        self.set.iter().all(|p| self.allowed(p))
    }
}

/// `S = (3 max_i N_i / N - 1) / 2` over the type counts `N_i`.
pub fn order_parameter(counts: &[usize; 6]) -> Result<f64> {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Undefined("order parameter of an empty configuration".into()));
    }
    let max_type = (0..3).map(|t| counts[2 * t] + counts[2 * t + 1]).max().unwrap();
    Ok((3.0 * max_type as f64 / n as f64 - 1.0) / 2.0)
}

/// One recorded line of the observable stream.
#[derive(Clone, Debug, PartialEq)]
pub struct ObservableRow {
    pub sweep: u64,
    pub counts: [usize; 6],
    pub order_parameter: Option<f64>,
    pub acceptance: [f64; 4],
}

impl ObservableRow {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }
}

/// Recorded per-orientation counts of one or more replicas plus a census
/// of block spins.
///
/// Series are keyed by replica id, so merging is a union and does not
/// depend on order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObservableAccumulator {
    volume: f64,
    series: BTreeMap<u64, Vec<[u32; 6]>>,
    census: [u64; 5],
}

impl ObservableAccumulator {
    pub fn new(volume: f64) -> Self {
        Self {
            volume,
            ..Self::default()
        }
    }

    pub fn volume(&self) -> f64 {
        self.volume
    }

    pub fn record(&mut self, replica: u64, counts: [usize; 6]) {
        self.series
            .entry(replica)
            .or_default()
            .push(counts.map(|c| c as u32));
    }

    pub fn record_census(&mut self, census: [u64; 5]) {
        for i in 0..5 {
            self.census[i] += census[i];
        }
    }

    /// Spin-value counts summed over all recorded blocks.
    pub fn census(&self) -> [u64; 5] {
        self.census
    }

    /// Fraction of recorded blocks with spin 4.
    pub fn mixed_block_fraction(&self) -> Option<f64> {
        let total: u64 = self.census.iter().sum();
        (total > 0).then(|| self.census[4] as f64 / total as f64)
    }

    pub fn sample_count(&self) -> usize {
        self.series.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.sample_count() == 0
    }

    pub fn replicas(&self) -> impl Iterator<Item = u64> + '_ {
        self.series.keys().copied()
    }

    pub fn counts(&self, replica: u64) -> Option<&[[u32; 6]]> {
        self.series.get(&replica).map(Vec::as_slice)
    }

    /// Union of two accumulators over disjoint replicas of the same box.
    pub fn merge(&mut self, other: ObservableAccumulator) -> Result<()> {
        if self.series.is_empty() && self.census == [0; 5] {
            self.volume = other.volume;
        } else if !other.series.is_empty() && self.volume != other.volume {
            return Err(Error::Incompatible("accumulators of different boxes".into()));
        }
        if let Some(r) = other.series.keys().find(|r| self.series.contains_key(r)) {
            return Err(Error::Incompatible(format!("replica {r} recorded twice")));
        }
        self.series.extend(other.series);
        self.record_census(other.census);
        Ok(())
    }

    /// Sample-weighted mean of `f` over all replicas, with per-replica
    /// blocking errors combined in quadrature.
    fn combine(&self, f: impl Fn(&[u32; 6]) -> f64) -> Estimate {
        let total = self.sample_count() as f64;
        if total == 0.0 {
            return Estimate::new(f64::NAN, f64::NAN);
        }
        let (mut m, mut v) = (0.0, 0.0);
        for s in self.series.values().filter(|s| !s.is_empty()) {
            let xs: Vec<f64> = s.iter().map(&f).collect();
            let w = xs.len() as f64 / total;
            let e = stats::blocked_estimate(&xs);
            m += w * e.mean;
            if e.error.is_finite() {
                v += (w * e.error).powi(2);
            }
        }
        Estimate::new(m, v.sqrt())
    }

    fn combine_ratio(&self, a: impl Fn(&[u32; 6]) -> f64, b: impl Fn(&[u32; 6]) -> f64) -> Estimate {
        let mb = self.combine(&b).mean;
        let r = self.combine(&a).mean / mb;
        let resid = self.combine(|c| a(c) - r * b(c));
        Estimate::new(r, resid.error / mb.abs())
    }

    pub fn orientation_density(&self, o: Orientation) -> Estimate {
        let v = self.volume;
        self.combine(|c| c[o.index()] as f64 / v)
    }

    pub fn densities(&self) -> [Estimate; 6] {
        Orientation::ALL.map(|o| self.orientation_density(o))
    }

    pub fn type_density(&self, t: PlateType) -> Estimate {
        let v = self.volume;
        let [a, b] = t.orientations();
        self.combine(|c| (c[a.index()] + c[b.index()]) as f64 / v)
    }

    pub fn total_density(&self) -> Estimate {
        let v = self.volume;
        self.combine(|c| c.iter().sum::<u32>() as f64 / v)
    }

    /// Time-averaged share of type-`t` plates, `Σ N_t / Σ N`.
    pub fn type_fraction(&self, t: PlateType) -> Estimate {
        let [a, b] = t.orientations();
        self.combine_ratio(
            |c| (c[a.index()] + c[b.index()]) as f64,
            |c| c.iter().sum::<u32>() as f64,
        )
    }

    /// Mean order parameter over nonempty samples.
    pub fn order_parameter(&self) -> Estimate {
        let mut sub = ObservableAccumulator::new(self.volume);
        for (r, s) in &self.series {
            sub.series
                .insert(*r, s.iter().filter(|c| c.iter().any(|&x| x > 0)).copied().collect());
        }
        sub.combine(|c| order_parameter(&c.map(|x| x as usize)).expect("nonempty"))
    }
}

/// Everything a run produces.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub accumulator: ObservableAccumulator,
    pub rows: Vec<ObservableRow>,
    pub final_state: PlateSet,
    pub tallies: [MoveTally; 4],
    pub steps_per_sweep: u64,
}

/// Runs `run.sweeps` sweeps from the empty box, recording observables after
/// burn-in every `record_stride` sweeps and handing a snapshot to
/// `on_snapshot` every `snapshot_stride` sweeps.
pub fn run_with<F>(
    params: &ModelParams,
    sim_box: &SimBox,
    run: &RunParams,
    mut on_snapshot: F,
) -> Result<RunOutput>
where
    F: FnMut(&Snapshot) -> Result<()>,
{
    let mut sampler = Sampler::new(params.clone(), sim_box.clone(), run.clone())?;
    let lattice = BlockLattice::new(params, sim_box).ok();
    let mut acc = ObservableAccumulator::new(sim_box.volume());
    let mut rows = Vec::new();
    let burn = run.burn_in_sweeps();
    for sweep in 1..=run.sweeps {
        sampler.sweep();
        if sweep <= burn {
            continue;
        }
        let since = sweep - burn;
        if since % run.record_stride == 0 {
            let counts = sampler.set().count_by_orientation();
            acc.record(run.replica, counts);
            if let Some(lat) = &lattice {
                let sigma = match run.boundary {
                    Some(q) => assign_spins_with_boundary(sampler.set().iter(), lat, q, run.boundary_depth),
                    None => assign_spins(sampler.set().iter(), lat),
                };
                acc.record_census(sigma.census());
            }
            rows.push(ObservableRow {
                sweep,
                counts,
                order_parameter: order_parameter(&counts).ok(),
                acceptance: sampler.acceptance_rates(),
            });
        }
        if run.snapshot_stride > 0 && since % run.snapshot_stride == 0 {
            on_snapshot(&Snapshot {
                sweep,
                plates: sampler.set().plates(),
            })?;
        }
    }
    Ok(RunOutput {
        accumulator: acc,
        rows,
        tallies: sampler.tallies(),
        steps_per_sweep: sampler.steps_per_sweep(),
        final_state: sampler.into_set(),
    })
}

/// [`run_with`] collecting the snapshots in memory.
pub fn run(
    params: &ModelParams,
    sim_box: &SimBox,
    run: &RunParams,
) -> Result<(RunOutput, Vec<Snapshot>)> {
    let mut snaps = Vec::new();
    let out = run_with(params, sim_box, run, |s| {
        snaps.push(s.clone());
        Ok(())
    })?;
    Ok((out, snaps))
}

/// Uniform distance bins `[i w, (i+1) w)`.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairBins {
    pub width: f64,
    pub count: usize,
}

impl PairBins {
    pub fn r_max(&self) -> f64 {
        self.width * self.count as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        (b as f64 + 0.5) * self.width
    }

    fn shell_volume(&self, b: usize) -> f64 {
        let (r0, r1) = (b as f64 * self.width, (b + 1) as f64 * self.width);
        4.0 / 3.0 * std::f64::consts::PI * (r1.powi(3) - r0.powi(3))
    }
}

/// Truncated pair correlation `ρ_{o1,o2}(r) - ρ_{o1} ρ_{o2}` per ordered
/// orientation pair and distance bin; `None` where no reference pairs fell
/// into the bin.
#[derive(Clone, Debug, PartialEq)]
pub struct PairCorrelation {
    pub bins: PairBins,
    values: Vec<Option<Estimate>>,
}

impl PairCorrelation {
    fn slot(&self, o1: Orientation, o2: Orientation, b: usize) -> usize {
        (o1.index() * 6 + o2.index()) * self.bins.count + b
    }

    pub fn get(&self, o1: Orientation, o2: Orientation, b: usize) -> Option<Estimate> {
        self.values[self.slot(o1, o2, b)]
    }

    /// `(bin center, estimate)` over the defined bins of one pair.
    pub fn series(&self, o1: Orientation, o2: Orientation) -> Vec<(f64, Estimate)> {
        (0..self.bins.count)
            .filter_map(|b| self.get(o1, o2, b).map(|e| (self.bins.center(b), e)))
            .collect()
    }
}

const JACKKNIFE_BLOCKS: usize = 20;

struct PairTally {
    h: Vec<f64>,
    counts: [f64; 6],
}

impl PairTally {
    fn new(nb: usize) -> Self {
        Self {
            h: vec![0.0; 36 * nb],
            counts: [0.0; 6],
        }
    }

    fn add(&mut self, other: &PairTally) {
        for (a, b) in self.h.iter_mut().zip(&other.h) {
            *a += b;
        }
        for i in 0..6 {
            self.counts[i] += other.counts[i];
        }
    }
}

/// Ordered pair histogram between `a` and `b` (`same` skips `i == j`).
fn pair_histogram(a: &[Plate], b: &[Plate], same: bool, sim_box: &SimBox, bins: &PairBins, h: &mut [f64]) {
    let nb = bins.count;
    let rmax2 = bins.r_max() * bins.r_max();
    for (i, p) in a.iter().enumerate() {
        for (j, q) in b.iter().enumerate() {
            if same && i == j {
                continue;
            }
            let d = sim_box.displacement(&p.center, &q.center);
            let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
            if r2 >= rmax2 {
                continue;
            }
            let bin = ((r2.sqrt() / bins.width) as usize).min(nb - 1);
            h[(p.orientation.index() * 6 + q.orientation.index()) * nb + bin] += 1.0;
        }
    }
}

/// Distance-binned truncated pair correlations from recorded snapshots with
/// jackknife errors over up to 20 contiguous snapshot blocks.
///
/// In a periodic box the pair density is normalized by the shell volume.
/// In an open box each bin is normalized by the same histogram between
/// snapshots half a run apart, which are uncorrelated and so measure the
/// product of one-body densities including edge effects.
pub fn pair_correlation(snapshots: &[Snapshot], sim_box: &SimBox, bins: PairBins) -> Result<PairCorrelation> {
    let s = snapshots.len();
    if s < 2 {
        return Err(Error::InsufficientStatistics(format!(
            "pair correlation needs at least 2 snapshots, got {s}"
        )));
    }
    if !(bins.width > 0.0) || bins.count == 0 {
        return Err(Error::InvalidParameter("bins need positive width and count".into()));
    }
    let periodic = sim_box.mode() == BoundaryMode::Periodic;
    let min_side = sim_box.sides().iter().copied().fold(f64::INFINITY, f64::min);
    if periodic && bins.r_max() > 0.5 * min_side {
        return Err(Error::InvalidParameter(format!(
            "r_max {} exceeds half the box side",
            bins.r_max()
        )));
    }
    let nb = bins.count;
    let nblocks = s.min(JACKKNIFE_BLOCKS);
    let mut same: Vec<PairTally> = (0..nblocks).map(|_| PairTally::new(nb)).collect();
    let mut cross: Vec<PairTally> = (0..nblocks).map(|_| PairTally::new(nb)).collect();
    let lag = s / 2;
    for (i, snap) in snapshots.iter().enumerate() {
        let blk = i * nblocks / s;
        let t = &mut same[blk];
        pair_histogram(&snap.plates, &snap.plates, true, sim_box, &bins, &mut t.h);
        for p in &snap.plates {
            t.counts[p.orientation.index()] += 1.0;
        }
        if !periodic {
            let other = &snapshots[(i + lag) % s];
            pair_histogram(&snap.plates, &other.plates, false, sim_box, &bins, &mut cross[blk].h);
        }
    }
    let volume = sim_box.volume();
    let estimate = |excl: Option<usize>| -> Vec<Option<f64>> {
        let mut hs = PairTally::new(nb);
        let mut cs = PairTally::new(nb);
        let mut ns = 0usize;
        for b in 0..nblocks {
            if Some(b) == excl {
                continue;
            }
            hs.add(&same[b]);
            cs.add(&cross[b]);
            ns += (b + 1) * s / nblocks - b * s / nblocks;
        }
        let ns = ns as f64;
        let rho = hs.counts.map(|c| c / ns / volume);
        let mut out = vec![None; 36 * nb];
        for o1 in 0..6 {
            for o2 in 0..6 {
                for b in 0..nb {
                    let k = (o1 * 6 + o2) * nb + b;
                    let h = hs.h[k] / ns;
                    out[k] = if periodic {
                        Some(h / (volume * bins.shell_volume(b)) - rho[o1] * rho[o2])
                    } else {
                        let c = cs.h[k] / ns;
                        (c > 0.0).then(|| (h / c - 1.0) * rho[o1] * rho[o2])
                    };
                }
            }
        }
        out
    };
    let full = estimate(None);
    let loo: Vec<Vec<Option<f64>>> = (0..nblocks).map(|b| estimate(Some(b))).collect();
    let values = (0..36 * nb)
        .map(|k| {
            let v = full[k]?;
            let l: Option<Vec<f64>> = loo.iter().map(|x| x[k]).collect();
            let err = if nblocks >= 2 {
                l.map(|l| stats::jackknife(&l).error).unwrap_or(f64::INFINITY)
            } else {
                f64::INFINITY
            };
            Some(Estimate::new(v, err))
        })
        .collect();
    Ok(PairCorrelation { bins, values })
}

/// Exponential fit `|v(r)| ≈ A e^{-r/ξ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub amplitude: f64,
    pub xi: f64,
    pub xi_error: f64,
    /// Distances of the bins used.
    pub window: Vec<f64>,
    /// `log|v| - fit` per bin used.
    pub residuals: Vec<f64>,
    pub noise_floor: f64,
}

/// Minimum bins above the noise floor for a decay fit.
pub const MIN_FIT_BINS: usize = 5;

/// Weighted least squares of `log|v|` against `r` over the bins whose
/// magnitude exceeds three times the median bin error. Fails with
/// [`Error::Undefined`] when fewer than five bins qualify or the fitted
/// slope does not decay.
pub fn fit_decay(series: &[(f64, Estimate)]) -> Result<DecayFit> {
    if series.is_empty() {
        return Err(Error::InvalidParameter("empty correlation series".into()));
    }
    let errs: Vec<f64> = series.iter().map(|(_, e)| e.error).collect();
    let noise_floor = 3.0 * stats::median(&errs);
    let used: Vec<&(f64, Estimate)> = series
        .iter()
        .filter(|(_, e)| e.mean.abs() > noise_floor && e.mean != 0.0 && e.error > 0.0)
        .collect();
    if used.len() < MIN_FIT_BINS {
        return Err(Error::Undefined(format!(
            "no decay measurable: {} bins above the noise floor, need {MIN_FIT_BINS}",
            used.len()
        )));
    }
    let x: Vec<f64> = used.iter().map(|(r, _)| *r).collect();
    let y: Vec<f64> = used.iter().map(|(_, e)| e.mean.abs().ln()).collect();
    let sig: Vec<f64> = used.iter().map(|(_, e)| e.error / e.mean.abs()).collect();
    let fit = stats::weighted_line_fit(&x, &y, &sig)
        .ok_or_else(|| Error::Undefined("no decay measurable: degenerate fit".into()))?;
    if fit.slope >= 0.0 {
        return Err(Error::Undefined("no decay measurable: correlations do not decay".into()));
    }
    let xi = -1.0 / fit.slope;
    Ok(DecayFit {
        amplitude: fit.intercept.exp(),
        xi,
        xi_error: fit.slope_err * xi * xi,
        residuals: x
            .iter()
            .zip(&y)
            .map(|(r, v)| v - (fit.intercept + fit.slope * r))
            .collect(),
        window: x,
        noise_floor,
    })
}

/// How a partition-function ratio is evaluated.
#[derive(Copy, Clone, Debug, PartialEq)]
pub enum RatioMode {
    /// Grand-canonical sampling of the isolated region.
    Sampler { sweeps: u64, seed: u64 },
    /// Few-body quadrature truncated at three plates (small regions only).
    Quadrature,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    pub ratio: Estimate,
    /// Probability of the numerator event (sampler) or its truncated weight
    /// relative to the empty configuration (quadrature).
    pub numerator: f64,
    pub denominator: f64,
    /// Bound on the truncation error of `ratio` (quadrature only).
    pub truncation: f64,
}

/// Largest `6 z |R|` accepted by the quadrature oracles.
pub const QUADRATURE_MAX_OCCUPANCY: f64 = 1.0;

fn type_mask(plates: &[Plate]) -> u8 {
    plates.iter().fold(0, |m, p| m | 1 << p.plate_type().index())
}

/// Runs a sampler on an isolated open region and returns the per-sweep
/// numerator and denominator indicator series.
fn sample_events(
    params: &ModelParams,
    sim_box: SimBox,
    z: f64,
    sweeps: u64,
    seed: u64,
    event: impl Fn(&PlateSet) -> (f64, f64),
) -> Result<(Vec<f64>, Vec<f64>)> {
    let run = RunParams {
        z,
        sweeps,
        seed,
        ..RunParams::default()
    };
    let mut s = Sampler::new(params.clone(), sim_box, run.clone())?;
    let burn = run.burn_in_sweeps();
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for sweep in 1..=sweeps {
        s.sweep();
        if sweep > burn {
            let (x, y) = event(s.set());
            a.push(x);
            b.push(y);
        }
    }
    Ok((a, b))
}

fn sampled_ratio(a: &[f64], b: &[f64]) -> Result<RatioEstimate> {
    if a.len() < 2 {
        return Err(Error::InsufficientStatistics("too few recorded sweeps".into()));
    }
    let r = stats::ratio_estimate(a, b);
    Ok(RatioEstimate {
        ratio: r,
        numerator: stats::mean(a),
        denominator: stats::mean(b),
        truncation: 0.0,
    })
}

/// Denominator indicator `P(all plates of type q or none)`, averaged over q.
fn uniform_or_empty(mask: u8) -> f64 {
    match mask {
        0 => 1.0,
        1 | 2 | 4 => 1.0 / 3.0,
        _ => 0.0,
    }
}

/// Sum of `∫ φ` over every assignment of `n` plates to `boxes` and
/// orientations accepted by `event`.
fn event_integral(
    params: &ModelParams,
    boxes: &[CenterBox],
    n: usize,
    event: &dyn Fn(&[(usize, Orientation)]) -> bool,
) -> f64 {
    let choices: Vec<(usize, Orientation)> = (0..boxes.len())
        .flat_map(|b| Orientation::ALL.into_iter().map(move |o| (b, o)))
        .collect();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let a: Vec<(usize, Orientation)> = idx.iter().map(|&i| choices[i]).collect();
        if event(&a) {
            let bs: Vec<CenterBox> = a.iter().map(|&(b, _)| boxes[b]).collect();
            let os: Vec<Orientation> = a.iter().map(|&(_, o)| o).collect();
            total += configuration_integral(params, &bs, &os);
        }
        let mut d = 0;
        loop {
            if d == n {
                return total;
            }
            idx[d] += 1;
            if idx[d] < choices.len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Truncated ratio of two grand-canonical sums `Σ_n zⁿ/n! c_n` over `n ≤ 3`
/// with bounds on the discarded orders from the ideal-gas tails.
fn truncated_ratio(
    z: f64,
    num: [f64; 4],
    den: [f64; 4],
    num_tail_rate: f64,
    den_tail_rate: f64,
) -> RatioEstimate {
    let sum = |c: [f64; 4]| (0..4).map(|n| z.powi(n as i32) / factorial(n) * c[n]).sum::<f64>();
    let tail = |x: f64| x.powi(4) / 24.0 * x.exp();
    let (nv, dv) = (sum(num), sum(den));
    let r = nv / dv;
    let hi = (nv + tail(num_tail_rate)) / dv;
    let lo = nv / (dv + tail(den_tail_rate));
    RatioEstimate {
        ratio: Estimate::new(r, 0.0),
        numerator: nv,
        denominator: dv,
        truncation: (hi - r).max(r - lo),
    }
}

/// `Z^{≥2}(Δ) / Z^q(Δ)` for an isolated cube `Δ` of side `block_side`: the
/// weight of configurations holding at least two plate types relative to
/// those holding only type `q` (or nothing).
pub fn estimate_block_ratio(
    params: &ModelParams,
    z: f64,
    block_side: f64,
    mode: RatioMode,
) -> Result<RatioEstimate> {
    let sim_box = SimBox::cubic(block_side, BoundaryMode::Open)?;
    match mode {
        RatioMode::Sampler { sweeps, seed } => {
            let (a, b) = sample_events(params, sim_box, z, sweeps, seed, |s| {
                let m = type_mask(&s.plates());
                (((m.count_ones()) >= 2) as u8 as f64, uniform_or_empty(m))
            })?;
            sampled_ratio(&a, &b)
        }
        RatioMode::Quadrature => {
            let vol = sim_box.volume();
            if 6.0 * z * vol > QUADRATURE_MAX_OCCUPANCY {
                return Err(Error::Incompatible(format!(
                    "6 z |Δ| = {} too large for the three-plate oracle",
                    6.0 * z * vol
                )));
            }
            let cube = [CenterBox::cube([0.0; 3], block_side)];
            let q = PlateType::Three;
            let mixed = |a: &[(usize, Orientation)]| {
                a.iter().fold(0u8, |m, (_, o)| m | 1 << o.plate_type().index()).count_ones() >= 2
            };
            let pure = |a: &[(usize, Orientation)]| a.iter().all(|(_, o)| o.plate_type() == q);
            let num = [0, 1, 2, 3].map(|n| event_integral(params, &cube, n, &mixed));
            let den = [0, 1, 2, 3].map(|n| event_integral(params, &cube, n, &pure));
            Ok(truncated_ratio(z, num, den, 6.0 * z * vol, 2.0 * z * vol))
        }
    }
}

/// Ratio for two face-adjacent blocks `A = [0,ℓ)×[0,ℓ)²`, `B = [ℓ,2ℓ)×[0,ℓ)²`
/// (`ℓ = k/2`): weight of configurations in which both blocks are nonempty,
/// each holds a single plate type and the two types differ, relative to
/// configurations of type `q` only.
pub fn estimate_dipole_ratio(params: &ModelParams, z: f64, mode: RatioMode) -> Result<RatioEstimate> {
    let ell = params.block_side();
    let sim_box = SimBox::cuboid([2.0 * ell, ell, ell], BoundaryMode::Open)?;
    let dipole_event = |types_a: u8, types_b: u8| {
        types_a.count_ones() == 1 && types_b.count_ones() == 1 && types_a != types_b
    };
    match mode {
        RatioMode::Sampler { sweeps, seed } => {
            let (a, b) = sample_events(params, sim_box, z, sweeps, seed, |s| {
                let (mut ma, mut mb) = (0u8, 0u8);
                for p in s.iter() {
                    let bit = 1 << p.plate_type().index();
                    if p.center[0] < ell {
                        ma |= bit;
                    } else {
                        mb |= bit;
                    }
                }
                (dipole_event(ma, mb) as u8 as f64, uniform_or_empty(ma | mb))
            })?;
            sampled_ratio(&a, &b)
        }
        RatioMode::Quadrature => {
            let vol = sim_box.volume();
            if 6.0 * z * vol > QUADRATURE_MAX_OCCUPANCY {
                return Err(Error::Incompatible(format!(
                    "6 z |R| = {} too large for the three-plate oracle",
                    6.0 * z * vol
                )));
            }
            let halves = [
                CenterBox::new([0.0; 3], [ell; 3]),
                CenterBox::new([ell, 0.0, 0.0], [2.0 * ell, ell, ell]),
            ];
            let whole = [CenterBox::new([0.0; 3], [2.0 * ell, ell, ell])];
            let q = PlateType::Three;
            let event = |a: &[(usize, Orientation)]| {
                let (mut ma, mut mb) = (0u8, 0u8);
                for &(b, o) in a {
                    let bit = 1 << o.plate_type().index();
                    if b == 0 {
                        ma |= bit;
                    } else {
                        mb |= bit;
                    }
                }
                dipole_event(ma, mb)
            };
            let pure = |a: &[(usize, Orientation)]| a.iter().all(|(_, o)| o.plate_type() == q);
            let num = [0, 1, 2, 3].map(|n| event_integral(params, &halves, n, &event));
            let den = [0, 1, 2, 3].map(|n| event_integral(params, &whole, n, &pure));
            Ok(truncated_ratio(z, num, den, 6.0 * z * vol, 2.0 * z * vol))
        }
    }
}
