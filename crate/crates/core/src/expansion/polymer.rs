//! Hard-core polymer gas on a small block lattice.
//!
//! Polymers are D-connected sets of blocks (blocks touching on a face, an
//! edge or a corner count as connected). Two polymers are compatible iff
//! their union is D-disconnected.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{OverlapGraph, SeriesEstimate};
use crate::error::{Error, Result};

/// Largest polymer, in blocks.
pub const MAX_POLYMER_SIZE: usize = 4;
/// Largest lattice, in blocks (one `u64` mask).
pub const MAX_LATTICE_BLOCKS: usize = 64;
/// Largest cluster size the cluster expansion will enumerate.
pub const MAX_CLUSTER_SIZE: usize = 6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polymer {
    pub blocks: Vec<[usize; 3]>,
    pub activity: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawModel", into = "RawModel")]
pub struct PolymerModel {
    dims: [usize; 3],
    polymers: Vec<Polymer>,
    masks: Vec<u64>,
    /// Closed D-neighborhood of each polymer.
    halos: Vec<u64>,
}

#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    dims: [usize; 3],
    polymers: Vec<Polymer>,
}

impl TryFrom<RawModel> for PolymerModel {
    type Error = Error;

    fn try_from(raw: RawModel) -> Result<Self> {
        PolymerModel::new(raw.dims, raw.polymers)
    }
}

impl From<PolymerModel> for RawModel {
    fn from(m: PolymerModel) -> Self {
        RawModel {
            dims: m.dims,
            polymers: m.polymers,
        }
    }
}

fn index(dims: [usize; 3], c: [usize; 3]) -> usize {
    c[0] + dims[0] * (c[1] + dims[1] * c[2])
}

fn coords(dims: [usize; 3], i: usize) -> [usize; 3] {
    [i % dims[0], (i / dims[0]) % dims[1], i / (dims[0] * dims[1])]
}

fn d_neighborhood(dims: [usize; 3], i: usize) -> u64 {
    let c = coords(dims, i);
    let mut m = 0u64;
    for dz in -1i64..=1 {
        for dy in -1i64..=1 {
            for dx in -1i64..=1 {
                let n = [c[0] as i64 + dx, c[1] as i64 + dy, c[2] as i64 + dz];
                if (0..3).all(|a| n[a] >= 0 && n[a] < dims[a] as i64) {
                    m |= 1 << index(dims, n.map(|x| x as usize));
                }
            }
        }
    }
    m
}

fn halo(dims: [usize; 3], mask: u64) -> u64 {
    let mut out = 0;
    let mut rest = mask;
    while rest != 0 {
        let i = rest.trailing_zeros() as usize;
        rest &= rest - 1;
        out |= d_neighborhood(dims, i);
    }
    out
}

fn is_d_connected(dims: [usize; 3], mask: u64) -> bool {
    if mask == 0 {
        return false;
    }
    let mut seen = 1u64 << mask.trailing_zeros();
    let mut frontier = seen;
    while frontier != 0 {
        let i = frontier.trailing_zeros() as usize;
        frontier &= frontier - 1;
        let new = d_neighborhood(dims, i) & mask & !seen;
        seen |= new;
        frontier |= new;
    }
    seen == mask
}

impl PolymerModel {
    pub fn new(dims: [usize; 3], polymers: Vec<Polymer>) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total == 0 || total > MAX_LATTICE_BLOCKS {
            return Err(Error::TooLarge(format!(
                "lattice {dims:?} must hold between 1 and {MAX_LATTICE_BLOCKS} blocks"
            )));
        }
        let mut masks = Vec::with_capacity(polymers.len());
        for (n, p) in polymers.iter().enumerate() {
            if p.blocks.is_empty() || p.blocks.len() > MAX_POLYMER_SIZE {
                return Err(Error::InvalidParameter(format!(
                    "polymer {n} has {} blocks, allowed 1..={MAX_POLYMER_SIZE}",
                    p.blocks.len()
                )));
            }
            if !p.activity.is_finite() {
                return Err(Error::InvalidParameter(format!("polymer {n} activity not finite")));
            }
            let mut mask = 0u64;
            for b in &p.blocks {
                if (0..3).any(|a| b[a] >= dims[a]) {
                    return Err(Error::InvalidParameter(format!("polymer {n} block {b:?} outside lattice")));
                }
                let bit = 1u64 << index(dims, *b);
                if mask & bit != 0 {
                    return Err(Error::InvalidParameter(format!("polymer {n} repeats block {b:?}")));
                }
                mask |= bit;
            }
            if !is_d_connected(dims, mask) {
                return Err(Error::InvalidParameter(format!("polymer {n} is not D-connected")));
            }
            if masks.contains(&mask) {
                return Err(Error::InvalidParameter(format!("polymer {n} duplicates another")));
            }
            masks.push(mask);
        }
        let halos = masks.iter().map(|&m| halo(dims, m)).collect();
        Ok(Self {
            dims,
            polymers,
            masks,
            halos,
        })
    }

    /// Random model: `count` polymers grown block by block from random
    /// seeds, sizes uniform in `1..=max_size`, activities uniform in
    /// `(-max_activity, max_activity)`.
    pub fn random<R: Rng>(
        dims: [usize; 3],
        count: usize,
        max_size: usize,
        max_activity: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let total: usize = dims.iter().product();
        if total == 0 || total > MAX_LATTICE_BLOCKS {
            return Err(Error::TooLarge(format!("lattice {dims:?}")));
        }
        let max_size = max_size.clamp(1, MAX_POLYMER_SIZE);
        let mut masks: Vec<u64> = Vec::new();
        let mut polymers = Vec::new();
        let mut attempts = 0;
        while polymers.len() < count && attempts < 100 * count + 100 {
            attempts += 1;
            let size = rng.gen_range(1..=max_size);
            let mut mask = 1u64 << rng.gen_range(0..total);
            while (mask.count_ones() as usize) < size {
                let frontier = halo(dims, mask) & !mask;
                let options: Vec<usize> = (0..total).filter(|&i| frontier >> i & 1 == 1).collect();
                mask |= 1 << options[rng.gen_range(0..options.len())];
            }
            if masks.contains(&mask) {
                continue;
            }
            masks.push(mask);
            let blocks = (0..total)
                .filter(|&i| mask >> i & 1 == 1)
                .map(|i| coords(dims, i))
                .collect();
            let activity = (rng.gen::<f64>() * 2.0 - 1.0) * max_activity;
            polymers.push(Polymer { blocks, activity });
        }
        Self::new(dims, polymers)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn polymers(&self) -> &[Polymer] {
        &self.polymers
    }

    pub fn len(&self) -> usize {
        self.polymers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polymers.is_empty()
    }

    /// Whether polymers `i` and `j` are D-connected (a polymer is
    /// incompatible with itself).
    pub fn incompatible(&self, i: usize, j: usize) -> bool {
        self.halos[i] & self.masks[j] != 0
    }

    fn size(&self, i: usize) -> usize {
        self.masks[i].count_ones() as usize
    }

    /// Kotecký–Preiss ratio `max_X Σ_{Y≁X} |K(Y)| e^{a|Y|} / (a|X|)`; the
    /// cluster expansion converges absolutely when it is below 1.
    pub fn kotecky_preiss(&self, a: f64) -> f64 {
        (0..self.len())
            .map(|x| {
                let s: f64 = (0..self.len())
                    .filter(|&y| self.incompatible(x, y))
                    .map(|y| self.polymers[y].activity.abs() * (a * self.size(y) as f64).exp())
                    .sum();
                s / (a * self.size(x) as f64)
            })
            .fold(0.0, f64::max)
    }

    /// `max_X |K(X)|^{1/|X|}`.
    pub fn activity_decay(&self) -> f64 {
        (0..self.len())
            .map(|x| self.polymers[x].activity.abs().powf(1.0 / self.size(x) as f64))
            .fold(0.0, f64::max)
    }

    /// `Σ_X |K(X)| e^{a|X|}`.
    fn weighted_mass(&self, a: f64) -> f64 {
        (0..self.len())
            .map(|x| self.polymers[x].activity.abs() * (a * self.size(x) as f64).exp())
            .sum()
    }

    /// Ursell function of a polymer tuple over its incompatibility graph.
    pub fn ursell(&self, tuple: &[usize]) -> Result<i64> {
        let n = tuple.len();
        let mut adj = vec![0u32; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if self.incompatible(tuple[i], tuple[j]) {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
            }
        }
        Ok(OverlapGraph::from_adjacency(adj)?.ursell())
    }

    /// Whether the union of the given polymers is D-connected.
    pub fn union_d_connected(&self, tuple: &[usize]) -> bool {
        let mask = tuple.iter().fold(0u64, |m, &i| m | self.masks[i]);
        is_d_connected(self.dims, mask)
    }
}

/// `Z = 1 + Σ_{compatible families} ∏ K`, by exact enumeration.
pub fn polymer_z_exact(model: &PolymerModel) -> Result<f64> {
    let total: usize = model.dims.iter().product();
    let all = if total == 64 { u64::MAX } else { (1u64 << total) - 1 };
    // Polymers grouped by their lowest block.
    let mut by_low: Vec<Vec<usize>> = vec![Vec::new(); total];
    for (i, &m) in model.masks.iter().enumerate() {
        by_low[m.trailing_zeros() as usize].push(i);
    }
    let mut memo = HashMap::new();
    Ok(z_available(model, &by_low, all, &mut memo))
}

/// Partition function of polymers contained in `avail`: the lowest
/// available block is either unused or the lowest block of exactly one
/// chosen polymer, which then blocks its whole D-neighborhood.
fn z_available(
    model: &PolymerModel,
    by_low: &[Vec<usize>],
    avail: u64,
    memo: &mut HashMap<u64, f64>,
) -> f64 {
    if avail == 0 {
        return 1.0;
    }
    if let Some(&v) = memo.get(&avail) {
        return v;
    }
    let b = avail.trailing_zeros() as usize;
    let mut z = z_available(model, by_low, avail & !(1 << b), memo);
    for &p in &by_low[b] {
        if model.masks[p] & !avail == 0 {
            z += model.polymers[p].activity
                * z_available(model, by_low, avail & !model.halos[p], memo);
        }
    }
    memo.insert(avail, z);
    z
}

/// `log Z` from clusters of at most `max_cluster_size` polymers.
///
/// Refuses unless the Kotecký–Preiss ratio with `a = ln 2` is below 1. The
/// remainder is `θ^N Σ_X |K(X)| e^{a|X|}` minimized over a grid of `a`
/// values for which `θ(a) < 1`.
pub fn polymer_log_z_cluster(model: &PolymerModel, max_cluster_size: usize) -> Result<SeriesEstimate> {
    if max_cluster_size == 0 || max_cluster_size > MAX_CLUSTER_SIZE {
        return Err(Error::InvalidParameter(format!(
            "cluster size must be in 1..={MAX_CLUSTER_SIZE}"
        )));
    }
    let theta = model.kotecky_preiss(std::f64::consts::LN_2);
    if theta >= 1.0 {
        return Err(Error::NotConvergent(format!(
            "Kotecký–Preiss ratio {theta:.3} ≥ 1 at a = ln 2 (max |K|^(1/|X|) = {:.3e})",
            model.activity_decay()
        )));
    }
    let remainder = (1..=60)
        .map(|i| i as f64 * 0.05)
        .chain([std::f64::consts::LN_2])
        .filter_map(|a| {
            let t = model.kotecky_preiss(a);
            (t < 1.0).then(|| t.powi(max_cluster_size as i32) * model.weighted_mass(a))
        })
        .fold(f64::INFINITY, f64::min);

    let mut value = 0.0;
    let mut tuple = Vec::with_capacity(max_cluster_size);
    for size in 1..=max_cluster_size {
        clusters(model, size, 0, &mut tuple, &mut value)?;
    }
    Ok(SeriesEstimate {
        value,
        order: max_cluster_size,
        remainder,
        rigorous: true,
        stat_error: 0.0,
        diagnostics: None,
    })
}

/// Adds the contributions of all multisets of `size` polymers extending
/// the nondecreasing prefix `tuple`.
fn clusters(
    model: &PolymerModel,
    size: usize,
    start: usize,
    tuple: &mut Vec<usize>,
    acc: &mut f64,
) -> Result<()> {
    if tuple.len() == size {
        let phi = model.ursell(tuple)?;
        if phi != 0 {
            let mut w = phi as f64;
            let mut run = 1;
            for i in 0..tuple.len() {
                w *= model.polymers[tuple[i]].activity;
                if i > 0 && tuple[i] == tuple[i - 1] {
                    run += 1;
                    w /= run as f64;
                } else {
                    run = 1;
                }
            }
            *acc += w;
        }
        return Ok(());
    }
    for p in start..model.len() {
        // Prune prefixes that can no longer be completed to a connected
        // cluster: every new polymer must attach to the ones chosen so far
        // or to a later one, so only skip when nothing can attach at all.
        if !tuple.is_empty()
            && tuple.len() + 1 == size
            && !tuple.iter().any(|&q| model.incompatible(q, p))
        {
            continue;
        }
        tuple.push(p);
        clusters(model, size, p, tuple, acc)?;
        tuple.pop();
    }
    Ok(())
}
