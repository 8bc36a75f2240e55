//! Block spins, sampling and smoothing cubes, bad regions, contours and the
//! pebble decomposition of a single block.
//!
//! Blocks are cubes of side `ℓ = k/2` indexed by `[i, j, l] ∈ [0, n)³`. The
//! smoothing cube with index `a` covers blocks `8a - 1 ..= 8a + 6` along each
//! axis, so a box with `n + 2 ≡ 0 (mod 8)` is tiled by smoothing cubes that
//! stick out by one block on every side.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::configuration::{BoundaryMode, SimBox};
use crate::error::{Error, Result};
use crate::geometry::{overlap, ModelParams, Plate, PlateType};

/// Spin of a block holding plates of two or more types.
pub const MIXED: u8 = 4;

const SMOOTHING: usize = 8;

/// The coarse lattice of blocks paving a cubic box.
#[derive(Clone, Debug)]
pub struct BlockLattice {
    side: f64,
    ell: f64,
    n: usize,
    mode: BoundaryMode,
}

impl BlockLattice {
    pub fn new(params: &ModelParams, sim_box: &SimBox) -> Result<Self> {
        if !sim_box.is_cubic() {
            return Err(Error::Incompatible("block lattice needs a cubic box".into()));
        }
        let ell = params.block_side();
        let side = sim_box.side();
        let ratio = side / ell;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::Incompatible(format!(
                "box side {side} is not a multiple of the block side {ell}"
            )));
        }
        Ok(Self {
            side,
            ell,
            n: n as usize,
            mode: sim_box.mode(),
        })
    }

    /// Blocks per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn block_side(&self) -> f64 {
        self.ell
    }

    pub fn box_side(&self) -> f64 {
        self.side
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn index(&self, c: [usize; 3]) -> usize {
        c[0] + self.n * (c[1] + self.n * c[2])
    }

    pub fn coords(&self, idx: usize) -> [usize; 3] {
        [idx % self.n, (idx / self.n) % self.n, idx / (self.n * self.n)]
    }

    fn axis_block(&self, x: f64) -> usize {
        let c = (x / self.ell).floor();
        if c < 0.0 {
            0
        } else {
            (c as usize).min(self.n - 1)
        }
    }

    /// Block whose half-open cube holds `x`.
    pub fn block_of(&self, x: &[f64; 3]) -> usize {
        self.index([
            self.axis_block(x[0]),
            self.axis_block(x[1]),
            self.axis_block(x[2]),
        ])
    }

    /// Lower corner of a block.
    pub fn block_origin(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        [
            c[0] as f64 * self.ell,
            c[1] as f64 * self.ell,
            c[2] as f64 * self.ell,
        ]
    }

    /// Rescaled L∞ distance from a block to the blocks outside the box.
    pub fn depth(&self, idx: usize) -> usize {
        self.coords(idx)
            .iter()
            .map(|&i| (i + 1).min(self.n - i))
            .min()
            .expect("three axes")
    }

    /// Rescaled L∞ distance between two blocks.
    pub fn distance(&self, a: usize, b: usize) -> usize {
        let (ca, cb) = (self.coords(a), self.coords(b));
        (0..3).map(|i| ca[i].abs_diff(cb[i])).max().unwrap()
    }

    /// Whether the box length is aligned with the smoothing grid.
    pub fn smoothing_aligned(&self) -> bool {
        (self.n + 2) % SMOOTHING == 0
    }

    fn on_surface(&self, idx: usize) -> bool {
        self.coords(idx).iter().any(|&i| i == 0 || i + 1 == self.n)
    }

    fn face_neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let c = self.coords(idx);
        let n = self.n;
        (0..6).filter_map(move |k| {
            let axis = k / 2;
            let mut d = c;
            if k % 2 == 0 {
                d[axis] = d[axis].checked_sub(1)?;
            } else {
                d[axis] += 1;
                if d[axis] >= n {
                    return None;
                }
            }
            Some(self.index(d))
        })
    }

    fn cube_neighbors(&self, idx: usize, radius: usize) -> Vec<usize> {
        let c = self.coords(idx);
        let lo = |i: usize| i.saturating_sub(radius);
        let hi = |i: usize| (i + radius).min(self.n - 1);
        let mut out = Vec::new();
        for l in lo(c[2])..=hi(c[2]) {
            for j in lo(c[1])..=hi(c[1]) {
                for i in lo(c[0])..=hi(c[0]) {
                    out.push(self.index([i, j, l]));
                }
            }
        }
        out
    }
}

/// Spins `σ_ξ ∈ {0, 1, 2, 3, 4}` on the block lattice.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpinField {
    n: usize,
    spins: Vec<u8>,
}

impl SpinField {
    pub fn uniform(n: usize, s: u8) -> Self {
        Self {
            n,
            spins: vec![s; n * n * n],
        }
    }

    pub fn from_vec(n: usize, spins: Vec<u8>) -> Result<Self> {
        if spins.len() != n * n * n || spins.iter().any(|&s| s > MIXED) {
            return Err(Error::InvalidParameter("malformed spin field".into()));
        }
        Ok(Self { n, spins })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, idx: usize) -> u8 {
        self.spins[idx]
    }

    pub fn set(&mut self, idx: usize, s: u8) {
        assert!(s <= MIXED);
        self.spins[idx] = s;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.spins
    }

    /// Dense `[i][j][l]` array for dumps.
    pub fn to_nested(&self) -> Vec<Vec<Vec<u8>>> {
        let n = self.n;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|l| self.spins[i + n * (j + n * l)]).collect())
                    .collect()
            })
            .collect()
    }

    /// Number of blocks carrying each spin value.
    pub fn census(&self) -> [u64; 5] {
        let mut c = [0u64; 5];
        for &s in &self.spins {
            c[s as usize] += 1;
        }
        c
    }
}

/// Spin field of a plate configuration: empty blocks get 0, blocks whose
/// plates share type `i` get `i`, blocks with several types get 4.
pub fn assign_spins<'a, I>(plates: I, lattice: &BlockLattice) -> SpinField
where
    I: IntoIterator<Item = &'a Plate>,
{
    let mut masks = vec![0u8; lattice.len()];
    for p in plates {
        masks[lattice.block_of(&p.center)] |= 1 << p.plate_type().index();
    }
    let spins = masks
        .into_iter()
        .map(|m| match m {
            0 => 0,
            1 => 1,
            2 => 2,
            4 => 3,
            _ => MIXED,
        })
        .collect();
    SpinField {
        n: lattice.n(),
        spins,
    }
}

/// As [`assign_spins`], with empty blocks at depth `≤ depth` counted as
/// spin `q`: under the `q` boundary condition those blocks are constrained
/// to type `q` and an empty one is compatible with `σ = q`.
pub fn assign_spins_with_boundary<'a, I>(
    plates: I,
    lattice: &BlockLattice,
    q: PlateType,
    depth: usize,
) -> SpinField
where
    I: IntoIterator<Item = &'a Plate>,
{
    let mut sigma = assign_spins(plates, lattice);
    for idx in 0..lattice.len() {
        if sigma.spins[idx] == 0 && lattice.depth(idx) <= depth {
            sigma.spins[idx] = q.number();
        }
    }
    sigma
}

fn sampling_cube_blocks(n: usize, anchor: [usize; 3]) -> impl Iterator<Item = usize> {
    (0..8).filter_map(move |d| {
        let c = [
            anchor[0] + (d & 1),
            anchor[1] + ((d >> 1) & 1),
            anchor[2] + ((d >> 2) & 1),
        ];
        (c.iter().all(|&x| x < n)).then(|| c[0] + n * (c[1] + n * c[2]))
    })
}

/// Good/bad status of every sampling cube, indexed by its anchor block.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplingCubes {
    n: usize,
    magnetization: Vec<Option<u8>>,
}

impl SamplingCubes {
    /// Magnetization of the cube anchored at `anchor`, `None` if bad.
    pub fn magnetization(&self, anchor: usize) -> Option<u8> {
        self.magnetization[anchor]
    }

    pub fn is_good(&self, anchor: usize) -> bool {
        self.magnetization[anchor].is_some()
    }

    pub fn bad_anchors(&self) -> Vec<usize> {
        (0..self.magnetization.len())
            .filter(|&a| self.magnetization[a].is_none())
            .collect()
    }

    /// Blocks of the sampling cube anchored at `anchor` (clipped to the box).
    pub fn blocks(&self, anchor: usize) -> Vec<usize> {
        let n = self.n;
        sampling_cube_blocks(n, [anchor % n, (anchor / n) % n, anchor / (n * n)]).collect()
    }
}

/// A sampling cube is good iff its blocks all carry the same spin in {1,2,3}.
pub fn classify_sampling_cubes(sigma: &SpinField) -> SamplingCubes {
    let n = sigma.n;
    let mut magnetization = Vec::with_capacity(n * n * n);
    for l in 0..n {
        for j in 0..n {
            for i in 0..n {
                let mut blocks = sampling_cube_blocks(n, [i, j, l]);
                let s = sigma.spins[blocks.next().expect("anchor block")];
                let good = (1..=3).contains(&s) && blocks.all(|b| sigma.spins[b] == s);
                magnetization.push(good.then_some(s));
            }
        }
    }
    SamplingCubes { n, magnetization }
}

/// Block subsets `B ⊆ B_s ⊆ B̄` as membership masks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BadRegion {
    pub bad_anchors: Vec<usize>,
    pub b: Vec<bool>,
    pub b_s: Vec<bool>,
    pub b_bar: Vec<bool>,
}

impl BadRegion {
    pub fn is_empty(&self) -> bool {
        !self.b_bar.iter().any(|&x| x)
    }
}

/// Blocks of smoothing cube `a` that lie inside the box.
fn smoothing_cube_blocks(lattice: &BlockLattice, a: [usize; 3]) -> Vec<usize> {
    let n = lattice.n() as i64;
    let range = |ai: usize| {
        let lo = (SMOOTHING as i64 * ai as i64 - 1).max(0);
        let hi = (SMOOTHING as i64 * ai as i64 + SMOOTHING as i64 - 2).min(n - 1);
        lo as usize..=hi as usize
    };
    let mut out = Vec::with_capacity(SMOOTHING.pow(3));
    for l in range(a[2]) {
        for j in range(a[1]) {
            for i in range(a[0]) {
                out.push(lattice.index([i, j, l]));
            }
        }
    }
    out
}

fn smoothing_index(i: usize) -> usize {
    (i + 1) / SMOOTHING
}

/// Bad set, its smoothing and the smoothed set plus a one-block shell.
pub fn bad_region(sigma: &SpinField, lattice: &BlockLattice) -> Result<BadRegion> {
    if sigma.n() != lattice.n() {
        return Err(Error::Incompatible("spin field and lattice sizes differ".into()));
    }
    if !lattice.smoothing_aligned() {
        return Err(Error::Incompatible(format!(
            "{} blocks per side: n + 2 must be a multiple of {SMOOTHING} for smoothing",
            lattice.n()
        )));
    }
    let n = lattice.n();
    let cubes = classify_sampling_cubes(sigma);
    let bad_anchors = cubes.bad_anchors();
    let mut b = vec![false; lattice.len()];
    for &a in &bad_anchors {
        for blk in cubes.blocks(a) {
            b[blk] = true;
        }
    }
    let m = (n + 2) / SMOOTHING;
    let mut hit = vec![false; m * m * m];
    for (idx, _) in b.iter().enumerate().filter(|(_, &x)| x) {
        let c = lattice.coords(idx);
        let a = [smoothing_index(c[0]), smoothing_index(c[1]), smoothing_index(c[2])];
        hit[a[0] + m * (a[1] + m * a[2])] = true;
    }
    let mut b_s = vec![false; lattice.len()];
    for (s, _) in hit.iter().enumerate().filter(|(_, &x)| x) {
        let a = [s % m, (s / m) % m, s / (m * m)];
        for blk in smoothing_cube_blocks(lattice, a) {
            b_s[blk] = true;
        }
    }
    let mut b_bar = b_s.clone();
    for (idx, _) in b_s.iter().enumerate().filter(|(_, &x)| x) {
        for nb in lattice.cube_neighbors(idx, 1) {
            b_bar[nb] = true;
        }
    }
    Ok(BadRegion {
        bad_anchors,
        b,
        b_s,
        b_bar,
    })
}

/// Face-connected components of the blocks where `mask` is true.
pub fn components(mask: &[bool], lattice: &BlockLattice) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for w in lattice.face_neighbors(v) {
                if mask[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

/// Smallest rescaled L∞ distance between blocks of different components
/// (`None` with fewer than two components).
pub fn min_component_distance(comps: &[Vec<usize>], lattice: &BlockLattice) -> Option<usize> {
    if comps.len() < 2 {
        return None;
    }
    // Multi-source breadth-first search in the 26-neighbor graph, whose
    // path metric is the L∞ distance; fronts of different labels meeting
    // across an edge (u, v) realize distance d(u) + d(v) + 1.
    let mut label = vec![usize::MAX; lattice.len()];
    let mut dist = vec![usize::MAX; lattice.len()];
    let mut queue = VecDeque::new();
    for (c, comp) in comps.iter().enumerate() {
        for &v in comp {
            label[v] = c;
            dist[v] = 0;
            queue.push_back(v);
        }
    }
    let mut best = usize::MAX;
    while let Some(v) = queue.pop_front() {
        if 2 * dist[v] + 1 > best {
            break;
        }
        for w in lattice.cube_neighbors(v, 1) {
            if w == v {
                continue;
            }
            if label[w] == usize::MAX {
                label[w] = label[v];
                dist[w] = dist[v] + 1;
                queue.push_back(w);
            } else if label[w] != label[v] {
                best = best.min(dist[v] + dist[w] + 1);
            }
        }
    }
    (best != usize::MAX).then_some(best)
}

/// A connected component of the bad region with its boundary data.
#[derive(Clone, Debug, PartialEq)]
pub struct Contour {
    /// Sorted block indices of the support.
    pub support: Vec<usize>,
    /// Spins on the support, aligned with `support`.
    pub spins: Vec<u8>,
    /// Plates centered in the support.
    pub plates: Vec<Plate>,
    /// Sorted blocks of the exterior component of the support's complement.
    pub exterior: Vec<usize>,
    /// Sorted blocks of each interior component.
    pub interiors: Vec<Vec<usize>>,
    pub m_ext: u8,
    pub m_int: Vec<u8>,
}

impl Contour {
    pub fn holes(&self) -> usize {
        self.interiors.len()
    }

    pub fn contains_block(&self, idx: usize) -> bool {
        self.support.binary_search(&idx).is_ok()
    }

    pub fn in_exterior(&self, idx: usize) -> bool {
        self.exterior.binary_search(&idx).is_ok()
    }

    pub fn report(&self, lattice: &BlockLattice) -> ContourReport {
        ContourReport {
            support: self.support.iter().map(|&b| lattice.coords(b)).collect(),
            size: self.support.len(),
            holes: self.holes(),
            m_ext: self.m_ext,
            m_int: self.m_int.clone(),
            plate_count: self.plates.len(),
        }
    }
}

/// Serializable summary of a contour.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourReport {
    pub support: Vec<[usize; 3]>,
    pub size: usize,
    pub holes: usize,
    pub m_ext: u8,
    pub m_int: Vec<u8>,
    pub plate_count: usize,
}

/// Spin shared by the blocks of `support` adjacent (L∞ distance 1) to `region`.
fn layer_magnetization(
    support_mask: &[bool],
    region: &[usize],
    sigma: &SpinField,
    lattice: &BlockLattice,
) -> Result<u8> {
    let mut m = None;
    for &v in region {
        for w in lattice.cube_neighbors(v, 1) {
            if !support_mask[w] {
                continue;
            }
            let s = sigma.get(w);
            match m {
                None => m = Some(s),
                Some(prev) if prev != s => {
                    return Err(Error::Inconsistent(format!(
                        "boundary layer carries spins {prev} and {s}"
                    )))
                }
                _ => {}
            }
        }
    }
    match m {
        Some(s) if (1..=3).contains(&s) => Ok(s),
        Some(s) => Err(Error::Inconsistent(format!(
            "boundary layer magnetization {s} is not a plate type"
        ))),
        None => Err(Error::Inconsistent("complement component not adjacent to its contour".into())),
    }
}

/// One contour per face-connected component of `B̄`.
///
/// Fails with [`Error::Inconsistent`] when a boundary layer is not uniformly
/// magnetized or the separation guarantees between components fail, both of
/// which the construction rules out for fields obeying a uniform boundary
/// condition.
pub fn extract_contours(
    sigma: &SpinField,
    plates: &[Plate],
    lattice: &BlockLattice,
) -> Result<Vec<Contour>> {
    if lattice.mode() != BoundaryMode::Open {
        return Err(Error::Incompatible(
            "contour exteriors are only defined in an open box".into(),
        ));
    }
    let region = bad_region(sigma, lattice)?;
    if region.is_empty() {
        return Ok(Vec::new());
    }
    let violations = separation_violations(&region, lattice);
    if let Some(v) = violations.first() {
        return Err(Error::Inconsistent(v.clone()));
    }
    let supports = components(&region.b_bar, lattice);
    let mut contours = Vec::with_capacity(supports.len());
    for support in supports {
        let mut in_support = vec![false; lattice.len()];
        for &v in &support {
            in_support[v] = true;
        }
        let rest: Vec<bool> = in_support.iter().map(|&x| !x).collect();
        let mut exterior = None;
        let mut interiors = Vec::new();
        for comp in components(&rest, lattice) {
            if comp.iter().any(|&v| lattice.on_surface(v)) {
                if exterior.is_some() {
                    return Err(Error::Inconsistent(
                        "contour splits the box surface into several exteriors".into(),
                    ));
                }
                exterior = Some(comp);
            } else {
                interiors.push(comp);
            }
        }
        let exterior = exterior.ok_or_else(|| {
            Error::Inconsistent("contour support leaves no exterior component".into())
        })?;
        let m_ext = layer_magnetization(&in_support, &exterior, sigma, lattice)?;
        let m_int = interiors
            .iter()
            .map(|int| layer_magnetization(&in_support, int, sigma, lattice))
            .collect::<Result<Vec<_>>>()?;
        let contour_plates = plates
            .iter()
            .filter(|p| in_support[lattice.block_of(&p.center)])
            .copied()
            .collect();
        contours.push(Contour {
            spins: support.iter().map(|&v| sigma.get(v)).collect(),
            support,
            plates: contour_plates,
            exterior,
            interiors,
            m_ext,
            m_int,
        });
    }
    Ok(contours)
}

fn separation_violations(region: &BadRegion, lattice: &BlockLattice) -> Vec<String> {
    let mut out = Vec::new();
    let complement: Vec<bool> = region.b_bar.iter().map(|&x| !x).collect();
    if let Some(d) = min_component_distance(&components(&complement, lattice), lattice) {
        if d < 2 {
            out.push(format!("complement components {d} blocks apart"));
        }
    }
    if let Some(d) = min_component_distance(&components(&region.b_bar, lattice), lattice) {
        if d <= 6 {
            out.push(format!("bad-region components {d} blocks apart"));
        }
    }
    out
}

/// Every structural guarantee of the contour construction that can be
/// checked on a single field; returns a description of each violation.
pub fn contour_invariant_violations(
    sigma: &SpinField,
    plates: &[Plate],
    lattice: &BlockLattice,
) -> Result<Vec<String>> {
    let region = bad_region(sigma, lattice)?;
    let mut out = Vec::new();
    for v in 0..lattice.len() {
        if region.b[v] && !region.b_s[v] {
            out.push(format!("block {v} in B but not in B_s"));
        }
        if region.b_s[v] && !region.b_bar[v] {
            out.push(format!("block {v} in B_s but not in B̄"));
        }
    }
    let m = (lattice.n() + 2) / SMOOTHING;
    for s in 0..m * m * m {
        let a = [s % m, (s / m) % m, s / (m * m)];
        let blocks = smoothing_cube_blocks(lattice, a);
        let in_bs = blocks.iter().filter(|&&b| region.b_s[b]).count();
        if in_bs != 0 && in_bs != blocks.len() {
            out.push(format!("smoothing cube {a:?} only partly in B_s"));
        }
        if in_bs != 0 && !blocks.iter().any(|&b| region.b[b]) {
            out.push(format!("smoothing cube {a:?} in B_s meets no bad sampling cube"));
        }
    }
    out.extend(separation_violations(&region, lattice));
    if let Err(e) = extract_contours(sigma, plates, lattice) {
        out.push(e.to_string());
    }
    Ok(out)
}

/// Whether a plate set links to a contour: some plate is centered in the
/// support and another outside it, or some plate centered in the exterior
/// overlaps a plate of the contour.
pub fn contour_link_indicator(
    contour: &Contour,
    plates: &[Plate],
    params: &ModelParams,
    lattice: &BlockLattice,
    sim_box: &SimBox,
) -> bool {
    let inside = plates
        .iter()
        .filter(|p| contour.contains_block(lattice.block_of(&p.center)))
        .count();
    if inside > 0 && inside < plates.len() {
        return true;
    }
    plates.iter().any(|p| {
        contour.in_exterior(lattice.block_of(&p.center))
            && contour
                .plates
                .iter()
                .any(|q| overlap(p, q, params, sim_box))
    })
}

/// Color of a pebble: the type of its plates, black when empty.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PebbleColor {
    Red,
    Green,
    Blue,
    Black,
}

impl PebbleColor {
    pub fn of_type(t: PlateType) -> Self {
        match t {
            PlateType::One => PebbleColor::Red,
            PlateType::Two => PebbleColor::Green,
            PlateType::Three => PebbleColor::Blue,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Pebble {
    pub coords: [usize; 3],
    pub color: PebbleColor,
    /// Holds two plates of different orientations.
    pub typical: bool,
    pub plates: usize,
}

/// The `m³` pebbles of one block, `m = k^{1-α}`, indexed `a + m(b + m c)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PebbleGrid {
    per_side: usize,
    pebbles: Vec<Pebble>,
}

/// Pebbles per block side; pebble analysis needs `k^{1-α}` to be an integer.
pub fn pebbles_per_side(params: &ModelParams) -> Result<usize> {
    let m = params.block_side() / params.pebble_side();
    let r = m.round();
    if r < 1.0 || (m - r).abs() > 1e-9 * m {
        return Err(Error::Incompatible(format!(
            "k^(1-α) = {m} is not an integer, pebbles do not tile a block"
        )));
    }
    Ok(r as usize)
}

/// Lower bound on atypical pebbles in a block holding two plate types.
pub fn atypical_threshold(params: &ModelParams) -> f64 {
    params.k().powf(2.0 * (1.0 - params.alpha())) / 2.0
}

impl PebbleGrid {
    /// Classifies the pebbles of the block with lower corner `origin`;
    /// plates centered outside the block are ignored.
    pub fn classify(origin: [f64; 3], plates: &[Plate], params: &ModelParams) -> Result<Self> {
        let m = pebbles_per_side(params)?;
        let ell = params.block_side();
        let ps = params.pebble_side();
        let mut seen = vec![[0usize; 6]; m * m * m];
        for p in plates {
            let rel = [
                p.center[0] - origin[0],
                p.center[1] - origin[1],
                p.center[2] - origin[2],
            ];
            if rel.iter().any(|&r| !(0.0..ell).contains(&r)) {
                continue;
            }
            let c = rel.map(|r| ((r / ps).floor() as usize).min(m - 1));
            seen[c[0] + m * (c[1] + m * c[2])][p.orientation.index()] += 1;
        }
        let mut pebbles = Vec::with_capacity(m * m * m);
        for (idx, counts) in seen.iter().enumerate() {
            let coords = [idx % m, (idx / m) % m, idx / (m * m)];
            let mut types = PlateType::ALL
                .iter()
                .filter(|t| t.orientations().iter().any(|o| counts[o.index()] > 0));
            let color = match (types.next(), types.next()) {
                (None, _) => PebbleColor::Black,
                (Some(t), None) => PebbleColor::of_type(*t),
                (Some(_), Some(_)) => {
                    return Err(Error::ImpossibleConfiguration(format!(
                        "pebble {coords:?} holds plates of two types"
                    )))
                }
            };
            let orientations = counts.iter().filter(|&&c| c > 0).count();
            pebbles.push(Pebble {
                coords,
                color,
                typical: orientations >= 2,
                plates: counts.iter().sum(),
            });
        }
        Ok(Self { per_side: m, pebbles })
    }

    /// Builds a grid from explicit pebbles (e.g. a hand-made coloring).
    pub fn from_pebbles(per_side: usize, pebbles: Vec<Pebble>) -> Result<Self> {
        if pebbles.len() != per_side.pow(3) {
            return Err(Error::InvalidParameter("pebble count must be m³".into()));
        }
        Ok(Self { per_side, pebbles })
    }

    pub fn per_side(&self) -> usize {
        self.per_side
    }

    pub fn pebbles(&self) -> &[Pebble] {
        &self.pebbles
    }

    pub fn count_atypical(&self) -> usize {
        self.pebbles.iter().filter(|p| !p.typical).count()
    }

    /// Whether the tile through `pebble` orthogonal to `axis` contains a
    /// typical pebble of a color other than `color`.
    fn tile_has_foreign_typical(&self, pebble: &Pebble, axis: usize, color: PebbleColor) -> bool {
        self.pebbles.iter().any(|q| {
            q.coords[axis] == pebble.coords[axis] && q.typical && q.color != color
        })
    }

    /// Checks both tile properties of the coloring, see [`TileProperty`].
    pub fn check_tile_properties(&self) -> TileReport {
        let mut violations = Vec::new();
        for (i, p) in self.pebbles.iter().enumerate() {
            if p.typical {
                for axis in 0..3 {
                    if self.tile_has_foreign_typical(p, axis, p.color) {
                        violations.push(TileViolation {
                            pebble: i,
                            property: TileProperty::TypicalTiles,
                            axis: Some(axis),
                        });
                    }
                }
            } else if p.color != PebbleColor::Black
                && (0..3).all(|axis| self.tile_has_foreign_typical(p, axis, p.color))
            {
                violations.push(TileViolation {
                    pebble: i,
                    property: TileProperty::AtypicalTile,
                    axis: None,
                });
            }
        }
        TileReport { violations }
    }
}

/// Classifies the pebbles of block `block` of `lattice`.
pub fn pebble_classify(
    block: usize,
    plates: &[Plate],
    params: &ModelParams,
    lattice: &BlockLattice,
) -> Result<PebbleGrid> {
    PebbleGrid::classify(lattice.block_origin(block), plates, params)
}

pub fn count_atypical(
    block: usize,
    plates: &[Plate],
    params: &ModelParams,
    lattice: &BlockLattice,
) -> Result<usize> {
    Ok(pebble_classify(block, plates, params, lattice)?.count_atypical())
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum TileProperty {
    /// A typical pebble shares a tile with a typical pebble of another color.
    TypicalTiles,
    /// Every tile through a non-empty atypical pebble holds a typical pebble
    /// of another color.
    AtypicalTile,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TileViolation {
    pub pebble: usize,
    pub property: TileProperty,
    pub axis: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileReport {
    pub violations: Vec<TileViolation>,
}

impl TileReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}
