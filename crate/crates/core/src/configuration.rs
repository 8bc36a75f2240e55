//! Mutable hard-plate configurations indexed by a uniform cell grid.
//!
//! Cells have side at least `k`, the largest per-axis overlap reach, so every
//! overlap partner of a plate sits in the 27-cell neighborhood of its cell.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{overlap_displacement, ModelParams, Orientation, Plate};

/// Snapshot and report schema version.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryMode {
    Open,
    Periodic,
}

/// Simulation box `[0, L_1) × [0, L_2) × [0, L_3)`; cubic unless built with
/// [`SimBox::cuboid`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimBox {
    sides: [f64; 3],
    mode: BoundaryMode,
    strict_containment: bool,
}

impl SimBox {
    pub fn cubic(side: f64, mode: BoundaryMode) -> Result<Self> {
        Self::cuboid([side; 3], mode)
    }

    pub fn cuboid(sides: [f64; 3], mode: BoundaryMode) -> Result<Self> {
        if sides.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "box sides must be positive, got {sides:?}"
            )));
        }
        Ok(Self {
            sides,
            mode,
            strict_containment: false,
        })
    }

    /// Require plate supports to lie entirely inside an open box (wall
    /// studies). Off by default: only centers are confined.
    pub fn with_strict_containment(mut self, on: bool) -> Self {
        self.strict_containment = on;
        self
    }

    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }

    pub fn sides(&self) -> [f64; 3] {
        self.sides
    }

    /// Side of a cubic box (the first side otherwise).
    pub fn side(&self) -> f64 {
        self.sides[0]
    }

    pub fn is_cubic(&self) -> bool {
        self.sides[0] == self.sides[1] && self.sides[1] == self.sides[2]
    }

    pub fn strict_containment(&self) -> bool {
        self.strict_containment
    }

    pub fn volume(&self) -> f64 {
        self.sides.iter().product()
    }

    pub fn contains(&self, x: &[f64; 3]) -> bool {
        (0..3).all(|i| x[i] >= 0.0 && x[i] < self.sides[i])
    }

    /// Center displacement `b - a`, minimum image in periodic mode.
    #[inline]
    pub fn displacement(&self, a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
        let mut d = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
        if self.mode == BoundaryMode::Periodic {
            for i in 0..3 {
                let l = self.sides[i];
                d[i] -= l * (d[i] / l).round();
            }
        }
        d
    }

    /// Wraps a point back into the box (periodic mode only; identity otherwise).
    pub fn wrap(&self, x: [f64; 3]) -> [f64; 3] {
        if self.mode != BoundaryMode::Periodic {
            return x;
        }
        let mut y = x;
        for i in 0..3 {
            let l = self.sides[i];
            y[i] = x[i].rem_euclid(l);
            if y[i] >= l {
                y[i] = 0.0;
            }
        }
        y
    }

    fn support_inside(&self, p: &Plate, params: &ModelParams) -> bool {
        let (lo, hi) = p.support(params);
        (0..3).all(|i| lo[i] >= 0.0 && hi[i] <= self.sides[i])
    }
}

/// Stable handle of a stored plate.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PlateHandle(pub usize);

#[derive(Clone, Debug)]
struct Slot {
    plate: Plate,
    cell: usize,
    cell_pos: usize,
    live_pos: usize,
}

#[derive(Copy, Clone, Debug)]
struct CellEntry {
    center: [f64; 3],
    orient: u8,
    handle: u32,
}

/// Cell-indexed container of mutually non-overlapping plates.
#[derive(Clone, Debug)]
pub struct PlateSet {
    params: ModelParams,
    sim_box: SimBox,
    slots: Vec<Option<Slot>>,
    free: Vec<usize>,
    live: Vec<usize>,
    dims: [usize; 3],
    cell_side: [f64; 3],
    cells: Vec<Vec<CellEntry>>,
    neighbors: Vec<Vec<usize>>,
    counts: [usize; 6],
}

impl PlateSet {
    pub fn new(params: ModelParams, sim_box: SimBox) -> Result<Self> {
        let k = params.max_reach();
        if sim_box.mode() == BoundaryMode::Periodic && sim_box.sides().iter().any(|&l| l < 2.0 * k)
        {
            return Err(Error::InvalidParameter(format!(
                "periodic box sides {:?} must be at least 2k = {}",
                sim_box.sides(),
                2.0 * k
            )));
        }
        let mut dims = [1usize; 3];
        let mut cell_side = [0.0; 3];
        for i in 0..3 {
            let l = sim_box.sides()[i];
            dims[i] = ((l / k).floor() as usize).max(1);
            cell_side[i] = l / dims[i] as f64;
        }
        let ncells = dims[0] * dims[1] * dims[2];
        let periodic = sim_box.mode() == BoundaryMode::Periodic;
        let mut neighbors = Vec::with_capacity(ncells);
        for c in 0..ncells {
            let (cx, cy, cz) = (c % dims[0], (c / dims[0]) % dims[1], c / (dims[0] * dims[1]));
            let mut list = Vec::with_capacity(27);
            for dz in -1i64..=1 {
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        let mut idx = [cx as i64 + dx, cy as i64 + dy, cz as i64 + dz];
                        let mut ok = true;
                        for ax in 0..3 {
                            let n = dims[ax] as i64;
                            if idx[ax] < 0 || idx[ax] >= n {
                                if periodic {
                                    idx[ax] = idx[ax].rem_euclid(n);
                                } else {
                                    ok = false;
                                }
                            }
                        }
                        if ok {
                            let lin = idx[0] as usize
                                + dims[0] * (idx[1] as usize + dims[1] * idx[2] as usize);
                            if !list.contains(&lin) {
                                list.push(lin);
                            }
                        }
                    }
                }
            }
            list.sort_unstable();
            neighbors.push(list);
        }
        Ok(Self {
            params,
            sim_box,
            slots: Vec::new(),
            free: Vec::new(),
            live: Vec::new(),
            dims,
            cell_side,
            cells: vec![Vec::new(); ncells],
            neighbors,
            counts: [0; 6],
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn sim_box(&self) -> &SimBox {
        &self.sim_box
    }

    pub fn len(&self) -> usize {
        self.live.len()
    }

    pub fn is_empty(&self) -> bool {
        self.live.is_empty()
    }

    pub fn cell_dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_side(&self) -> [f64; 3] {
        self.cell_side
    }

    pub fn get(&self, h: PlateHandle) -> Option<&Plate> {
        self.slots.get(h.0).and_then(|s| s.as_ref()).map(|s| &s.plate)
    }

    /// Handle of the `i`-th live plate (dense order, `i < len()`).
    pub fn handle_at(&self, i: usize) -> PlateHandle {
        PlateHandle(self.live[i])
    }

    pub fn handles(&self) -> impl Iterator<Item = PlateHandle> + '_ {
        self.live.iter().map(|&h| PlateHandle(h))
    }

    pub fn iter(&self) -> impl Iterator<Item = &Plate> + '_ {
        self.live
            .iter()
            .map(move |&h| &self.slots[h].as_ref().expect("live slot").plate)
    }

    pub fn plates(&self) -> Vec<Plate> {
        self.iter().copied().collect()
    }

    /// Per-orientation counts in canonical order `1a, 1b, 2a, 2b, 3a, 3b`.
    pub fn count_by_orientation(&self) -> [usize; 6] {
        self.counts
    }

    fn cell_of(&self, x: &[f64; 3]) -> usize {
        let mut idx = [0usize; 3];
        for i in 0..3 {
            let c = (x[i] / self.cell_side[i]).floor();
            idx[i] = if c < 0.0 {
                0
            } else {
                (c as usize).min(self.dims[i] - 1)
            };
        }
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    fn check_center(&self, p: &Plate) -> Result<()> {
        if !self.sim_box.contains(&p.center) {
            return Err(Error::OutsideBox(p.center));
        }
        Ok(())
    }

    /// Whether a plate may sit in this box at all (strict-containment mode).
    pub fn admissible(&self, p: &Plate) -> bool {
        self.sim_box.contains(&p.center)
            && (!self.sim_box.strict_containment() || self.sim_box.support_inside(p, &self.params))
    }

    fn overlaps_impl(&self, p: &Plate, skip: Option<usize>) -> bool {
        let oi = p.orientation.index();
        let cell = self.cell_of(&p.center);
        for &nc in &self.neighbors[cell] {
            for e in &self.cells[nc] {
                if Some(e.handle as usize) == skip {
                    continue;
                }
                let d = self.sim_box.displacement(&p.center, &e.center);
                if overlap_displacement(d, self.params.half_sums_by_index(oi, e.orient as usize)) {
                    return true;
                }
            }
        }
        false
    }

    /// Whether `p` overlaps any stored plate.
    pub fn overlaps_any(&self, p: &Plate) -> bool {
        self.overlaps_impl(p, None)
    }

    /// As [`overlaps_any`](Self::overlaps_any), ignoring the plate stored under `h`.
    pub fn overlaps_any_except(&self, p: &Plate, h: PlateHandle) -> bool {
        self.overlaps_impl(p, Some(h.0))
    }

    /// O(N) rescan, used to cross-check the cell index.
    pub fn overlaps_any_brute(&self, p: &Plate) -> bool {
        self.iter().any(|q| {
            let d = self.sim_box.displacement(&p.center, &q.center);
            overlap_displacement(d, &self.params.half_sums(p.orientation, q.orientation))
        })
    }

    /// Inserts `p` iff it overlaps no stored plate.
    pub fn insert_if_free(&mut self, p: Plate) -> Result<Option<PlateHandle>> {
        self.check_center(&p)?;
        if !self.admissible(&p) || self.overlaps_any(&p) {
            return Ok(None);
        }
        Ok(Some(self.insert_unchecked(p)?))
    }

    /// Inserts without the hard-core test (ideal-gas mode and test fixtures).
    pub fn insert_unchecked(&mut self, p: Plate) -> Result<PlateHandle> {
        self.check_center(&p)?;
        let h = self.free.pop().unwrap_or_else(|| {
            self.slots.push(None);
            self.slots.len() - 1
        });
        let cell = self.cell_of(&p.center);
        let cell_pos = self.cells[cell].len();
        self.cells[cell].push(CellEntry {
            center: p.center,
            orient: p.orientation.index() as u8,
            handle: h as u32,
        });
        let live_pos = self.live.len();
        self.live.push(h);
        self.counts[p.orientation.index()] += 1;
        self.slots[h] = Some(Slot {
            plate: p,
            cell,
            cell_pos,
            live_pos,
        });
        Ok(PlateHandle(h))
    }

    fn detach_from_cell(&mut self, cell: usize, cell_pos: usize) {
        self.cells[cell].swap_remove(cell_pos);
        if let Some(moved) = self.cells[cell].get(cell_pos) {
            let mh = moved.handle as usize;
            self.slots[mh].as_mut().expect("moved slot").cell_pos = cell_pos;
        }
    }

    pub fn remove(&mut self, h: PlateHandle) -> Result<Plate> {
        let slot = self
            .slots
            .get_mut(h.0)
            .and_then(|s| s.take())
            .ok_or(Error::InvalidHandle(h.0))?;
        self.detach_from_cell(slot.cell, slot.cell_pos);
        self.live.swap_remove(slot.live_pos);
        if let Some(&moved) = self.live.get(slot.live_pos) {
            self.slots[moved].as_mut().expect("moved live slot").live_pos = slot.live_pos;
        }
        self.counts[slot.plate.orientation.index()] -= 1;
        self.free.push(h.0);
        Ok(slot.plate)
    }

    /// Replaces the plate under `h` by `p` without checking overlaps.
    pub fn replace_unchecked(&mut self, h: PlateHandle, p: Plate) -> Result<()> {
        self.check_center(&p)?;
        let (old_cell, old_pos, old_o) = {
            let s = self
                .slots
                .get(h.0)
                .and_then(|s| s.as_ref())
                .ok_or(Error::InvalidHandle(h.0))?;
            (s.cell, s.cell_pos, s.plate.orientation)
        };
        let new_cell = self.cell_of(&p.center);
        let entry = CellEntry {
            center: p.center,
            orient: p.orientation.index() as u8,
            handle: h.0 as u32,
        };
        let new_pos = if new_cell == old_cell {
            self.cells[old_cell][old_pos] = entry;
            old_pos
        } else {
            self.detach_from_cell(old_cell, old_pos);
            self.cells[new_cell].push(entry);
            self.cells[new_cell].len() - 1
        };
        self.counts[old_o.index()] -= 1;
        self.counts[p.orientation.index()] += 1;
        let s = self.slots[h.0].as_mut().expect("slot");
        s.plate = p;
        s.cell = new_cell;
        s.cell_pos = new_pos;
        Ok(())
    }

    /// Moves the plate under `h` to `p` iff the new position overlaps nothing
    /// else. Returns whether the move happened.
    pub fn move_if_free(&mut self, h: PlateHandle, p: Plate) -> Result<bool> {
        if self.get(h).is_none() {
            return Err(Error::InvalidHandle(h.0));
        }
        if !self.admissible(&p) || self.overlaps_any_except(&p, h) {
            return Ok(false);
        }
        self.replace_unchecked(h, p)?;
        Ok(true)
    }

    /// Cell buckets as sorted handle lists (for comparing against a rebuild).
    pub fn cell_membership(&self) -> Vec<Vec<usize>> {
        self.cells
            .iter()
            .map(|c| {
                let mut v: Vec<usize> = c.iter().map(|e| e.handle as usize).collect();
                v.sort_unstable();
                v
            })
            .collect()
    }

    /// Whether the incremental index matches a from-scratch rebuild and all
    /// bookkeeping is consistent.
    pub fn index_consistent(&self) -> bool {
        let mut rebuilt = vec![Vec::new(); self.cells.len()];
        for &h in &self.live {
            let s = self.slots[h].as_ref().expect("live slot");
            rebuilt[self.cell_of(&s.plate.center)].push(h);
        }
        for v in &mut rebuilt {
            v.sort_unstable();
        }
        if rebuilt != self.cell_membership() {
            return false;
        }
        let mut counts = [0usize; 6];
        for (pos, &h) in self.live.iter().enumerate() {
            let s = match self.slots[h].as_ref() {
                Some(s) => s,
                None => return false,
            };
            counts[s.plate.orientation.index()] += 1;
            let e = &self.cells[s.cell][s.cell_pos];
            if s.live_pos != pos || e.handle as usize != h || e.center != s.plate.center {
                return false;
            }
        }
        counts == self.counts
    }

    /// Full pairwise check of the hard-core constraint.
    pub fn hard_core_holds(&self) -> bool {
        let plates = self.plates();
        for i in 0..plates.len() {
            for j in (i + 1)..plates.len() {
                let d = self.sim_box.displacement(&plates[i].center, &plates[j].center);
                let h = self
                    .params
                    .half_sums(plates[i].orientation, plates[j].orientation);
                if overlap_displacement(d, &h) {
                    return false;
                }
            }
        }
        true
    }

    /// Removes every plate.
    pub fn clear(&mut self) {
        self.slots.clear();
        self.free.clear();
        self.live.clear();
        for c in &mut self.cells {
            c.clear();
        }
        self.counts = [0; 6];
    }
}

/// Header record of a snapshot file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub format_version: u32,
    pub k: f64,
    pub alpha: f64,
    #[serde(rename = "L")]
    pub side: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<[f64; 3]>,
    pub mode: BoundaryMode,
    pub seed: u64,
}

impl SnapshotHeader {
    pub fn new(params: &ModelParams, sim_box: &SimBox, seed: u64) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            k: params.k(),
            alpha: params.alpha(),
            side: sim_box.side(),
            sides: (!sim_box.is_cubic()).then(|| sim_box.sides()),
            mode: sim_box.mode(),
            seed,
        }
    }

    pub fn params(&self) -> Result<ModelParams> {
        ModelParams::new(self.k, self.alpha)
    }

    pub fn sim_box(&self) -> Result<SimBox> {
        SimBox::cuboid(self.sides.unwrap_or([self.side; 3]), self.mode)
    }
}

/// One recorded configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub sweep: u64,
    pub plates: Vec<Plate>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(SnapshotHeader),
    Snapshot {
        index: usize,
        sweep: u64,
        count: usize,
    },
    Plate {
        x: f64,
        y: f64,
        z: f64,
        o: Orientation,
    },
}

/// Writes the header record, then each snapshot as a `snapshot` record
/// followed by one `plate` record per plate.
pub fn write_snapshots<W: Write>(
    mut w: W,
    header: &SnapshotHeader,
    snapshots: &[Snapshot],
) -> Result<()> {
    serde_json::to_writer(&mut w, &Record::Header(header.clone()))?;
    writeln!(w)?;
    for (index, s) in snapshots.iter().enumerate() {
        serde_json::to_writer(
            &mut w,
            &Record::Snapshot {
                index,
                sweep: s.sweep,
                count: s.plates.len(),
            },
        )?;
        writeln!(w)?;
        for p in &s.plates {
            serde_json::to_writer(
                &mut w,
                &Record::Plate {
                    x: p.center[0],
                    y: p.center[1],
                    z: p.center[2],
                    o: p.orientation,
                },
            )?;
            writeln!(w)?;
        }
    }
    Ok(())
}

/// Parses a snapshot stream written by [`write_snapshots`].
pub fn read_snapshots<R: BufRead>(r: R) -> Result<(SnapshotHeader, Vec<Snapshot>)> {
    let mut header = None;
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut expected = 0usize;
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))?;
        match rec {
            Record::Header(h) => {
                if header.is_some() {
                    return Err(Error::Parse("duplicate header record".into()));
                }
                header = Some(h);
            }
            Record::Snapshot { sweep, count, .. } => {
                if header.is_none() {
                    return Err(Error::Parse("snapshot before header".into()));
                }
                if let Some(last) = snapshots.last() {
                    if last.plates.len() != expected {
                        return Err(Error::Parse("truncated snapshot".into()));
                    }
                }
                expected = count;
                snapshots.push(Snapshot {
                    sweep,
                    plates: Vec::with_capacity(count),
                });
            }
            Record::Plate { x, y, z, o } => {
                let s = snapshots
                    .last_mut()
                    .ok_or_else(|| Error::Parse("plate record outside a snapshot".into()))?;
                s.plates.push(Plate::new([x, y, z], o));
            }
        }
    }
    if let Some(last) = snapshots.last() {
        if last.plates.len() != expected {
            return Err(Error::Parse("truncated snapshot".into()));
        }
    }
    let header = header.ok_or_else(|| Error::Parse("missing header record".into()))?;
    Ok((header, snapshots))
}
