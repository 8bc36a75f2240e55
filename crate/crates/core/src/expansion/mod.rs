//! Ursell functions, low-order Mayer expansions of the plate partition
//! function with few-body oracles, and a small hard-core polymer model.

pub mod polymer;
pub mod quadrature;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::configuration::{BoundaryMode, SimBox};
use crate::error::{Error, Result};
use crate::geometry::{excluded_volume, overlap, overlap_displacement, ModelParams, Orientation, Plate, PlateType};
use crate::stats::Estimate;
use quadrature::{clipped_pair_overlap, configuration_integral, CenterBox};

pub use polymer::{polymer_log_z_cluster, polymer_z_exact, Polymer, PolymerModel};

/// Largest vertex count accepted by the Ursell evaluators.
pub const MAX_URSELL_VERTICES: usize = 10;

/// Relative-correction scales of the low-density expansion.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MayerDiagnostics {
    /// `z k^{1+α}`: same-orientation correction.
    pub z_k_1_alpha: f64,
    /// `z k²`: same-type correction.
    pub z_k2: f64,
    /// `exp(-z k^{2+α})`.
    pub exp_neg_z_k_2_alpha: f64,
}

impl MayerDiagnostics {
    pub fn new(params: &ModelParams, z: f64) -> Self {
        let (k, a) = (params.k(), params.alpha());
        Self {
            z_k_1_alpha: z * k.powf(1.0 + a),
            z_k2: z * k * k,
            exp_neg_z_k_2_alpha: (-z * k.powf(2.0 + a)).exp(),
        }
    }
}

/// A truncated series value with its truncation remainder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesEstimate {
    pub value: f64,
    pub order: usize,
    /// Bound on `|exact - value|` from the discarded orders.
    pub remainder: f64,
    /// Whether `remainder` is a proven bound rather than a heuristic.
    pub rigorous: bool,
    /// Standard error from Monte Carlo integration, zero when exact.
    pub stat_error: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<MayerDiagnostics>,
}

/// Simple undirected graph on at most [`MAX_URSELL_VERTICES`] vertices,
/// stored as adjacency bitmasks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OverlapGraph {
    adj: Vec<u32>,
}

impl OverlapGraph {
    pub fn from_adjacency(adj: Vec<u32>) -> Result<Self> {
        let n = adj.len();
        if n > MAX_URSELL_VERTICES {
            return Err(Error::TooLarge(format!(
                "{n} vertices, at most {MAX_URSELL_VERTICES} supported"
            )));
        }
        for (i, &row) in adj.iter().enumerate() {
            if row >> n != 0 || row & (1 << i) != 0 {
                return Err(Error::InvalidParameter("malformed adjacency".into()));
            }
            for j in 0..n {
                if (row >> j) & 1 != (adj[j] >> i) & 1 {
                    return Err(Error::InvalidParameter("adjacency not symmetric".into()));
                }
            }
        }
        Ok(Self { adj })
    }

    /// Edges between overlapping plates.
    pub fn from_plates(plates: &[Plate], params: &ModelParams, sim_box: &SimBox) -> Result<Self> {
        let n = plates.len();
        if n > MAX_URSELL_VERTICES {
            return Err(Error::TooLarge(format!(
                "{n} plates, at most {MAX_URSELL_VERTICES} supported"
            )));
        }
        let mut adj = vec![0u32; n];
        for i in 0..n {
            for j in (i + 1)..n {
                if overlap(&plates[i], &plates[j], params, sim_box) {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
            }
        }
        Ok(Self { adj })
    }

    pub fn len(&self) -> usize {
        self.adj.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adj.is_empty()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i] >> j & 1 == 1
    }

    pub fn is_connected(&self) -> bool {
        let n = self.adj.len();
        if n == 0 {
            return true;
        }
        let full = (1u32 << n) - 1;
        let mut seen = 1u32;
        let mut frontier = 1u32;
        while frontier != 0 {
            let v = frontier.trailing_zeros() as usize;
            frontier &= frontier - 1;
            let new = self.adj[v] & !seen;
            seen |= new;
            frontier |= new;
        }
        seen == full
    }

    /// `φ^T = Σ_{connected spanning edge subsets E} (-1)^{|E|}`.
    ///
    /// Uses the partition recursion `F(S) = Σ_π ∏_{B∈π} φ^T(B)`, where
    /// `F(S) = ∏_{i<j∈S} (1 - O_ij)` is the indicator that `S` is
    /// independent, splitting off the block that holds the lowest vertex.
    pub fn ursell(&self) -> i64 {
        let n = self.adj.len();
        if n == 0 {
            return 0;
        }
        let size = 1usize << n;
        let mut indep = vec![false; size];
        indep[0] = true;
        for s in 1..size {
            let v = s.trailing_zeros() as usize;
            let rest = s & (s - 1);
            indep[s] = indep[rest] && (self.adj[v] as usize & rest) == 0;
        }
        let f = |s: usize| indep[s] as i64;
        let mut c = vec![0i64; size];
        for s in 1..size {
            let low = s & s.wrapping_neg();
            let rest = s ^ low;
            let mut acc = f(s);
            // Proper subsets t of `rest`; the block is t ∪ {low}.
            let mut t = rest;
            loop {
                t = t.wrapping_sub(1) & rest;
                if t == rest {
                    break;
                }
                acc -= c[t | low] * f(rest ^ t);
                if t == 0 {
                    break;
                }
            }
            c[s] = acc;
        }
        c[size - 1]
    }

    /// Reference evaluation by enumerating every edge subset.
    pub fn ursell_by_edge_subsets(&self) -> Result<i64> {
        let n = self.adj.len();
        let edges: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.has_edge(i, j))
            .collect();
        if edges.len() > 24 {
            return Err(Error::TooLarge(format!("{} edges", edges.len())));
        }
        if n == 0 {
            return Ok(0);
        }
        let mut total = 0i64;
        for mask in 0u64..(1 << edges.len()) {
            let mut adj = vec![0u32; n];
            for (e, &(i, j)) in edges.iter().enumerate() {
                if mask >> e & 1 == 1 {
                    adj[i] |= 1 << j;
                    adj[j] |= 1 << i;
                }
            }
            if (OverlapGraph { adj }).is_connected() {
                total += if mask.count_ones() % 2 == 0 { 1 } else { -1 };
            }
        }
        Ok(total)
    }
}

/// Ursell function of a plate configuration; 0 unless the overlap graph is
/// connected, 1 for a single plate.
pub fn ursell(plates: &[Plate], params: &ModelParams, sim_box: &SimBox) -> Result<i64> {
    Ok(OverlapGraph::from_plates(plates, params, sim_box)?.ursell())
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn check_orientations(orientations: &[Orientation]) -> Result<()> {
    if orientations.is_empty() {
        return Err(Error::InvalidParameter("empty orientation set".into()));
    }
    let mut seen = [false; 6];
    for o in orientations {
        if std::mem::replace(&mut seen[o.index()], true) {
            return Err(Error::InvalidParameter(format!("orientation {o} repeated")));
        }
    }
    Ok(())
}

/// Options of [`brute_force_log_z`].
#[derive(Clone, Debug, PartialEq)]
pub struct BruteForce {
    /// Highest particle number kept, at most 4.
    pub n_max: usize,
    /// Largest acceptable bound on the truncation error of `log Z`.
    pub tolerance: f64,
    /// Samples for the four-body Monte Carlo integral.
    pub mc_samples: u64,
    pub seed: u64,
    /// Set to false for the ideal gas.
    pub hard_core: bool,
}

impl Default for BruteForce {
    fn default() -> Self {
        Self {
            n_max: 3,
            tolerance: 1e-3,
            mc_samples: 200_000,
            seed: 0,
            hard_core: true,
        }
    }
}

/// Orientation-summed `n`-body integrals `c_n = Σ_o ∫_{R^n} φ` of an open
/// region, exact for `n ≤ 3`.
pub fn configuration_coefficient(
    params: &ModelParams,
    region: CenterBox,
    orientations: &[Orientation],
    n: usize,
) -> f64 {
    let m = orientations.len();
    let mut total = 0.0;
    let mut idx = vec![0usize; n];
    loop {
        let os: Vec<Orientation> = idx.iter().map(|&i| orientations[i]).collect();
        total += configuration_integral(params, &vec![region; n], &os);
        let mut d = 0;
        loop {
            if d == n {
                return total;
            }
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// `log Z` of an open region summed directly over up to four plates.
///
/// Terms up to three plates are exact; the four-plate integral is a
/// seeded Monte Carlo estimate. The remainder bounds the discarded orders
/// by the ideal-gas tail `Σ_{n>n_max} x^n/n!`, `x = m z |R|`.
pub fn brute_force_log_z(
    params: &ModelParams,
    region: &SimBox,
    orientations: &[Orientation],
    z: f64,
    opts: &BruteForce,
) -> Result<SeriesEstimate> {
    check_orientations(orientations)?;
    if opts.n_max > 4 {
        return Err(Error::InvalidParameter("n_max must be at most 4".into()));
    }
    if region.mode() != BoundaryMode::Open {
        return Err(Error::Incompatible("brute-force sums need an open region".into()));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter("activity must be nonnegative".into()));
    }
    let cb = CenterBox::new([0.0; 3], region.sides());
    let m = orientations.len() as f64;
    let vol = cb.volume();
    let x = m * z * vol;
    let mut z_trunc = 0.0;
    let mut var = 0.0;
    for n in 0..=opts.n_max {
        let w = z.powi(n as i32) / factorial(n);
        if !opts.hard_core {
            z_trunc += w * (m * vol).powi(n as i32);
        } else if n <= 3 {
            z_trunc += w * configuration_coefficient(params, cb, orientations, n);
        } else {
            let (c, se) = four_body_mc(params, cb, orientations, opts.mc_samples, opts.seed);
            z_trunc += w * c;
            var += (w * se).powi(2);
        }
    }
    let tail = x.powi(opts.n_max as i32 + 1) / factorial(opts.n_max + 1) * x.exp();
    let remainder = tail / z_trunc;
    if remainder > opts.tolerance {
        return Err(Error::NotConvergent(format!(
            "truncation bound {remainder:.3e} exceeds tolerance {:.3e} at n_max = {}",
            opts.tolerance, opts.n_max
        )));
    }
    Ok(SeriesEstimate {
        value: z_trunc.ln(),
        order: opts.n_max,
        remainder,
        rigorous: true,
        stat_error: var.sqrt() / z_trunc,
        diagnostics: None,
    })
}

fn four_body_mc(
    params: &ModelParams,
    region: CenterBox,
    orientations: &[Orientation],
    samples: u64,
    seed: u64,
) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = orientations.len();
    let mut hits = 0u64;
    for _ in 0..samples {
        let mut ps = [(0usize, [0.0f64; 3]); 4];
        for p in &mut ps {
            p.0 = orientations[rng.gen_range(0..m)].index();
            for i in 0..3 {
                p.1[i] = region.lo[i] + rng.gen::<f64>() * (region.hi[i] - region.lo[i]);
            }
        }
        let free = (0..4).all(|i| {
            ((i + 1)..4).all(|j| {
                let d = [0, 1, 2].map(|a| ps[j].1[a] - ps[i].1[a]);
                !overlap_displacement(d, &half_sums_idx(params, ps[i].0, ps[j].0))
            })
        });
        hits += free as u64;
    }
    let p = hits as f64 / samples as f64;
    let scale = (m as f64 * region.volume()).powi(4);
    let se = (p * (1.0 - p) / samples as f64).sqrt();
    (p * scale, se * scale)
}

fn half_sums_idx(params: &ModelParams, i: usize, j: usize) -> [f64; 3] {
    *params.half_sums_by_index(i, j)
}

/// `Σ_{o,o'} ∫∫_{R²} O(p, p')`: the pair overlap integral of a region.
pub fn pair_overlap_integral(params: &ModelParams, region: &SimBox, orientations: &[Orientation]) -> f64 {
    let s = region.sides();
    let mut total = 0.0;
    for &o in orientations {
        for &o2 in orientations {
            let h = params.half_sums(o, o2);
            total += match region.mode() {
                BoundaryMode::Periodic => region.volume() * excluded_volume(o, o2, params),
                BoundaryMode::Open => (0..3).map(|i| clipped_pair_overlap(h[i], s[i])).product(),
            };
        }
    }
    total
}

/// Largest orientation-summed excluded volume `max_o Σ_{o'} V(o, o')`.
fn tree_weight(params: &ModelParams, orientations: &[Orientation]) -> f64 {
    orientations
        .iter()
        .map(|&o| orientations.iter().map(|&o2| excluded_volume(o, o2, params)).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Tree-graph bound on `Σ_{n>order} n^p |b_n| z^n`, given `|b_n z^n| ≤
/// (scale/a) n^{n-2}/n! (z a)^n`. Infinite when `z a e ≥ 1`.
fn tree_tail(scale: f64, a: f64, z: f64, order: usize, power: i32) -> (f64, bool) {
    let t = z * a;
    if t * std::f64::consts::E >= 1.0 {
        return (f64::INFINITY, false);
    }
    if t == 0.0 {
        return (0.0, true);
    }
    let mut sum = 0.0;
    let mut n = order + 1;
    loop {
        let nf = n as f64;
        // log of n^{n-2} t^n / n!
        let log_term = (nf - 2.0) * nf.ln() + nf * t.ln() - ln_factorial(n);
        let term = (log_term).exp() * nf.powi(power);
        sum += term;
        if term < 1e-17 * sum || n > 10_000 {
            break;
        }
        n += 1;
    }
    (scale / a * sum, true)
}

fn ln_factorial(n: usize) -> f64 {
    (1..=n).map(|i| (i as f64).ln()).sum()
}

/// Mayer expansion of `log Z` to first or second order.
///
/// The second-order coefficient uses the closed-form clipped overlap
/// integral of an open region or the excluded volume of a periodic one.
/// The remainder is the tree-graph bound on all higher orders.
pub fn mayer_log_z(
    params: &ModelParams,
    region: &SimBox,
    orientations: &[Orientation],
    z: f64,
    order: usize,
) -> Result<SeriesEstimate> {
    mayer_series(params, region, orientations, z, order, false)
}

/// Mayer expansion of the total density `(z/|R|) ∂_z log Z`.
pub fn mayer_density(
    params: &ModelParams,
    region: &SimBox,
    orientations: &[Orientation],
    z: f64,
    order: usize,
) -> Result<SeriesEstimate> {
    mayer_series(params, region, orientations, z, order, true)
}

fn mayer_series(
    params: &ModelParams,
    region: &SimBox,
    orientations: &[Orientation],
    z: f64,
    order: usize,
    density: bool,
) -> Result<SeriesEstimate> {
    check_orientations(orientations)?;
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidParameter("Mayer order must be 1 or 2".into()));
    }
    if !(z >= 0.0) {
        return Err(Error::InvalidParameter("activity must be nonnegative".into()));
    }
    let vol = region.volume();
    let m = orientations.len() as f64;
    let b1 = m * vol;
    let b2 = if order >= 2 {
        -0.5 * pair_overlap_integral(params, region, orientations)
    } else {
        0.0
    };
    let a = tree_weight(params, orientations);
    let (value, (tail, rigorous)) = if density {
        (
            (z * b1 + 2.0 * z * z * b2) / vol,
            tree_tail(m, a, z, order, 1),
        )
    } else {
        (z * b1 + z * z * b2, tree_tail(m * vol, a, z, order, 0))
    };
    Ok(SeriesEstimate {
        value,
        order,
        remainder: tail,
        rigorous,
        stat_error: 0.0,
        diagnostics: Some(MayerDiagnostics::new(params, z)),
    })
}

/// Result of [`connected_plate_bound_check`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConnectedBound {
    pub l: usize,
    /// Contributions of `l` and `l + 1` plates.
    pub terms: Vec<Estimate>,
    pub value: Estimate,
    /// `z |S| (z k²)^{l-1}`.
    pub scale: f64,
    /// Smallest `C` with `value ≤ C^l · scale`.
    pub empirical_c: f64,
}

/// Contribution of connected type-`q` clusters of `n` plates with the first
/// plate centered in a region of volume `volume`:
/// `(zⁿ/n!) Σ_o ∫ |φ^T(p_1..p_n)| 1(p_1 ∈ S)`.
pub fn connected_cluster_term(
    params: &ModelParams,
    q: PlateType,
    z: f64,
    volume: f64,
    n: usize,
    samples: u64,
    seed: u64,
) -> Result<Estimate> {
    let os = q.orientations();
    let w = z.powi(n as i32) / factorial(n);
    match n {
        0 => Err(Error::InvalidParameter("cluster size must be positive".into())),
        1 => Ok(Estimate::new(w * 2.0 * volume, 0.0)),
        2 => {
            let v: f64 = os
                .iter()
                .flat_map(|&a| os.iter().map(move |&b| (a, b)))
                .map(|(a, b)| excluded_volume(a, b, params))
                .sum();
            Ok(Estimate::new(w * volume * v, 0.0))
        }
        _ if n > MAX_URSELL_VERTICES => Err(Error::TooLarge(format!("{n} plates"))),
        _ => {
            // Every plate of a connected cluster lies within (n-1)k of the
            // first along each axis.
            let half = (n - 1) as f64 * params.max_reach();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut s1, mut s2) = (0.0, 0.0);
            for _ in 0..samples {
                let mut ps = vec![(os[rng.gen_range(0..2)].index(), [0.0; 3])];
                for _ in 1..n {
                    let c = [0; 3].map(|_| (rng.gen::<f64>() * 2.0 - 1.0) * half);
                    ps.push((os[rng.gen_range(0..2)].index(), c));
                }
                let mut adj = vec![0u32; n];
                for i in 0..n {
                    for j in (i + 1)..n {
                        let d = [0, 1, 2].map(|a| ps[j].1[a] - ps[i].1[a]);
                        if overlap_displacement(d, params.half_sums_by_index(ps[i].0, ps[j].0)) {
                            adj[i] |= 1 << j;
                            adj[j] |= 1 << i;
                        }
                    }
                }
                let g = OverlapGraph { adj };
                let v = if g.is_connected() { g.ursell().abs() as f64 } else { 0.0 };
                s1 += v;
                s2 += v * v;
            }
            let ns = samples as f64;
            let mean = s1 / ns;
            let se = ((s2 / ns - mean * mean).max(0.0) / ns).sqrt();
            let scale = w * volume * 2f64.powi(n as i32) * (2.0 * half).powi(3 * (n as i32 - 1));
            Ok(Estimate::new(mean * scale, se * scale))
        }
    }
}

/// Measures the connected-cluster integral of type-`q` plates truncated to
/// `l` and `l + 1` plates and compares it with `z |S| (z k²)^{l-1}`.
pub fn connected_plate_bound_check(
    params: &ModelParams,
    q: PlateType,
    volume: f64,
    z: f64,
    l: usize,
    samples: u64,
    seed: u64,
) -> Result<ConnectedBound> {
    if !(1..=4).contains(&l) {
        return Err(Error::InvalidParameter("l must be between 1 and 4".into()));
    }
    let terms = vec![
        connected_cluster_term(params, q, z, volume, l, samples, seed)?,
        connected_cluster_term(params, q, z, volume, l + 1, samples, seed.wrapping_add(1))?,
    ];
    let value = Estimate::new(
        terms.iter().map(|t| t.mean).sum(),
        terms.iter().map(|t| t.error).fold(0.0, f64::hypot),
    );
    let k = params.k();
    let scale = z * volume * (z * k * k).powi(l as i32 - 1);
    let empirical_c = if scale > 0.0 {
        (value.mean / scale).powf(1.0 / l as f64)
    } else {
        0.0
    };
    Ok(ConnectedBound {
        l,
        terms,
        value,
        scale,
        empirical_c,
    })
}
