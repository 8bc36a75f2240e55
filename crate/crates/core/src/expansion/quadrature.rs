//! Exact few-body configuration integrals for plates confined to boxes.
//!
//! Two plates overlap iff `|Δx_i| < h_i` on every axis, so after expanding
//! `∏(1 - O_ij)` over edge subsets every term is a product over axes of a
//! one-dimensional integral of interval constraints. Those integrals are
//! piecewise polynomial and are evaluated exactly for up to three plates.

use crate::geometry::{ModelParams, Orientation};

/// Axis-aligned box `[lo, hi)` of allowed plate centers.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct CenterBox {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl CenterBox {
    pub fn new(lo: [f64; 3], hi: [f64; 3]) -> Self {
        Self { lo, hi }
    }

    pub fn cube(origin: [f64; 3], side: f64) -> Self {
        Self::new(origin, origin.map(|x| x + side))
    }

    pub fn volume(&self) -> f64 {
        (0..3).map(|i| (self.hi[i] - self.lo[i]).max(0.0)).product()
    }
}

/// `∫_{a1}^{b1} ∫_{a2}^{b2} 1[y - x ≥ h] dy dx`.
fn upper_excess(a1: f64, b1: f64, a2: f64, b2: f64, h: f64) -> f64 {
    // Integrand in x: max(0, b2 - max(a2, x + h)), linear between a2 - h
    // and b2 - h.
    let g = |x: f64| (b2 - a2.max(x + h)).max(0.0);
    let mut pts = vec![a1, b1];
    for t in [a2 - h, b2 - h] {
        if t > a1 && t < b1 {
            pts.push(t);
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.windows(2)
        .map(|w| 0.5 * (w[1] - w[0]) * (g(w[0]) + g(w[1])))
        .sum()
}

/// `∫_{I1} ∫_{I2} 1[|x - y| < h]` (or the plain area without a constraint).
fn pair_area(i1: (f64, f64), i2: (f64, f64), h: Option<f64>) -> f64 {
    let l1 = (i1.1 - i1.0).max(0.0);
    let l2 = (i2.1 - i2.0).max(0.0);
    if l1 == 0.0 || l2 == 0.0 {
        return 0.0;
    }
    match h {
        None => l1 * l2,
        Some(h) => {
            let up = upper_excess(i1.0, i1.1, i2.0, i2.1, h);
            let down = upper_excess(i2.0, i2.1, i1.0, i1.1, h);
            (l1 * l2 - up - down).max(0.0)
        }
    }
}

fn edge(edges: &[(usize, usize, f64)], a: usize, b: usize) -> Option<f64> {
    edges
        .iter()
        .find(|&&(i, j, _)| (i == a && j == b) || (i == b && j == a))
        .map(|e| e.2)
}

/// Exact `∫ ∏_i 1[x_i ∈ I_i] ∏_{(a,b,h)} 1[|x_a - x_b| < h] dx` for at most
/// three variables.
pub fn axis_integral(intervals: &[(f64, f64)], edges: &[(usize, usize, f64)]) -> f64 {
    match intervals.len() {
        0 => 1.0,
        1 => (intervals[0].1 - intervals[0].0).max(0.0),
        2 => pair_area(intervals[0], intervals[1], edge(edges, 0, 1)),
        3 => triple_integral(intervals, edges),
        n => panic!("axis_integral supports at most 3 variables, got {n}"),
    }
}

fn triple_integral(iv: &[(f64, f64)], edges: &[(usize, usize, f64)]) -> f64 {
    let (h01, h02, h12) = (edge(edges, 0, 1), edge(edges, 0, 2), edge(edges, 1, 2));
    let (a0, b0) = iv[0];
    if b0 <= a0 {
        return 0.0;
    }
    let clip = |x0: f64, i: (f64, f64), h: Option<f64>| match h {
        Some(h) => (i.0.max(x0 - h), i.1.min(x0 + h)),
        None => i,
    };
    let f = |x0: f64| pair_area(clip(x0, iv[1], h01), clip(x0, iv[2], h02), h12);

    // The inner area is quadratic in x0 between events where a moving
    // interval end crosses a fixed one or a rectangle corner crosses the
    // band |x1 - x2| = h12.
    let mut pts = vec![a0, b0];
    let mut push = |t: f64| {
        if t > a0 && t < b0 {
            pts.push(t);
        }
    };
    // Ends of the x1 and x2 ranges as (offset, moves with x0).
    let mut forms = [Vec::new(), Vec::new()];
    for (slot, (i, h)) in [(iv[1], h01), (iv[2], h02)].into_iter().enumerate() {
        forms[slot].push((i.0, false));
        forms[slot].push((i.1, false));
        if let Some(h) = h {
            for end in [i.0, i.1] {
                push(end - h);
                push(end + h);
            }
            forms[slot].push((-h, true));
            forms[slot].push((h, true));
        }
    }
    if let Some(h) = h12 {
        for &(c1, m1) in &forms[0] {
            for &(c2, m2) in &forms[1] {
                for s in [h, -h] {
                    // x2 - x1 = s
                    match (m1, m2) {
                        (true, false) => push(c2 - s - c1),
                        (false, true) => push(c1 + s - c2),
                        _ => {}
                    }
                }
            }
        }
    }
    pts.sort_by(|a, b| a.total_cmp(b));
    pts.dedup();
    pts.windows(2)
        .map(|w| {
            let (x, y) = (w[0], w[1]);
            (y - x) / 6.0 * (f(x) + 4.0 * f(0.5 * (x + y)) + f(y))
        })
        .sum()
}

/// `∫ ∏_{i<j} (1 - O(p_i, p_j))` over centers `p_i ∈ boxes[i]` with fixed
/// orientations, in open space (`n ≤ 3`).
pub fn configuration_integral(
    params: &ModelParams,
    boxes: &[CenterBox],
    orientations: &[Orientation],
) -> f64 {
    let n = boxes.len();
    assert_eq!(n, orientations.len());
    assert!(n <= 3, "configuration_integral supports at most 3 plates");
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
        .collect();
    let mut total = 0.0;
    for mask in 0u32..(1 << pairs.len()) {
        let mut term = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        for axis in 0..3 {
            let intervals: Vec<(f64, f64)> =
                boxes.iter().map(|b| (b.lo[axis], b.hi[axis])).collect();
            let edges: Vec<(usize, usize, f64)> = pairs
                .iter()
                .enumerate()
                .filter(|(e, _)| mask & (1 << e) != 0)
                .map(|(_, &(i, j))| {
                    (i, j, params.half_sums(orientations[i], orientations[j])[axis])
                })
                .collect();
            term *= axis_integral(&intervals, &edges);
            if term == 0.0 {
                break;
            }
        }
        total += term;
    }
    total
}

/// `∫∫_{[0,s]²} 1[|x - y| < h]`.
pub fn clipped_pair_overlap(h: f64, s: f64) -> f64 {
    if h < s {
        s * s - (s - h) * (s - h)
    } else {
        s * s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid_estimate(iv: &[(f64, f64)], edges: &[(usize, usize, f64)], m: usize) -> f64 {
        // Midpoint rule on an m³ grid.
        let step: Vec<f64> = iv.iter().map(|i| (i.1 - i.0) / m as f64).collect();
        let mut acc = 0.0;
        for a in 0..m {
            for b in 0..m {
                for c in 0..m {
                    let x = [
                        iv[0].0 + (a as f64 + 0.5) * step[0],
                        iv[1].0 + (b as f64 + 0.5) * step[1],
                        iv[2].0 + (c as f64 + 0.5) * step[2],
                    ];
                    if edges.iter().all(|&(i, j, h)| (x[i] - x[j]).abs() < h) {
                        acc += 1.0;
                    }
                }
            }
        }
        acc * step.iter().product::<f64>()
    }

    #[test]
    fn pair_area_examples() {
        assert_relative_eq!(pair_area((0.0, 1.0), (0.0, 1.0), Some(0.5)), 0.75);
        assert_relative_eq!(pair_area((0.0, 1.0), (5.0, 6.0), Some(0.5)), 0.0);
        assert_relative_eq!(pair_area((0.0, 2.0), (0.0, 3.0), None), 6.0);
        assert_relative_eq!(pair_area((0.0, 1.0), (0.0, 1.0), Some(3.0)), 1.0);
        assert_relative_eq!(clipped_pair_overlap(0.5, 1.0), 0.75);
    }

    #[test]
    fn triple_integral_matches_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..40 {
            let mut iv = Vec::new();
            for _ in 0..3 {
                let a = rng.gen::<f64>() * 3.0;
                iv.push((a, a + 0.5 + rng.gen::<f64>() * 3.0));
            }
            let mut edges = Vec::new();
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                if rng.gen_bool(0.7) {
                    edges.push((i, j, 0.2 + rng.gen::<f64>() * 2.5));
                }
            }
            let exact = axis_integral(&iv, &edges);
            let grid = grid_estimate(&iv, &edges, 160);
            let scale: f64 = iv.iter().map(|i| i.1 - i.0).product();
            assert!(
                (exact - grid).abs() < 0.01 * scale,
                "{exact} vs {grid} for {iv:?} {edges:?}"
            );
        }
    }

    #[test]
    fn triple_integral_closed_form() {
        // All three in [0,1], chain |x0-x1|<h, |x1-x2|<h with h ≥ 1 → 1.
        assert_relative_eq!(
            axis_integral(&[(0.0, 1.0); 3], &[(0, 1, 1.0), (1, 2, 1.0)]),
            1.0,
            epsilon = 1e-12
        );
        // Full triangle constraint with tiny h: volume ~ 3h² (exact for small h).
        let h = 0.01;
        let v = axis_integral(&[(0.0, 1.0); 3], &[(0, 1, h), (0, 2, h), (1, 2, h)]);
        // Exact: ∫ over the hexagonal cross-section 3h² times length, minus end effects.
        assert!((v / (3.0 * h * h) - 1.0).abs() < 0.02, "{v}");
    }

    #[test]
    fn two_plate_integral_uses_excluded_volume() {
        let params = ModelParams::new(8.0, 0.8).unwrap();
        let big = CenterBox::cube([0.0; 3], 100.0);
        let o = Orientation::O3a;
        let v = configuration_integral(&params, &[big, big], &[o, o]);
        let h = params.half_sums(o, o);
        let expected =
            big.volume().powi(2) - (0..3).map(|i| clipped_pair_overlap(h[i], 100.0)).product::<f64>();
        assert_relative_eq!(v, expected, max_relative = 1e-12);
    }

    #[test]
    fn three_plate_integral_matches_monte_carlo() {
        let params = ModelParams::new(4.0, 0.8).unwrap();
        let b = CenterBox::cube([0.0; 3], 4.0);
        let os = [Orientation::O1a, Orientation::O2b, Orientation::O3a];
        let exact = configuration_integral(&params, &[b, b, b], &os);
        let sb = crate::configuration::SimBox::cubic(100.0, crate::configuration::BoundaryMode::Open)
            .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 400_000;
        let mut hits = 0u64;
        for _ in 0..n {
            let ps: Vec<crate::geometry::Plate> = os
                .iter()
                .map(|&o| {
                    crate::geometry::Plate::new(
                        [rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0, rng.gen::<f64>() * 4.0],
                        o,
                    )
                })
                .collect();
            let ok = (0..3).all(|i| {
                ((i + 1)..3).all(|j| !crate::geometry::overlap(&ps[i], &ps[j], &params, &sb))
            });
            hits += ok as u64;
        }
        let p = hits as f64 / n as f64;
        let v3 = b.volume().powi(3);
        let se = (p * (1.0 - p) / n as f64).sqrt() * v3;
        assert!((exact - p * v3).abs() < 4.0 * se, "{exact} vs {} ± {se}", p * v3);
    }
}
