//! Plate shapes, orientation conventions and the hard-core overlap predicate.
//!
//! A plate is an axis-aligned `1 × k^α × k` box. Its *type* is the axis that
//! carries the thickness-1 side; the *variant* (`a` or `b`) decides which of
//! the two remaining axes carries the major side `k`.
//!
//! Variant convention (fixed once, used everywhere): for a plate of type `t`
//! (axes numbered 1, 2, 3), variant `a` puts the major side on axis
//! `t mod 3 + 1` and the intermediate side on the remaining axis; variant `b`
//! swaps them. So `3a` has extents `(k, k^α, 1)` and `2b` has its major side
//! along axis 1, parallel to the major side of `3a`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::configuration::SimBox;
use crate::error::{Error, Result};

/// Exclusive lower bound on `α` for the regime where nematic order is proven.
pub const ALPHA_REGIME_MIN: f64 = 0.75;

/// The three plate types, named after the axis of the thickness-1 side.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PlateType {
    One,
    Two,
    Three,
}

impl PlateType {
    pub const ALL: [PlateType; 3] = [PlateType::One, PlateType::Two, PlateType::Three];

    pub fn from_number(q: u8) -> Option<Self> {
        match q {
            1 => Some(PlateType::One),
            2 => Some(PlateType::Two),
            3 => Some(PlateType::Three),
            _ => None,
        }
    }

    /// 1, 2 or 3.
    pub fn number(self) -> u8 {
        self.index() as u8 + 1
    }

    /// Zero-based axis index of the thickness-1 side.
    pub fn index(self) -> usize {
        match self {
            PlateType::One => 0,
            PlateType::Two => 1,
            PlateType::Three => 2,
        }
    }

    pub fn orientations(self) -> [Orientation; 2] {
        let i = 2 * self.index();
        [Orientation::ALL[i], Orientation::ALL[i + 1]]
    }
}

impl fmt::Display for PlateType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.number())
    }
}

/// One of the six allowed plate orientations, in canonical order
/// `1a, 1b, 2a, 2b, 3a, 3b`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    O1a,
    O1b,
    O2a,
    O2b,
    O3a,
    O3b,
}

impl Orientation {
    pub const ALL: [Orientation; 6] = [
        Orientation::O1a,
        Orientation::O1b,
        Orientation::O2a,
        Orientation::O2b,
        Orientation::O3a,
        Orientation::O3b,
    ];

    /// Position in the canonical order.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn plate_type(self) -> PlateType {
        PlateType::ALL[self.index() / 2]
    }

    /// `false` for variant `a`, `true` for variant `b`.
    pub fn is_variant_b(self) -> bool {
        self.index() % 2 == 1
    }

    /// Zero-based axis carrying the major side `k`.
    pub fn major_axis(self) -> usize {
        let t = self.plate_type().index();
        if self.is_variant_b() {
            (t + 2) % 3
        } else {
            (t + 1) % 3
        }
    }

    /// Zero-based axis carrying the intermediate side `k^α`.
    pub fn intermediate_axis(self) -> usize {
        let t = self.plate_type().index();
        if self.is_variant_b() {
            (t + 1) % 3
        } else {
            (t + 2) % 3
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            Orientation::O1a => "1a",
            Orientation::O1b => "1b",
            Orientation::O2a => "2a",
            Orientation::O2b => "2b",
            Orientation::O3a => "3a",
            Orientation::O3b => "3b",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

impl FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Orientation::ALL
            .iter()
            .copied()
            .find(|o| o.token() == s)
            .ok_or_else(|| Error::Parse(format!("unknown orientation token {s:?}")))
    }
}

impl Serialize for Orientation {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.token())
    }
}

impl<'de> Deserialize<'de> for Orientation {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Side length `k` and anisotropy exponent `α`, with derived scales and
/// precomputed per-pair overlap thresholds.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    k: f64,
    alpha: f64,
    intermediate: f64,
    extents: [[f64; 3]; 6],
    half_sums: [[[f64; 3]; 6]; 6],
}

impl ModelParams {
    pub fn new(k: f64, alpha: f64) -> Result<Self> {
        if !(k.is_finite() && k > 1.0) {
            return Err(Error::InvalidParameter(format!("k must be > 1, got {k}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha must lie in (0, 1], got {alpha}"
            )));
        }
        let intermediate = k.powf(alpha);
        let mut extents = [[0.0; 3]; 6];
        for o in Orientation::ALL {
            let e = &mut extents[o.index()];
            e[o.plate_type().index()] = 1.0;
            e[o.major_axis()] = k;
            e[o.intermediate_axis()] = intermediate;
        }
        let mut half_sums = [[[0.0; 3]; 6]; 6];
        for i in 0..6 {
            for j in 0..6 {
                for ax in 0..3 {
                    half_sums[i][j][ax] = 0.5 * (extents[i][ax] + extents[j][ax]);
                }
            }
        }
        Ok(Self {
            k,
            alpha,
            intermediate,
            extents,
            half_sums,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `k^α`.
    pub fn intermediate_side(&self) -> f64 {
        self.intermediate
    }

    /// Block side `ℓ = k/2`.
    pub fn block_side(&self) -> f64 {
        0.5 * self.k
    }

    /// Pebble side `k^α / 2`.
    pub fn pebble_side(&self) -> f64 {
        0.5 * self.intermediate
    }

    /// Smoothing-cube side `8ℓ`.
    pub fn smoothing_side(&self) -> f64 {
        8.0 * self.block_side()
    }

    /// Plate volume `k^{1+α}`.
    pub fn plate_volume(&self) -> f64 {
        self.k * self.intermediate
    }

    /// Whether `α` lies in `(3/4, 1]`.
    pub fn in_theorem_regime(&self) -> bool {
        self.alpha > ALPHA_REGIME_MIN
    }

    /// Largest per-axis overlap reach over all orientation pairs (equals `k`).
    pub fn max_reach(&self) -> f64 {
        self.k
    }

    #[inline]
    pub fn extents(&self, o: Orientation) -> [f64; 3] {
        self.extents[o.index()]
    }

    /// Per-axis thresholds `(a_i + b_i)/2` for the pair `(o, o2)`.
    #[inline]
    pub fn half_sums(&self, o: Orientation, o2: Orientation) -> [f64; 3] {
        self.half_sums[o.index()][o2.index()]
    }

    #[inline]
    pub(crate) fn half_sums_by_index(&self, i: usize, j: usize) -> &[f64; 3] {
        &self.half_sums[i][j]
    }
}

/// A plate: center position plus orientation.
#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Plate {
    pub center: [f64; 3],
    pub orientation: Orientation,
}

impl Plate {
    pub fn new(center: [f64; 3], orientation: Orientation) -> Self {
        Self {
            center,
            orientation,
        }
    }

    pub fn plate_type(&self) -> PlateType {
        self.orientation.plate_type()
    }

    /// Geometric support as `(lower corner, upper corner)`.
    pub fn support(&self, params: &ModelParams) -> ([f64; 3], [f64; 3]) {
        let e = params.extents(self.orientation);
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for ax in 0..3 {
            lo[ax] = self.center[ax] - 0.5 * e[ax];
            hi[ax] = self.center[ax] + 0.5 * e[ax];
        }
        (lo, hi)
    }
}

/// Full side lengths of a plate of orientation `o` along axes 1, 2, 3.
pub fn axis_extents(o: Orientation, params: &ModelParams) -> [f64; 3] {
    params.extents(o)
}

/// Strict-inequality overlap test on a given center displacement.
#[inline]
pub(crate) fn overlap_displacement(d: [f64; 3], half: &[f64; 3]) -> bool {
    d[0].abs() < half[0] && d[1].abs() < half[1] && d[2].abs() < half[2]
}

/// Hard-core overlap predicate. Touching supports do not overlap.
pub fn overlap(p: &Plate, q: &Plate, params: &ModelParams, sim_box: &SimBox) -> bool {
    let d = sim_box.displacement(&p.center, &q.center);
    overlap_displacement(d, &params.half_sums(p.orientation, q.orientation))
}

/// Volume of the set of centers `y` such that `(y, o2)` overlaps `(0, o)`.
pub fn excluded_volume(o: Orientation, o2: Orientation, params: &ModelParams) -> f64 {
    params.half_sums(o, o2).iter().map(|h| 2.0 * h).product()
}

/// Leading-order scaling of an excluded volume for large `k`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScalingClass {
    /// Same orientation: `k^{1+α}`.
    SameOrientation,
    /// Same type, other variant: `k^2`.
    SameType,
    /// Different type, parallel major axes: `k^{1+2α}`.
    ParallelMajor,
    /// Everything else: `k^{2+α}`.
    Crossed,
}

impl ScalingClass {
    pub fn of(o: Orientation, o2: Orientation) -> Self {
        if o == o2 {
            ScalingClass::SameOrientation
        } else if o.plate_type() == o2.plate_type() {
            ScalingClass::SameType
        } else if o.major_axis() == o2.major_axis() {
            ScalingClass::ParallelMajor
        } else {
            ScalingClass::Crossed
        }
    }

    /// Exponent of `k` in the scaling law.
    pub fn exponent(self, alpha: f64) -> f64 {
        match self {
            ScalingClass::SameOrientation => 1.0 + alpha,
            ScalingClass::SameType => 2.0,
            ScalingClass::ParallelMajor => 1.0 + 2.0 * alpha,
            ScalingClass::Crossed => 2.0 + alpha,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ScalingClass::SameOrientation => "k^(1+alpha)",
            ScalingClass::SameType => "k^2",
            ScalingClass::ParallelMajor => "k^(1+2alpha)",
            ScalingClass::Crossed => "k^(2+alpha)",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configuration::BoundaryMode;
    use approx::assert_relative_eq;

    fn p32() -> ModelParams {
        ModelParams::new(32.0, 0.8).unwrap()
    }

    fn open_box() -> SimBox {
        SimBox::cubic(1000.0, BoundaryMode::Open).unwrap()
    }

    #[test]
    fn extents_follow_convention() {
        let p = p32();
        let e = axis_extents(Orientation::O3a, &p);
        assert_relative_eq!(e[0], 32.0);
        assert_relative_eq!(e[1], 16.0, epsilon = 1e-12);
        assert_relative_eq!(e[2], 1.0);
        let e = axis_extents(Orientation::O3b, &p);
        assert_relative_eq!(e[0], 16.0, epsilon = 1e-12);
        assert_relative_eq!(e[1], 32.0);
        let p2 = ModelParams::new(2.0, 1.0).unwrap();
        assert_eq!(axis_extents(Orientation::O1a, &p2), [1.0, 2.0, 2.0]);
    }

    #[test]
    fn extents_are_a_permutation() {
        let p = p32();
        for o in Orientation::ALL {
            let mut e = axis_extents(o, &p);
            assert_eq!(e[o.plate_type().index()], 1.0);
            e.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_relative_eq!(e[0], 1.0);
            assert_relative_eq!(e[1], 16.0, epsilon = 1e-12);
            assert_relative_eq!(e[2], 32.0);
        }
    }

    #[test]
    fn rejects_bad_params() {
        assert!(ModelParams::new(1.0, 0.8).is_err());
        assert!(ModelParams::new(8.0, 0.0).is_err());
        assert!(ModelParams::new(8.0, 1.2).is_err());
        assert!(!ModelParams::new(8.0, 0.6).unwrap().in_theorem_regime());
        assert!(ModelParams::new(8.0, 0.8).unwrap().in_theorem_regime());
    }

    #[test]
    fn overlap_examples() {
        let p = p32();
        let b = open_box();
        let origin = [500.0, 500.0, 500.0];
        for o in Orientation::ALL {
            for o2 in Orientation::ALL {
                assert!(overlap(&Plate::new(origin, o), &Plate::new(origin, o2), &p, &b));
            }
        }
        let a = Plate::new(origin, Orientation::O3a);
        let touching = Plate::new([500.0, 500.0, 501.0], Orientation::O3a);
        assert!(!overlap(&a, &touching, &p, &b));
        let crossed = Plate::new([520.0, 520.0, 500.5], Orientation::O3b);
        assert!(overlap(&a, &crossed, &p, &b));
        assert_eq!(p.half_sums(Orientation::O3a, Orientation::O3b)[0], 24.0);
    }

    #[test]
    fn excluded_volume_examples() {
        let p = p32();
        assert_relative_eq!(
            excluded_volume(Orientation::O3a, Orientation::O3a, &p),
            4096.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            excluded_volume(Orientation::O3a, Orientation::O3b, &p),
            4608.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            excluded_volume(Orientation::O3a, Orientation::O2a, &p),
            26928.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            excluded_volume(Orientation::O3a, Orientation::O2b, &p),
            18496.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            excluded_volume(Orientation::O3a, Orientation::O1a, &p),
            26928.0,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            excluded_volume(Orientation::O3a, Orientation::O1b, &p),
            34848.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn scaling_classes_match_hierarchy() {
        use Orientation::*;
        assert_eq!(ScalingClass::of(O3a, O3a), ScalingClass::SameOrientation);
        assert_eq!(ScalingClass::of(O3a, O3b), ScalingClass::SameType);
        assert_eq!(ScalingClass::of(O3a, O2b), ScalingClass::ParallelMajor);
        assert_eq!(ScalingClass::of(O3a, O2a), ScalingClass::Crossed);
        assert_eq!(ScalingClass::of(O3a, O1a), ScalingClass::Crossed);
        assert_eq!(ScalingClass::of(O3a, O1b), ScalingClass::Crossed);
        for o in Orientation::ALL {
            for o2 in Orientation::ALL {
                assert_eq!(ScalingClass::of(o, o2), ScalingClass::of(o2, o));
            }
        }
    }

    #[test]
    fn token_round_trip() {
        for o in Orientation::ALL {
            assert_eq!(o.token().parse::<Orientation>().unwrap(), o);
            assert_eq!(Orientation::from_index(o.index()), Some(o));
        }
        assert!("4a".parse::<Orientation>().is_err());
    }

    #[test]
    fn different_types_in_one_pebble_overlap() {
        use rand::{Rng, SeedableRng};
        let p = p32();
        let b = open_box();
        let side = p.pebble_side();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20_000 {
            let o = Orientation::ALL[rng.gen_range(0..6)];
            let o2 = Orientation::ALL[rng.gen_range(0..6)];
            if o.plate_type() == o2.plate_type() {
                continue;
            }
            let c1 = [0.0, 1.0, 2.0].map(|_| 100.0 + rng.gen::<f64>() * side);
            let c2 = [0.0, 1.0, 2.0].map(|_| 100.0 + rng.gen::<f64>() * side);
            assert!(overlap(&Plate::new(c1, o), &Plate::new(c2, o2), &p, &b));
        }
    }

    proptest::proptest! {
        #[test]
        fn overlap_is_symmetric(
            c1 in proptest::array::uniform3(0.0f64..100.0),
            c2 in proptest::array::uniform3(0.0f64..100.0),
            i in 0usize..6, j in 0usize..6,
            periodic in proptest::bool::ANY,
        ) {
            let p = ModelParams::new(12.0, 0.85).unwrap();
            let mode = if periodic { BoundaryMode::Periodic } else { BoundaryMode::Open };
            let b = SimBox::cubic(100.0, mode).unwrap();
            let a = Plate::new(c1, Orientation::ALL[i]);
            let q = Plate::new(c2, Orientation::ALL[j]);
            proptest::prop_assert_eq!(overlap(&a, &q, &p, &b), overlap(&q, &a, &p, &b));
        }
    }
}
