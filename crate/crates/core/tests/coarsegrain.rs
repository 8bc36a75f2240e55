use platelat::coarsegrain::{
    assign_spins, bad_region, classify_sampling_cubes, contour_invariant_violations, extract_contours,
    BlockLattice, SpinField, MIXED,
};
use platelat::{BoundaryMode, ModelParams, Orientation, Plate, SimBox};
use proptest::prelude::*;

// k = 8 has blocks of side 4; 22 blocks per axis leave a 4³ core of blocks
// deeper than 8.
fn lattice(n: usize) -> (ModelParams, BlockLattice) {
    let p = ModelParams::new(8.0, 0.8).unwrap();
    let b = SimBox::cubic(4.0 * n as f64, BoundaryMode::Open).unwrap();
    let l = BlockLattice::new(&p, &b).unwrap();
    (p, l)
}

#[test]
fn uniform_field_has_no_contours() {
    let (_, l) = lattice(14);
    let sigma = SpinField::uniform(14, 3);
    assert!(classify_sampling_cubes(&sigma).bad_anchors().is_empty());
    assert!(bad_region(&sigma, &l).unwrap().is_empty());
    assert!(extract_contours(&sigma, &[], &l).unwrap().is_empty());
}

#[test]
fn spins_follow_plate_types() {
    let (_, l) = lattice(14);
    let plates = [
        Plate::new([1.0, 1.0, 1.0], Orientation::O3a),
        Plate::new([5.0, 1.0, 1.0], Orientation::O1b),
        Plate::new([5.5, 3.5, 1.0], Orientation::O2a),
    ];
    let sigma = assign_spins(&plates, &l);
    assert_eq!(sigma.get(l.index([0, 0, 0])), 3);
    assert_eq!(sigma.get(l.index([1, 0, 0])), MIXED);
    assert_eq!(sigma.get(l.index([2, 0, 0])), 0);
    let census = sigma.census();
    assert_eq!(census.iter().sum::<u64>(), l.len() as u64);
    assert_eq!(census[MIXED as usize], 1);
}

#[test]
fn an_island_of_another_phase_is_one_contour() {
    let n = 22;
    let (_, l) = lattice(n);
    let mut sigma = SpinField::uniform(n, 3);
    for x in 10..12 {
        for y in 10..12 {
            for z in 10..12 {
                sigma.set(l.index([x, y, z]), 1);
            }
        }
    }
    assert!(contour_invariant_violations(&sigma, &[], &l).unwrap().is_empty());
    let cs = extract_contours(&sigma, &[], &l).unwrap();
    assert_eq!(cs.len(), 1);
    let c = &cs[0];
    assert_eq!(c.m_ext, 3);
    for x in 10..12 {
        assert!(c.contains_block(l.index([x, 10, 10])) || c.interiors.iter().flatten().any(|&v| v == l.index([x, 10, 10])));
    }
    assert!(c.in_exterior(l.index([0, 0, 0])));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn random_cores_satisfy_the_contour_invariants(
        core in prop::collection::vec(0u8..=4, 64),
        q in 1u8..=3,
    ) {
        let n = 22;
        let (_, l) = lattice(n);
        let mut sigma = SpinField::uniform(n, q);
        for (i, &s) in core.iter().enumerate() {
            let c = [9 + i % 4, 9 + (i / 4) % 4, 9 + i / 16];
            sigma.set(l.index(c), s);
        }
        let region = bad_region(&sigma, &l).unwrap();
        for v in 0..l.len() {
            prop_assert!(!region.b[v] || region.b_s[v]);
            prop_assert!(!region.b_s[v] || region.b_bar[v]);
        }
        let v = contour_invariant_violations(&sigma, &[], &l).unwrap();
        prop_assert!(v.is_empty(), "{:?}", v);
        let cs = extract_contours(&sigma, &[], &l).unwrap();
        for c in &cs {
            prop_assert_eq!(c.m_ext, q);
            prop_assert_eq!(c.m_int.len(), c.interiors.len());
            prop_assert!(c.in_exterior(0));
        }
        let uniform_core = core.iter().all(|&s| s == q);
        prop_assert_eq!(cs.is_empty(), uniform_core);
    }
}
