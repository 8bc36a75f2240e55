use platelat::geometry::{axis_extents, excluded_volume, overlap};
use platelat::{BoundaryMode, ModelParams, Orientation, Plate, PlateType, ScalingClass, SimBox};
use proptest::prelude::*;

fn orientation() -> impl Strategy<Value = Orientation> {
    (0usize..6).prop_map(|i| Orientation::ALL[i])
}

fn open(side: f64) -> SimBox {
    SimBox::cubic(side, BoundaryMode::Open).unwrap()
}

#[test]
fn extents_are_permutations_of_the_plate_sides() {
    let p = ModelParams::new(32.0, 0.8).unwrap();
    for o in Orientation::ALL {
        let mut e = axis_extents(o, &p);
        assert_eq!(e[o.plate_type().index()], 1.0);
        e.sort_by(f64::total_cmp);
        assert!((e[1] - 16.0).abs() < 1e-9 && e[2] == 32.0, "{o:?}: {e:?}");
    }
}

#[test]
fn both_orientations_of_a_type_share_the_thin_axis() {
    for t in PlateType::ALL {
        for o in t.orientations() {
            assert_eq!(o.plate_type(), t);
        }
    }
}

#[test]
fn touching_faces_do_not_overlap() {
    let p = ModelParams::new(8.0, 0.8).unwrap();
    let b = open(100.0);
    let a = Plate::new([50.0, 50.0, 50.0], Orientation::O3a);
    // Thin axis of 3a is z; stacked plates one unit apart only touch.
    assert!(!overlap(&a, &Plate::new([50.0, 50.0, 51.0], Orientation::O3a), &p, &b));
    assert!(overlap(&a, &Plate::new([50.0, 50.0, 50.999], Orientation::O3a), &p, &b));
}

#[test]
fn periodic_overlap_uses_the_nearest_image() {
    let p = ModelParams::new(8.0, 0.8).unwrap();
    let b = SimBox::cubic(40.0, BoundaryMode::Periodic).unwrap();
    let a = Plate::new([0.5, 20.0, 20.0], Orientation::O1a);
    let c = Plate::new([39.9, 20.0, 20.0], Orientation::O1a);
    assert!(overlap(&a, &c, &p, &b));
    assert!(!overlap(&a, &c, &p, &open(40.0)));
}

#[test]
fn class_exponents_increase() {
    let classes = [
        ScalingClass::SameOrientation,
        ScalingClass::SameType,
        ScalingClass::ParallelMajor,
        ScalingClass::Crossed,
    ];
    for w in classes.windows(2) {
        assert!(w[0].exponent(0.8) < w[1].exponent(0.8));
    }
}

proptest! {
    #[test]
    fn overlap_is_symmetric_and_matches_extents(
        a in orientation(),
        b in orientation(),
        d in prop::array::uniform3(-40.0f64..40.0),
        k in 4.0f64..64.0,
    ) {
        let p = ModelParams::new(k, 0.8).unwrap();
        let bx = open(1000.0);
        let pa = Plate::new([500.0; 3], a);
        let pb = Plate::new([500.0 + d[0], 500.0 + d[1], 500.0 + d[2]], b);
        let (ea, eb) = (p.extents(a), p.extents(b));
        let expected = (0..3).all(|i| d[i].abs() < (ea[i] + eb[i]) / 2.0);
        prop_assert_eq!(overlap(&pa, &pb, &p, &bx), expected);
        prop_assert_eq!(overlap(&pb, &pa, &p, &bx), expected);
    }

    #[test]
    fn excluded_volume_is_symmetric(a in orientation(), b in orientation(), k in 4.0f64..64.0) {
        let p = ModelParams::new(k, 0.8).unwrap();
        prop_assert_eq!(excluded_volume(a, b, &p), excluded_volume(b, a, &p));
        prop_assert!(excluded_volume(a, b, &p) >= excluded_volume(a, a, &p) - 1e-9);
    }
}
