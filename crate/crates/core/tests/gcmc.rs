use platelat::gcmc::{self, pair_correlation, ObservableAccumulator, PairBins, RunParams, Sampler};
use platelat::coarsegrain::BlockLattice;
use platelat::{BoundaryMode, Error, ModelParams, Orientation, PlateType, SimBox};
use proptest::prelude::*;

fn k8() -> ModelParams {
    ModelParams::new(8.0, 0.8).unwrap()
}

#[test]
fn zero_sweeps_leave_everything_empty() {
    let b = SimBox::cubic(40.0, BoundaryMode::Periodic).unwrap();
    let run = RunParams { z: 1e-3, ..RunParams::default() };
    let (out, snaps) = gcmc::run(&k8(), &b, &run).unwrap();
    assert!(out.accumulator.is_empty());
    assert!(out.rows.is_empty() && snaps.is_empty());
    assert!(out.final_state.is_empty());
}

#[test]
fn same_seed_same_chain() {
    let b = SimBox::cubic(40.0, BoundaryMode::Open).unwrap();
    let run = RunParams { z: 2e-3, sweeps: 200, seed: 9, ..RunParams::default() };
    let (a, _) = gcmc::run(&k8(), &b, &run).unwrap();
    let (c, _) = gcmc::run(&k8(), &b, &run).unwrap();
    assert_eq!(a.rows, c.rows);
    assert_eq!(a.final_state.plates(), c.final_state.plates());
    let other = RunParams { replica: 1, ..run };
    let (d, _) = gcmc::run(&k8(), &b, &other).unwrap();
    assert_ne!(a.rows, d.rows);
}

/// A box narrower than the thinnest half-sum holds at most one plate, so
/// the stationary law is `P(1)/P(0) = 6 z V` with uniform orientations.
#[test]
fn single_occupancy_box_has_the_exact_law() {
    let b = SimBox::cubic(0.9, BoundaryMode::Open).unwrap();
    let x = 1.5;
    let z = x / (6.0 * b.volume());
    let run = RunParams { z, sweeps: 200_000, seed: 4, ..RunParams::default() };
    let (out, _) = gcmc::run(&k8(), &b, &run).unwrap();
    let mean_n = out.accumulator.total_density().scale(b.volume());
    let expected = x / (1.0 + x);
    assert!(
        (mean_n.mean - expected).abs() < 4.0 * mean_n.error,
        "<N> = {} ± {}, expected {expected}",
        mean_n.mean,
        mean_n.error
    );
    for o in Orientation::ALL {
        let d = out.accumulator.orientation_density(o).scale(b.volume());
        assert!((d.mean - expected / 6.0).abs() < 4.0 * d.error, "{o:?}: {d:?}");
    }
}

#[test]
fn independent_seeds_agree() {
    let b = SimBox::cubic(40.0, BoundaryMode::Periodic).unwrap();
    let mut est = Vec::new();
    for seed in [1, 2] {
        let run = RunParams { z: 5e-4, sweeps: 4000, seed, ..RunParams::default() };
        est.push(gcmc::run(&k8(), &b, &run).unwrap().0.accumulator.total_density());
    }
    assert!(est[0].agrees_with(&est[1], 4.0), "{est:?}");
}

#[test]
fn ideal_gas_has_no_pair_correlation() {
    let b = SimBox::cubic(24.0, BoundaryMode::Periodic).unwrap();
    let run = RunParams {
        z: 20.0 / b.volume(),
        sweeps: 3000,
        seed: 5,
        snapshot_stride: 2,
        hard_core: false,
        ..RunParams::default()
    };
    let (_, snaps) = gcmc::run(&k8(), &b, &run).unwrap();
    let pc = pair_correlation(&snaps, &b, PairBins { width: 2.0, count: 6 }).unwrap();
    let (mut within, mut total) = (0, 0);
    for o1 in Orientation::ALL {
        for o2 in Orientation::ALL {
            for (_, e) in pc.series(o1, o2) {
                total += 1;
                within += (e.mean.abs() <= 3.0 * e.error) as usize;
            }
        }
    }
    assert!(total > 150);
    assert!(within as f64 >= 0.95 * total as f64, "{within}/{total}");
}

/// Centers closer than one unit always overlap, so the first bin of width 1
/// holds no pairs and the truncated correlation is `-ρ_1 ρ_2` there.
#[test]
fn hard_core_empties_the_contact_bin() {
    let b = SimBox::cubic(40.0, BoundaryMode::Periodic).unwrap();
    let run = RunParams {
        z: 1e-3,
        sweeps: 3000,
        seed: 6,
        snapshot_stride: 2,
        ..RunParams::default()
    };
    let (out, snaps) = gcmc::run(&k8(), &b, &run).unwrap();
    let pc = pair_correlation(&snaps, &b, PairBins { width: 1.0, count: 4 }).unwrap();
    let d = out.accumulator.densities();
    for (i, o1) in Orientation::ALL.into_iter().enumerate() {
        for (j, o2) in Orientation::ALL.into_iter().enumerate() {
            let e = pc.get(o1, o2, 0).unwrap();
            let product = d[i].mean * d[j].mean;
            assert!(
                (e.mean + product).abs() <= 3.0 * e.error + 0.1 * product,
                "{o1:?} {o2:?}: {e:?} vs -{product:e}"
            );
        }
    }
}

#[test]
fn boundary_rule_holds_on_every_snapshot() {
    let p = k8();
    let b = SimBox::cubic(56.0, BoundaryMode::Open).unwrap();
    let lattice = BlockLattice::new(&p, &b).unwrap();
    let run = RunParams {
        z: 0.05,
        sweeps: 300,
        seed: 7,
        boundary: Some(PlateType::Two),
        boundary_depth: 3,
        snapshot_stride: 10,
        ..RunParams::default()
    };
    let (_, snaps) = gcmc::run(&p, &b, &run).unwrap();
    assert!(!snaps.is_empty());
    let mut constrained = 0;
    for s in &snaps {
        for q in &s.plates {
            if lattice.depth(lattice.block_of(&q.center)) <= 3 {
                constrained += 1;
                assert_eq!(q.plate_type(), PlateType::Two);
            }
        }
    }
    assert!(constrained > 0);
}

#[test]
fn sampler_keeps_hard_core_and_boundary() {
    let b = SimBox::cubic(56.0, BoundaryMode::Open).unwrap();
    let run = RunParams {
        z: 1.0,
        boundary: Some(PlateType::Three),
        boundary_depth: 2,
        ..RunParams::default()
    };
    let mut s = Sampler::new(k8(), b, run).unwrap();
    for _ in 0..50 {
        s.sweep();
        assert!(s.boundary_holds());
        assert!(s.set().hard_core_holds());
        assert!(s.set().index_consistent());
    }
    assert!(s.tallies().iter().all(|t| t.proposed > 0));
}

#[test]
fn pair_correlation_needs_two_snapshots() {
    let b = SimBox::cubic(40.0, BoundaryMode::Periodic).unwrap();
    let r = pair_correlation(&[], &b, PairBins { width: 1.0, count: 4 });
    assert!(matches!(r, Err(Error::InsufficientStatistics(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn merge_pools_samples(
        a in prop::collection::vec(prop::array::uniform6(0usize..20), 1..30),
        c in prop::collection::vec(prop::array::uniform6(0usize..20), 1..30),
    ) {
        let fill = |rows: &[[usize; 6]], replica| {
            let mut acc = ObservableAccumulator::new(1000.0);
            for r in rows {
                acc.record(replica, *r);
            }
            acc
        };
        let mut ab = fill(&a, 0);
        ab.merge(fill(&c, 1)).unwrap();
        let mut ba = fill(&c, 1);
        ba.merge(fill(&a, 0)).unwrap();
        prop_assert_eq!(ab.sample_count(), a.len() + c.len());
        let (x, y) = (ab.total_density(), ba.total_density());
        prop_assert!((x.mean - y.mean).abs() <= 1e-12 * x.mean.abs().max(1e-300));
        let all: usize = a.iter().chain(&c).map(|r| r.iter().sum::<usize>()).sum();
        let pooled = all as f64 / (a.len() + c.len()) as f64 / 1000.0;
        prop_assert!((x.mean - pooled).abs() <= 1e-12 * pooled.max(1e-300));
        prop_assert!(ab.clone().merge(fill(&a, 0)).is_err());
    }
}
