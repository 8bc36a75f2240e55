use platelat::expansion::{
    brute_force_log_z, mayer_log_z, polymer_log_z_cluster, polymer_z_exact, BruteForce, OverlapGraph,
    Polymer, PolymerModel,
};
use platelat::{BoundaryMode, ModelParams, Orientation, SimBox};
use proptest::prelude::*;

fn factorial(n: i64) -> i64 {
    (1..=n).product()
}

fn graph(n: usize, edges: &[(usize, usize)]) -> OverlapGraph {
    let mut adj = vec![0u32; n];
    for &(i, j) in edges {
        adj[i] |= 1 << j;
        adj[j] |= 1 << i;
    }
    OverlapGraph::from_adjacency(adj).unwrap()
}

#[test]
fn ursell_of_complete_graphs_and_trees() {
    for n in 1..=7usize {
        let all: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let sign = if n % 2 == 1 { 1 } else { -1 };
        assert_eq!(graph(n, &all).ursell(), sign * factorial(n as i64 - 1), "K_{n}");
        let path: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
        assert_eq!(graph(n, &path).ursell(), sign, "path of {n}");
        let star: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
        assert_eq!(graph(n, &star).ursell(), sign, "star of {n}");
    }
}

#[test]
fn asymmetric_adjacency_is_rejected() {
    assert!(OverlapGraph::from_adjacency(vec![0b10, 0b00]).is_err());
    assert!(OverlapGraph::from_adjacency(vec![0b01]).is_err());
}

proptest! {
    #[test]
    fn ursell_recursion_matches_edge_enumeration(n in 1usize..=6, mask in any::<u32>()) {
        let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        let edges: Vec<(usize, usize)> = pairs
            .iter()
            .enumerate()
            .filter(|(e, _)| (mask >> e) & 1 == 1)
            .map(|(_, &p)| p)
            .collect();
        let g = graph(n, &edges);
        let phi = g.ursell();
        prop_assert_eq!(phi, g.ursell_by_edge_subsets().unwrap());
        if !g.is_connected() {
            prop_assert_eq!(phi, 0);
        }
    }

    #[test]
    fn polymer_expansion_error_within_remainder(seed in any::<u64>()) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let model = PolymerModel::random([3, 3, 3], 5, 3, 1e-3, &mut rng).unwrap();
        let z = polymer_z_exact(&model).unwrap();
        let est = polymer_log_z_cluster(&model, 4).unwrap();
        prop_assert!((est.value - z.ln()).abs() <= est.remainder + 4.0 * f64::EPSILON * z);
    }
}

#[test]
fn non_interacting_polymers_factorize() {
    let blocks = [[0, 0, 0], [3, 3, 3]];
    let m = PolymerModel::new(
        [4, 4, 4],
        blocks
            .iter()
            .map(|&b| Polymer { blocks: vec![b], activity: 1e-3 })
            .collect(),
    )
    .unwrap();
    let exact = polymer_z_exact(&m).unwrap();
    assert!((exact - 1.001f64 * 1.001).abs() < 1e-15);
}

#[test]
fn series_agree_for_a_small_region() {
    let p = ModelParams::new(8.0, 0.8).unwrap();
    let region = SimBox::cuboid([3.0, 2.0, 5.0], BoundaryMode::Open).unwrap();
    let z = 0.1 / (6.0 * region.volume());
    let mayer = mayer_log_z(&p, &region, &Orientation::ALL, z, 2).unwrap();
    let brute = brute_force_log_z(&p, &region, &Orientation::ALL, z, &BruteForce::default()).unwrap();
    let allowed = mayer.remainder + brute.remainder + 3.0 * mayer.stat_error.hypot(brute.stat_error);
    assert!((mayer.value - brute.value).abs() <= allowed);
    // The leading term alone is 6 z |R|.
    assert!((mayer.value - 0.1).abs() < 0.1 * 0.1);
}
