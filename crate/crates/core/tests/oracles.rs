mod common;

use common::*;
use manifold_core::algorithms::{stage_targets, ClusteringStage};
use manifold_core::functors::{self, Disconnection};
use manifold_core::graph;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn space(seed: u64, n: usize) -> manifold_core::metric::PseudometricSpace {
    random_space(&mut ChaCha8Rng::seed_from_u64(seed), n)
}

fn targets(stage: ClusteringStage, x: &manifold_core::metric::PseudometricSpace) -> manifold_core::SquareMatrix {
    stage_targets(&stage, x, Disconnection::default()).unwrap().targets
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bottleneck_matches_path_enumeration(seed in any::<u64>(), n in 2usize..7) {
        let x = space(seed, n);
        prop_assert_eq!(graph::bottleneck_distances(x.matrix()), brute_bottleneck(x.matrix()));
    }

    #[test]
    fn hop_minimax_matches_walk_enumeration(seed in any::<u64>(), n in 2usize..7, hops in 1usize..6) {
        let x = space(seed, n);
        prop_assert_eq!(graph::hop_bounded_minimax(x.matrix(), hops), brute_hop_minimax(x.matrix(), hops));
    }

    #[test]
    fn vl_k_matches_subset_enumeration(seed in any::<u64>(), n in 2usize..7, k in 1usize..7) {
        let x = space(seed, n);
        prop_assert_eq!(targets(ClusteringStage::VlK { k }, &x), brute_vl_k_targets(x.matrix(), k));
    }

    #[test]
    fn k_connectivity_matches_definition(seed in any::<u64>(), n in 2usize..7, k in 1usize..5) {
        let x = space(seed, n);
        let s = x.matrix()[(0, n - 1)];
        let g = graph::Graph::threshold(x.matrix(), s);
        let adj = |u: usize, v: usize| x.matrix()[(u, v)] <= s;
        for mask in 1u32..(1 << n) {
            let set: Vec<usize> = (0..n).filter(|b| mask & (1 << b) != 0).collect();
            prop_assert_eq!(g.is_k_connected(&set, k), brute_k_connected(&adj, &set, k), "set {:?}", set);
        }
    }

    #[test]
    fn target_ordering(seed in any::<u64>(), n in 2usize..7, k in 1usize..7) {
        let x = space(seed, n);
        let sl = targets(ClusteringStage::SingleLinkage, &x);
        let lk = targets(ClusteringStage::LK { k }, &x);
        let vlk = targets(ClusteringStage::VlK { k }, &x);
        for (i, j, d) in x.matrix().upper_pairs() {
            prop_assert!(sl[(i, j)] <= lk[(i, j)] && lk[(i, j)] <= d);
            prop_assert!(sl[(i, j)] <= vlk[(i, j)] && vlk[(i, j)] <= d);
        }
    }

    #[test]
    fn refinement_spectrum(seed in any::<u64>(), n in 2usize..7, k in 1usize..7) {
        let x = space(seed, n);
        let ml = functors::maximal_linkage(&x);
        let sl = functors::single_linkage(&x);
        let lk = functors::l_k_linkage(&x, k).unwrap();
        let vlk = functors::vl_k_linkage(&x, k).unwrap();
        prop_assert!(refines_everywhere(&ml, &lk) && refines_everywhere(&lk, &sl));
        prop_assert!(refines_everywhere(&ml, &vlk) && refines_everywhere(&vlk, &sl));
    }
}

#[test]
fn chain_examples() {
    let x = manifold_core::metric::PseudometricSpace::from_rows(
        &[vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]],
        true,
    )
    .unwrap();
    assert_eq!(targets(ClusteringStage::SingleLinkage, &x)[(0, 2)], 1.0);
    assert_eq!(targets(ClusteringStage::KPath { k: 1 }, &x)[(0, 2)], 2.0);
    assert_eq!(targets(ClusteringStage::KPath { k: 2 }, &x)[(0, 2)], 1.0);
}

#[test]
fn ultrametric_fixed_point_both_directions() {
    let ultra = manifold_core::metric::PseudometricSpace::from_rows(
        &[
            vec![0.0, 1.0, 3.0, 3.0],
            vec![1.0, 0.0, 3.0, 3.0],
            vec![3.0, 3.0, 0.0, 2.0],
            vec![3.0, 3.0, 2.0, 0.0],
        ],
        true,
    )
    .unwrap();
    assert_eq!(targets(ClusteringStage::SingleLinkage, &ultra), *ultra.matrix());
    let plain = space(11, 5);
    assert_ne!(targets(ClusteringStage::SingleLinkage, &plain), *plain.matrix());
}
