//! Randomized invariant checks over the numeric and graph primitives.

use proptest::prelude::*;

use mgu_core::eval::{rank_auc, tou_product};
use mgu_core::graph::{gen_sbm, CentralityMetric, SbmSpec, UnlearnRequest};
use mgu_core::linalg::{softmax_in_place, softplus};
use mgu_core::mem::neighbor_weights;

fn sbm_strategy() -> impl Strategy<Value = SbmSpec> {
    (4usize..9, 4usize..9, 0.3f64..0.9, 0.0f64..0.3, any::<u64>()).prop_map(
        |(a, b, p_in, p_out, seed)| SbmSpec {
            blocks: vec![a, b],
            p_in,
            p_out,
            feat_dim: 3,
            mean_shift: 1.0,
            noise_std: 0.5,
            label_noise: 0.0,
            seed,
        },
    )
}

proptest! {
    /// Adding a constant to a logits row leaves its softmax unchanged.
    #[test]
    fn softmax_is_shift_invariant(
        logits in prop::collection::vec(-10.0f64..10.0, 2..8),
        shift in -5.0f64..5.0,
    ) {
        let mut base = logits.clone();
        softmax_in_place(&mut base);
        let mut shifted: Vec<f64> = logits.iter().map(|x| x + shift).collect();
        softmax_in_place(&mut shifted);
        for (a, b) in base.iter().zip(&shifted) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((base.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    /// softplus dominates the hinge and exceeds it by at most ln 2.
    #[test]
    fn softplus_bounds_the_hinge(x in -30.0f64..30.0) {
        let s = softplus(x);
        let hinge = x.max(0.0);
        prop_assert!(s >= hinge);
        prop_assert!(s - hinge <= std::f64::consts::LN_2 + 1e-12);
    }

    /// The three-factor trade-off score stays in [0,1], is 1 only for three
    /// zero differences, and ignores argument order.
    #[test]
    fn tou_product_range_and_symmetry(
        a in 0.0f64..=1.0, b in 0.0f64..=1.0, c in 0.0f64..=1.0,
    ) {
        let t = tou_product(a, b, c);
        prop_assert!((0.0..=1.0).contains(&t));
        if a > 0.0 || b > 0.0 || c > 0.0 {
            prop_assert!(t < 1.0);
        } else {
            prop_assert!(t == 1.0);
        }
        prop_assert!((t - tou_product(c, a, b)).abs() < 1e-15);
    }

    /// Ranking AUC only sees the order of the scores, so any strictly
    /// monotone transform leaves it unchanged.
    #[test]
    fn rank_auc_is_invariant_under_monotone_transforms(
        pos in prop::collection::vec(-3.0f64..3.0, 1..20),
        neg in prop::collection::vec(-3.0f64..3.0, 1..20),
    ) {
        let base = rank_auc(&pos, &neg);
        prop_assert!((0.0..=1.0).contains(&base));
        let cube = |xs: &[f64]| xs.iter().map(|x| x * x * x).collect::<Vec<_>>();
        let affine = |xs: &[f64]| xs.iter().map(|x| 2.5 * x + 7.0).collect::<Vec<_>>();
        prop_assert!((rank_auc(&cube(&pos), &cube(&neg)) - base).abs() < 1e-12);
        prop_assert!((rank_auc(&affine(&pos), &affine(&neg)) - base).abs() < 1e-12);
    }

    /// Distance-decayed neighbor weights are a probability distribution
    /// whenever the neighborhood is nonempty.
    #[test]
    fn neighbor_weights_normalize(
        spec in sbm_strategy(),
        beta in 0.05f64..1.0,
        k in 1usize..4,
        pick in any::<prop::sample::Index>(),
    ) {
        let g = gen_sbm(&spec).unwrap();
        let v = pick.index(g.num_nodes());
        let w = neighbor_weights(&g, v, k, beta);
        if !w.is_empty() {
            let total: f64 = w.values().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(!w.contains_key(&v));
        }
    }

    /// Hop distances step by at most one across any edge.
    #[test]
    fn hop_distances_step_by_at_most_one(
        spec in sbm_strategy(),
        pick in any::<prop::sample::Index>(),
    ) {
        let g = gen_sbm(&spec).unwrap();
        let source = pick.index(g.num_nodes());
        let dist = g.hop_distances(&[source]);
        for (u, v) in g.edge_list() {
            match (dist[u], dist[v]) {
                (Some(a), Some(b)) => {
                    prop_assert!(a.abs_diff(b) <= 1, "edge ({u},{v}): {a} vs {b}")
                }
                // One endpoint reachable and the other not would contradict
                // the edge.
                (Some(_), None) | (None, Some(_)) => prop_assert!(false),
                (None, None) => {}
            }
        }
    }

    /// PageRank is a probability distribution.
    #[test]
    fn pagerank_sums_to_one(spec in sbm_strategy()) {
        let g = gen_sbm(&spec).unwrap();
        let pr = g.centrality(CentralityMetric::Pagerank);
        prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        prop_assert!(pr.iter().all(|&x| x >= 0.0));
    }

    /// The generator is a pure function of its spec.
    #[test]
    fn sbm_generation_is_deterministic(spec in sbm_strategy()) {
        let a = gen_sbm(&spec).unwrap();
        let b = gen_sbm(&spec).unwrap();
        prop_assert_eq!(a.to_json(), b.to_json());
    }

    /// Deleting the same node set twice is the same as deleting it once,
    /// and surgery keeps the adjacency symmetric.
    #[test]
    fn node_deletion_is_idempotent_and_symmetric(
        spec in sbm_strategy(),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..4),
    ) {
        let g = gen_sbm(&spec).unwrap().split(0.7, spec.seed).unwrap();
        let train = g.train_nodes();
        let ids: Vec<usize> =
            picks.iter().map(|p| train[p.index(train.len())]).collect();
        let request = UnlearnRequest::nodes(ids);
        let once = g.apply_request(&request).unwrap();
        let twice = once.apply_request(&request).unwrap();
        prop_assert_eq!(once.to_json(), twice.to_json());
        for (u, v) in once.edge_list() {
            prop_assert_eq!(once.hop_distances(&[u])[v], Some(1));
            prop_assert_eq!(once.hop_distances(&[v])[u], Some(1));
        }
    }
}
