use super::*;
use crate::gnn::init_params;
use crate::graph::{gen_sbm, SbmSpec};
use crate::linalg::Matrix;
use crate::unlearn::{unlearn_mgu, unlearn_retrain, UnlearnConfig};

fn toy() -> Graph {
    let spec = SbmSpec {
        blocks: vec![10, 10],
        p_in: 0.7,
        p_out: 0.1,
        feat_dim: 3,
        mean_shift: 1.5,
        noise_std: 0.5,
        label_noise: 0.0,
        seed: 21,
    };
    gen_sbm(&spec).unwrap().split(0.75, 21).unwrap()
}

fn small_cfg(seed: u64) -> TrainConfig {
    TrainConfig { hidden_dim: 8, epochs: 100, seed, ..TrainConfig::default() }
}

#[test]
fn tou_product_substitutions() {
    assert_eq!(tou_product(0.0, 0.0, 0.0), 1.0);
    assert!((tou_product(0.1, 0.0, 0.0) - 0.9).abs() < 1e-15);
    assert!((tou_product(0.1, 0.1, 0.1) - 0.729).abs() < 1e-15);
    assert!((tou_product(0.1, 0.05, 0.05) - 0.81225).abs() < 1e-15);
}

#[test]
fn identical_models_give_tou_one_for_every_kind() {
    let g = toy();
    let params = train(&g, &small_cfg(1)).unwrap();
    let train_set = g.train_nodes();

    let node_req = UnlearnRequest::nodes(vec![train_set[0], train_set[1]]);
    let rem = g.apply_request(&node_req).unwrap();
    let rep = tou_node(&params, &params, &g, &rem, &node_req).unwrap();
    assert_eq!(rep.tou, 1.0);
    assert_eq!(
        (rep.diff_deleted, rep.diff_remaining, rep.diff_test),
        (0.0, 0.0, 0.0)
    );

    let edges = g.edge_list();
    let edge_req = UnlearnRequest::edges(edges[..2.min(edges.len())].to_vec());
    let rem_e = g.apply_request(&edge_req).unwrap();
    let rep_e = tou_edge(&params, &params, &g, &rem_e, &edge_req, 7).unwrap();
    assert_eq!(rep_e.tou, 1.0);
    assert_eq!(rep_e.mia_seed, Some(7));

    let feat_req = UnlearnRequest::features(vec![train_set[0]]);
    let rem_f = g.apply_request(&feat_req).unwrap();
    let rep_f = tou_feat(&params, &params, &g, &rem_f, &feat_req).unwrap();
    assert_eq!(rep_f.tou, 1.0);
}

#[test]
fn report_kind_mismatch_is_an_error() {
    let g = toy();
    let params = init_params(3, 4, 2, 2);
    let req = UnlearnRequest::nodes(vec![0]);
    let rem = g.apply_request(&req).unwrap();
    assert!(tou_edge(&params, &params, &g, &rem, &req, 0).is_err());
    assert!(tou_feat(&params, &params, &g, &rem, &req).is_err());
}

#[test]
fn tou_is_symmetric_in_the_two_models() {
    let g = toy();
    let a = train(&g, &small_cfg(3)).unwrap();
    let req = UnlearnRequest::nodes(g.train_nodes()[..2].to_vec());
    let rem = g.apply_request(&req).unwrap();
    let b = unlearn_retrain(&g, &req, &small_cfg(3)).unwrap();
    let ab = tou_node(&a, &b, &g, &rem, &req).unwrap();
    let ba = tou_node(&b, &a, &g, &rem, &req).unwrap();
    assert_eq!(ab.tou, ba.tou);
    assert_eq!(ab.diff_deleted, ba.diff_deleted);
}

#[test]
fn rank_auc_conventions() {
    assert_eq!(rank_auc(&[0.9, 0.8], &[0.7, 0.1]), 1.0);
    assert_eq!(rank_auc(&[0.5, 0.5], &[0.5]), 0.5);
    assert_eq!(rank_auc(&[0.1], &[0.9]), 0.0);
    // Invariance under a strictly monotone transform.
    let pos = [0.2, 0.8, 0.5];
    let neg = [0.1, 0.6];
    let t = |x: f64| (3.0 * x).exp();
    let tp: Vec<f64> = pos.iter().map(|&x| t(x)).collect();
    let tn: Vec<f64> = neg.iter().map(|&x| t(x)).collect();
    assert_eq!(rank_auc(&pos, &neg), rank_auc(&tp, &tn));
}

#[test]
fn edge_mia_rejects_empty_sets() {
    let g = toy();
    let params = init_params(3, 4, 2, 4);
    assert!(edge_mia(&params, &g, &[], &[(0, 1)]).is_err());
    assert!(edge_mia(&params, &g, &[(0, 1)], &[]).is_err());
}

#[test]
fn negative_pairs_are_labeled_non_edges() {
    let g = toy();
    let edges: std::collections::BTreeSet<(usize, usize)> =
        g.edge_list().into_iter().map(|(u, v)| (u.min(v), u.max(v))).collect();
    let neg = sample_negative_pairs(&g, 15, 9).unwrap();
    assert_eq!(neg.len(), 15);
    let distinct: std::collections::BTreeSet<_> = neg.iter().collect();
    assert_eq!(distinct.len(), 15);
    for &(u, v) in &neg {
        assert!(u < v);
        assert!(!edges.contains(&(u, v)));
        assert!(g.label(u).is_some() && g.label(v).is_some());
    }
    assert_eq!(neg, sample_negative_pairs(&g, 15, 9).unwrap());
    assert_ne!(neg, sample_negative_pairs(&g, 15, 10).unwrap());
}

#[test]
fn dense_graph_negative_sampling_fails_cleanly() {
    // Complete graph on 4 labeled nodes: no non-edges exist.
    let g = Graph::build(
        Matrix::zeros(4, 1),
        vec![Some(0); 4],
        &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
    )
    .unwrap();
    assert!(sample_negative_pairs(&g, 1, 0).is_err());
}

#[test]
fn structure_free_predictions_depend_only_on_own_row() {
    let g = toy();
    let params = train(&g, &small_cfg(5)).unwrap();
    let free = edgeless(&g).unwrap();
    let base = crate::gnn::forward(&params, &free);

    // Perturb one node's features; every other row must be untouched.
    let mut feats = g.features().clone();
    for x in feats.row_mut(3) {
        *x += 10.0;
    }
    let perturbed = Graph::build(feats, g.labels().to_vec(), &[]).unwrap();
    let changed = crate::gnn::forward(&params, &perturbed);
    for v in 0..g.num_nodes() {
        if v != 3 {
            assert_eq!(base.probs.row(v), changed.probs.row(v), "node {v} moved");
        }
    }
}

fn toy_scores(g: &Graph) -> BTreeMap<usize, Option<f64>> {
    // Score strictly increasing in node id.
    g.train_nodes().into_iter().map(|v| (v, Some(v as f64))).collect()
}

#[test]
fn difficulty_sets_sizes_and_ranking() {
    let g = toy();
    let train = g.train_nodes();
    let sets = build_difficulty_sets(&toy_scores(&g), &g, &g.test_nodes(), 10.0, 3).unwrap();
    let size = (0.10 * train.len() as f64).ceil() as usize;
    for name in DifficultySets::NAMES {
        let s = sets.by_name(name).unwrap();
        assert_eq!(s.len(), size, "set {name}");
        assert!(s.iter().all(|v| train.contains(v)), "set {name} outside train");
    }
    // Scores increase with node id, so low_mem is the lowest train ids in order.
    assert_eq!(sets.low_mem, train[..size].to_vec());
    let mut top: Vec<usize> = train[train.len() - size..].to_vec();
    top.reverse();
    assert_eq!(sets.high_mem, top);
    assert!(sets.low_mem.iter().all(|v| !sets.high_mem.contains(v)));
}

#[test]
fn difficulty_sets_distance_ranking_handles_unreachable() {
    // 0-1 component near "test" node 1; isolated train node 2 is farthest.
    let g = Graph::build(Matrix::zeros(3, 1), vec![Some(0), Some(1), Some(0)], &[(0, 1)])
        .unwrap()
        .with_masks(vec![true, false, true], vec![false, true, false])
        .unwrap();
    let scores: BTreeMap<usize, Option<f64>> =
        [(0, Some(0.1)), (2, Some(0.9))].into_iter().collect();
    let sets = build_difficulty_sets(&scores, &g, &[1], 50.0, 0).unwrap();
    assert_eq!(sets.local, vec![0]);
    assert_eq!(sets.distant, vec![2]);
}

#[test]
fn difficulty_sets_validate_inputs() {
    let g = toy();
    let scores = toy_scores(&g);
    assert!(build_difficulty_sets(&scores, &g, &g.test_nodes(), 0.0, 0).is_err());
    assert!(build_difficulty_sets(&scores, &g, &g.test_nodes(), 120.0, 0).is_err());
    // Too few scored nodes for the requested size.
    let sparse: BTreeMap<usize, Option<f64>> =
        [(g.train_nodes()[0], Some(0.5))].into_iter().collect();
    assert!(build_difficulty_sets(&sparse, &g, &g.test_nodes(), 50.0, 0).is_err());
}

#[test]
fn generalization_impact_zero_ratio_is_zero() {
    let g = toy();
    let sets = build_difficulty_sets(&toy_scores(&g), &g, &g.test_nodes(), 20.0, 1).unwrap();
    let rows =
        generalization_impact(&g, &sets, &[0.0], &small_cfg(0), &[1, 2]).unwrap();
    assert_eq!(rows.len(), DifficultySets::NAMES.len());
    for r in &rows {
        assert_eq!((r.mean_delta, r.stdev), (0.0, 0.0));
    }
}

#[test]
fn generalization_impact_is_deterministic() {
    let g = toy();
    let sets = build_difficulty_sets(&toy_scores(&g), &g, &g.test_nodes(), 20.0, 1).unwrap();
    let cfg = TrainConfig { hidden_dim: 6, epochs: 40, ..small_cfg(0) };
    let a = generalization_impact(&g, &sets, &[0.1], &cfg, &[1, 2]).unwrap();
    let b = generalization_impact(&g, &sets, &[0.1], &cfg, &[1, 2]).unwrap();
    assert_eq!(a, b);
}

#[test]
fn centrality_contrast_shape_and_identity_ratio() {
    let g = toy();
    let train = g.train_nodes();
    let same = DifficultySets {
        low_mem: train[..3].to_vec(),
        high_mem: train[..3].to_vec(),
        random: train[..3].to_vec(),
        local: train[..3].to_vec(),
        distant: train[..3].to_vec(),
    };
    let rows = centrality_contrast(&g, &same);
    assert_eq!(rows.len(), 3);
    assert_eq!(
        rows.iter().map(|r| r.metric.as_str()).collect::<Vec<_>>(),
        vec!["degree", "pagerank", "kcore"]
    );
    for r in &rows {
        assert_eq!(r.ratio, 1.0, "metric {}", r.metric);
    }
}

#[test]
fn histogram_svg_shape() {
    let values: Vec<f64> = (0..100).map(|i| (i as f64 * 0.37).sin().abs()).collect();
    let svg = histogram_svg(&values, "scores");
    assert!(svg.contains("viewBox=\"0 0 600 400\""));
    assert_eq!(svg.matches("<rect").count(), 30);
    assert!(svg.contains("scores"));
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    // Degenerate inputs still render.
    assert!(histogram_svg(&[], "empty").contains("</svg>"));
    assert!(histogram_svg(&[0.5; 10], "flat").contains("</svg>"));
}

#[test]
fn eval_report_json_round_trip() {
    let g = toy();
    let teacher = train(&g, &small_cfg(6)).unwrap();
    let req = UnlearnRequest::nodes(g.train_nodes()[..1].to_vec());
    let rem = g.apply_request(&req).unwrap();
    let student = unlearn_mgu(&teacher, &g, &req, &UnlearnConfig::default()).unwrap();
    let retrained = unlearn_retrain(&g, &req, &small_cfg(6)).unwrap();
    let rep = tou_node(&student, &retrained, &g, &rem, &req).unwrap();
    assert!((0.0..=1.0).contains(&rep.tou));
    assert_eq!(
        rep.tou,
        tou_product(rep.diff_deleted, rep.diff_remaining, rep.diff_test)
    );
    let text = serde_json::to_string(&rep).unwrap();
    let back: EvalReport = serde_json::from_str(&text).unwrap();
    assert_eq!(rep, back);
}

#[test]
fn derived_eval_seeds_are_distinct() {
    let seeds = derive_eval_seeds(42, 8);
    let set: std::collections::BTreeSet<_> = seeds.iter().collect();
    assert_eq!(set.len(), 8);
    assert_eq!(seeds, derive_eval_seeds(42, 8));
}
