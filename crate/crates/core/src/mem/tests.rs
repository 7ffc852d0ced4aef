use super::*;
use crate::graph::{gen_sbm, SbmSpec};
use crate::linalg::Matrix;

fn small_train_cfg(seed: u64) -> TrainConfig {
    TrainConfig { hidden_dim: 32, epochs: 500, weight_decay: 0.0, seed, ..TrainConfig::default() }
}

/// 20-node two-block SBM with one deliberately flipped train label; the
/// shared oracle substrate for the estimator tests. Sparse edges and noisy
/// features keep predictions feature-driven, so the model has to memorize
/// the flipped node to fit it — exactly the signal the estimators measure.
fn oracle_graph() -> (Graph, usize) {
    let spec = SbmSpec {
        blocks: vec![10, 10],
        p_in: 0.15,
        p_out: 0.05,
        feat_dim: 8,
        mean_shift: 1.5,
        noise_std: 1.0,
        label_noise: 0.0,
        seed: 77,
    };
    let g = gen_sbm(&spec).unwrap().split(0.8, 77).unwrap();
    // Mislabel the first train node against its block, isolate it, and put
    // its features exactly on the block-0 mean. Its own label is then the
    // only evidence for predicting it as class 1: pure memorization.
    let flipped = g.train_nodes()[0];
    let mut labels: Vec<Option<usize>> = g.labels().to_vec();
    labels[flipped] = Some(1 - labels[flipped].unwrap());
    let mut feats = g.features().clone();
    for (j, x) in feats.row_mut(flipped).iter_mut().enumerate() {
        *x = if j == 0 { spec.mean_shift } else { 0.0 };
    }
    let edges: Vec<(usize, usize)> = g
        .edge_list()
        .into_iter()
        .filter(|&(u, v)| u != flipped && v != flipped)
        .collect();
    let train: Vec<bool> = (0..g.num_nodes()).map(|v| g.is_train(v)).collect();
    let test: Vec<bool> = (0..g.num_nodes()).map(|v| g.is_test(v)).collect();
    let g2 = Graph::build(feats, labels, &edges)
        .unwrap()
        .with_masks(train, test)
        .unwrap();
    (g2, flipped)
}

#[test]
fn neighbor_weights_basics() {
    // Path a-b-c: from a with k=2, hops are {b:1, c:2}.
    let g = Graph::build(Matrix::zeros(3, 1), vec![Some(0); 3], &[(0, 1), (1, 2)]).unwrap();
    let w = neighbor_weights(&g, 0, 2, 0.5);
    assert_eq!(w.len(), 2);
    assert!((w[&1] - 2.0 / 3.0).abs() < 1e-12);
    assert!((w[&2] - 1.0 / 3.0).abs() < 1e-12);

    // Single neighbor gets weight 1.
    let w1 = neighbor_weights(&g, 0, 1, 0.5);
    assert_eq!(w1.len(), 1);
    assert_eq!(w1[&1], 1.0);

    // beta = 1 gives uniform weights.
    let wu = neighbor_weights(&g, 0, 2, 1.0);
    for &w in wu.values() {
        assert!((w - 0.5).abs() < 1e-12);
    }

    // Isolated node: empty map.
    let iso = Graph::build(Matrix::zeros(2, 1), vec![Some(0); 2], &[]).unwrap();
    assert!(neighbor_weights(&iso, 0, 2, 0.5).is_empty());
}

#[test]
fn neighbor_weights_sum_to_one() {
    let spec = SbmSpec {
        blocks: vec![15, 15],
        p_in: 0.3,
        p_out: 0.05,
        feat_dim: 2,
        mean_shift: 1.0,
        noise_std: 1.0,
        label_noise: 0.0,
        seed: 5,
    };
    let g = gen_sbm(&spec).unwrap();
    for v in 0..g.num_nodes() {
        let w = neighbor_weights(&g, v, 2, 0.5);
        if !w.is_empty() {
            let s: f64 = w.values().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn alpha_one_collapses_to_self_term() {
    let (g, _) = oracle_graph();
    let cfg = MemConfig { alpha: 1.0, num_seeds: 2, ..MemConfig::default() };
    let table = estimate_mem_exact(&g, &cfg, &small_train_cfg(1)).unwrap();
    for r in &table.rows {
        assert_eq!(r.mem, Some(r.delta_self));
    }
}

#[test]
fn exact_loo_flipped_label_is_most_memorized() {
    let (g, flipped) = oracle_graph();
    let cfg = MemConfig { num_seeds: 5, ..MemConfig::default() };
    let table = estimate_mem_exact(&g, &cfg, &small_train_cfg(2)).unwrap();
    let flipped_row = table.rows.iter().find(|r| r.node == flipped).unwrap();
    assert!(
        flipped_row.delta_self > 0.5,
        "mislabeled node not memorized: {flipped_row:?}"
    );
    let max_self = table.rows.iter().map(|r| r.delta_self).fold(0.0, f64::max);
    assert_eq!(
        flipped_row.delta_self, max_self,
        "flipped node should top the self column: {:?}",
        table.rows
    );
}

#[test]
fn mem_scores_stay_in_unit_interval() {
    let (g, _) = oracle_graph();
    let cfg = MemConfig { num_seeds: 3, ..MemConfig::default() };
    let table = estimate_mem_exact(&g, &cfg, &small_train_cfg(3)).unwrap();
    for r in &table.rows {
        let m = r.mem.unwrap();
        assert!((0.0..=1.0).contains(&m));
        assert!((0.0..=1.0).contains(&r.delta_self));
        assert!((0.0..=1.0).contains(&r.delta_nbr));
    }
}

#[test]
fn subsample_keep_frac_one_is_an_error() {
    let (g, _) = oracle_graph();
    let cfg = MemConfig {
        estimator: Estimator::Subsample,
        subsample_keep_frac: 1.0,
        ..MemConfig::default()
    };
    let err = estimate_mem_subsample(&g, &cfg, &small_train_cfg(4)).unwrap_err();
    assert!(err.to_string().contains("exact_loo"));
}

#[test]
fn subsample_too_few_models_is_an_error() {
    let (g, _) = oracle_graph();
    let cfg = MemConfig {
        estimator: Estimator::Subsample,
        num_subsample_models: 5,
        ..MemConfig::default()
    };
    assert!(estimate_mem_subsample(&g, &cfg, &small_train_cfg(4)).is_err());
}

#[test]
fn subsample_is_deterministic() {
    let (g, _) = oracle_graph();
    let cfg = MemConfig {
        estimator: Estimator::Subsample,
        num_subsample_models: 12,
        ..MemConfig::default()
    };
    let a = estimate_mem_subsample(&g, &cfg, &small_train_cfg(5)).unwrap();
    let b = estimate_mem_subsample(&g, &cfg, &small_train_cfg(5)).unwrap();
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn node_difficulty_is_identity_on_mem() {
    let (g, _) = oracle_graph();
    let cfg = MemConfig { num_seeds: 2, ..MemConfig::default() };
    let table = estimate_mem_exact(&g, &cfg, &small_train_cfg(6)).unwrap();
    let diff = node_difficulty(&table);
    for r in &table.rows {
        assert_eq!(diff[&r.node], r.mem);
    }
}

#[test]
fn edge_difficulty_formula_and_symmetry() {
    // u has degree 4, v degree 1; scores 0.5 and 0.2.
    let g = Graph::build(
        Matrix::zeros(6, 1),
        vec![Some(0); 6],
        &[(0, 1), (0, 2), (0, 3), (0, 4)],
    )
    .unwrap();
    let mut scores = BTreeMap::new();
    for v in 0..6 {
        scores.insert(v, Some(0.0));
    }
    scores.insert(0, Some(0.5));
    scores.insert(1, Some(0.2));
    let out = edge_difficulty(&g, &scores, UnscoredEndpoint::Zero);
    let (_, _, s01) = out.iter().find(|&&(u, v, _)| (u, v) == (0, 1)).unwrap();
    assert!((s01 - (0.5 / 2.0 + 0.2 / 1.0)).abs() < 1e-12);

    // Unscored endpoint contributes zero / skips.
    scores.remove(&2);
    let zeroed = edge_difficulty(&g, &scores, UnscoredEndpoint::Zero);
    let (_, _, s02) = zeroed.iter().find(|&&(u, v, _)| (u, v) == (0, 2)).unwrap();
    assert!((s02 - 0.25).abs() < 1e-12);
    let skipped = edge_difficulty(&g, &scores, UnscoredEndpoint::Skip);
    assert!(skipped.iter().all(|&(u, v, _)| (u, v) != (0, 2)));
}

#[test]
fn feature_difficulty_mean_and_empty_error() {
    let mut g =
        Graph::build(Matrix::zeros(3, 1), vec![Some(0), Some(0), Some(0)], &[]).unwrap();
    g = g.with_masks(vec![true, true, false], vec![false, false, true]).unwrap();
    let mut scores = BTreeMap::new();
    scores.insert(0, Some(0.2));
    scores.insert(1, Some(0.4));
    let out = feature_difficulty(&g, &scores, &[(7, vec![0, 1])]).unwrap();
    assert_eq!(out, vec![(7, 0.30000000000000004)]);

    let single = feature_difficulty(&g, &scores, &[(3, vec![1])]).unwrap();
    assert_eq!(single, vec![(3, 0.4)]);

    // Node 2 is not train-masked: owner set is effectively empty.
    assert!(feature_difficulty(&g, &scores, &[(9, vec![2])]).is_err());
}

#[test]
fn margin_proxy_is_deterministic() {
    let (g, _) = oracle_graph();
    let params = crate::gnn::train(&g, &small_train_cfg(8)).unwrap();
    let a = margin_proxy_difficulty(&params, &g, ProxyOrientation::AsWritten).unwrap();
    let b = margin_proxy_difficulty(&params, &g, ProxyOrientation::AsWritten).unwrap();
    assert_eq!(a.scores, b.scores);
    let neg = margin_proxy_difficulty(&params, &g, ProxyOrientation::Negated).unwrap();
    for (v, s) in &a.scores {
        assert_eq!(neg.scores[v].unwrap(), -s.unwrap());
    }
}

#[test]
fn csv_serialization_shapes() {
    let (g, _) = oracle_graph();
    let cfg = MemConfig { num_seeds: 2, ..MemConfig::default() };
    let table = estimate_mem_exact(&g, &cfg, &small_train_cfg(9)).unwrap();
    let csv = table.to_csv();
    assert!(csv.starts_with("node_id,delta_self,delta_nbr,mem\n"));
    assert_eq!(csv.lines().count(), table.rows.len() + 1);
    let meta: MemMeta = serde_json::from_str(&table.meta_json()).unwrap();
    assert_eq!(meta.num_models, 2);
}
