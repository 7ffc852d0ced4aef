//! Per-node memorization estimation and unlearning difficulty scores.
//!
//! The memorization score of a training node is the drop in the probability
//! of predicting it correctly when it is excluded from training, blended
//! with a distance-weighted aggregate of the prediction changes on its k-hop
//! neighbors. Two estimators are provided: exact leave-one-out (retrain with
//! each node excluded, across K seeds) and a Monte-Carlo subsample ensemble.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::gnn::{self, predict_row, ModelParams, TrainConfig};
use crate::graph::{Graph, RequestKind, UnlearnRequest};
use crate::rng::derive_seed;
use crate::unlearn;
use crate::{par, Error, Result};

/// How a node is excluded from training for the leave-one-out estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionMode {
    /// Remove the node from the train mask but keep its row and edges, so
    /// the neighbor term measures pure supervision influence.
    LabelOnly,
    /// Also drop the node's incident edges.
    NodeRemoval,
}

/// Estimator selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    ExactLoo,
    Subsample,
}

/// Memorization estimation configuration. Fields missing from a JSON
/// document take their default values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct MemConfig {
    pub alpha: f64,
    pub beta: f64,
    pub k_hops: usize,
    pub estimator: Estimator,
    /// K seeds for the exact leave-one-out estimator.
    pub num_seeds: usize,
    /// M models for the subsample estimator.
    pub num_subsample_models: usize,
    pub subsample_keep_frac: f64,
    pub exclusion_mode: ExclusionMode,
}

impl Default for MemConfig {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.5,
            k_hops: 2,
            estimator: Estimator::ExactLoo,
            num_seeds: 5,
            num_subsample_models: 200,
            subsample_keep_frac: 0.7,
            exclusion_mode: ExclusionMode::LabelOnly,
        }
    }
}

impl MemConfig {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("alpha = {} outside [0, 1]", self.alpha)));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return Err(Error::Config(format!("beta = {} outside (0, 1]", self.beta)));
        }
        if self.k_hops < 1 {
            return Err(Error::Config("k_hops must be >= 1".into()));
        }
        Ok(())
    }
}

/// One row of the memorization table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemRow {
    pub node: usize,
    /// `|Delta(v)|`: absolute self prediction-probability change.
    pub delta_self: f64,
    /// Distance-weighted neighbor impact.
    pub delta_nbr: f64,
    /// `alpha * delta_self + (1 - alpha) * delta_nbr`, `None` when the
    /// subsample estimator had an empty partition for this node.
    pub mem: Option<f64>,
}

/// Estimator provenance stored alongside the scores.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemMeta {
    pub estimator: Estimator,
    pub exclusion_mode: ExclusionMode,
    pub alpha: f64,
    pub beta: f64,
    pub k_hops: usize,
    /// Training seeds (exact) or ensemble member count (subsample).
    pub seeds: Vec<u64>,
    pub num_models: usize,
}

/// Per-training-node memorization decomposition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MemTable {
    pub rows: Vec<MemRow>,
    pub meta: MemMeta,
}

impl MemTable {
    /// Per-node mem score lookup (node difficulty is the identity map onto
    /// the mem column).
    pub fn node_scores(&self) -> BTreeMap<usize, Option<f64>> {
        self.rows.iter().map(|r| (r.node, r.mem)).collect()
    }

    /// CSV body `node_id,delta_self,delta_nbr,mem` (blank mem when
    /// undefined).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node_id,delta_self,delta_nbr,mem\n");
        for r in &self.rows {
            let mem = r.mem.map_or(String::new(), |m| format!("{m}"));
            out.push_str(&format!("{},{},{},{}\n", r.node, r.delta_self, r.delta_nbr, mem));
        }
        out
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string(&self.meta).expect("meta serialization cannot fail")
    }
}

/// Exponentially distance-decayed weights over the k-hop neighborhood of
/// `v`: `w_j = beta^dis(v,j) / sum_t beta^dis(v,t)`, over nodes at hop
/// distance 1..k. Empty map when `v` has no neighbors within `k` hops.
pub fn neighbor_weights(graph: &Graph, v: usize, k: usize, beta: f64) -> BTreeMap<usize, f64> {
    let dist = graph.hop_distances(&[v]);
    let mut weights = BTreeMap::new();
    let mut total = 0.0;
    for (u, d) in dist.iter().enumerate() {
        if let Some(d) = d {
            if *d >= 1 && *d as usize <= k {
                let w = beta.powi(*d as i32);
                weights.insert(u, w);
                total += w;
            }
        }
    }
    for w in weights.values_mut() {
        *w /= total;
    }
    weights
}

/// Correctness of a trained model on the listed nodes, judged against the
/// labels of `label_graph`.
fn correctness(
    params: &ModelParams,
    eval_graph: &Graph,
    label_graph: &Graph,
    nodes: &[usize],
) -> Vec<bool> {
    let post = gnn::forward(params, eval_graph);
    nodes
        .iter()
        .map(|&v| {
            label_graph
                .label(v)
                .is_some_and(|y| predict_row(post.probs.row(v)) == y)
        })
        .collect()
}

fn exclude(graph: &Graph, v: usize, mode: ExclusionMode) -> Result<Graph> {
    match mode {
        ExclusionMode::LabelOnly => {
            let mut train: Vec<bool> = (0..graph.num_nodes()).map(|u| graph.is_train(u)).collect();
            train[v] = false;
            let test: Vec<bool> = (0..graph.num_nodes()).map(|u| graph.is_test(u)).collect();
            graph.with_masks(train, test)
        }
        ExclusionMode::NodeRemoval => graph.apply_request(&UnlearnRequest {
            kind: RequestKind::Node,
            node_ids: vec![v],
            edge_pairs: Vec::new(),
        }),
    }
}

fn blend(cfg: &MemConfig, delta_self: f64, delta_nbr: f64) -> f64 {
    cfg.alpha * delta_self + (1.0 - cfg.alpha) * delta_nbr
}

/// Exact leave-one-out estimator.
///
/// Trains K models on the full train set (shared across all targets) and K
/// per excluded node; prediction probabilities are seed frequencies.
pub fn estimate_mem_exact(
    graph: &Graph,
    cfg: &MemConfig,
    train_cfg: &TrainConfig,
) -> Result<MemTable> {
    cfg.validate()?;
    if cfg.num_seeds == 0 {
        return Err(Error::Config("exact LOO needs num_seeds >= 1".into()));
    }
    let train_nodes = graph.train_nodes();
    let seeds: Vec<u64> =
        (0..cfg.num_seeds).map(|k| derive_seed(train_cfg.seed, k as u64)).collect();

    let with_runs: Vec<Result<Vec<bool>>> = par::map_indexed(seeds.clone(), |seed| {
        let params = gnn::train(graph, &TrainConfig { seed, ..train_cfg.clone() })?;
        Ok(correctness(&params, graph, graph, &train_nodes))
    });
    let with_correct = collect_runs(with_runs)?;
    let pr_with = frequencies(&with_correct, train_nodes.len());

    let index_of: BTreeMap<usize, usize> =
        train_nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    let jobs: Vec<usize> = train_nodes.clone();
    let rows: Vec<Result<MemRow>> = par::map_indexed(jobs, |v| {
        let reduced = exclude(graph, v, cfg.exclusion_mode)?;
        let mut correct = Vec::with_capacity(seeds.len());
        for &seed in &seeds {
            let params = gnn::train(&reduced, &TrainConfig { seed, ..train_cfg.clone() })?;
            // Judge against the original labels; the excluded node keeps its
            // label in `graph` even under node_removal surgery.
            correct.push(correctness(&params, &reduced, graph, &train_nodes));
        }
        let pr_without = frequencies(&correct, train_nodes.len());

        let delta_self = (pr_with[index_of[&v]] - pr_without[index_of[&v]]).abs();
        let weights = neighbor_weights(graph, v, cfg.k_hops, cfg.beta);
        let mut delta_nbr = 0.0;
        for (&j, &w) in &weights {
            if graph.is_train(j) && graph.label(j).is_some() {
                let ji = index_of[&j];
                delta_nbr += w * (pr_with[ji] - pr_without[ji]).abs();
            }
        }
        Ok(MemRow { node: v, delta_self, delta_nbr, mem: Some(blend(cfg, delta_self, delta_nbr)) })
    });

    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(MemTable {
        rows,
        meta: MemMeta {
            estimator: Estimator::ExactLoo,
            exclusion_mode: cfg.exclusion_mode,
            alpha: cfg.alpha,
            beta: cfg.beta,
            k_hops: cfg.k_hops,
            num_models: seeds.len(),
            seeds,
        },
    })
}

fn collect_runs(runs: Vec<Result<Vec<bool>>>) -> Result<Vec<Vec<bool>>> {
    runs.into_iter().collect()
}

fn frequencies(correct: &[Vec<bool>], len: usize) -> Vec<f64> {
    let mut out = vec![0.0; len];
    for run in correct {
        for (o, &c) in out.iter_mut().zip(run) {
            if c {
                *o += 1.0;
            }
        }
    }
    let inv = 1.0 / correct.len() as f64;
    for o in &mut out {
        *o *= inv;
    }
    out
}

/// Monte-Carlo subsample estimator.
///
/// Trains M models on independent seeded subsamples of the train set; for
/// each node, the with/without probabilities are correct fractions over the
/// models that did/did not include it.
pub fn estimate_mem_subsample(
    graph: &Graph,
    cfg: &MemConfig,
    train_cfg: &TrainConfig,
) -> Result<MemTable> {
    cfg.validate()?;
    if cfg.num_subsample_models < 10 {
        return Err(Error::Config("subsample estimator needs num_subsample_models >= 10".into()));
    }
    if cfg.subsample_keep_frac >= 1.0 {
        return Err(Error::Config(
            "subsample_keep_frac = 1 leaves every without-partition empty; use the exact_loo \
             estimator instead"
                .into(),
        ));
    }
    if cfg.subsample_keep_frac <= 0.0 {
        return Err(Error::Config("subsample_keep_frac must be in (0, 1)".into()));
    }
    let train_nodes = graph.train_nodes();
    let n_keep =
        ((cfg.subsample_keep_frac * train_nodes.len() as f64).round() as usize).max(1);

    struct Run {
        kept: Vec<bool>,
        correct: Vec<bool>,
    }

    let jobs: Vec<usize> = (0..cfg.num_subsample_models).collect();
    let runs: Vec<Result<Run>> = par::map_indexed(jobs, |m| {
        let subsample_seed = derive_seed(train_cfg.seed, 0x5B5B ^ (m as u64));
        let mut order: Vec<usize> = (0..train_nodes.len()).collect();
        crate::rng::SplitMix64::new(subsample_seed).shuffle(&mut order);
        let mut kept = vec![false; train_nodes.len()];
        for &i in order.iter().take(n_keep) {
            kept[i] = true;
        }
        let mut train_mask = vec![false; graph.num_nodes()];
        for (i, &v) in train_nodes.iter().enumerate() {
            if kept[i] {
                train_mask[v] = true;
            }
        }
        let test_mask: Vec<bool> = (0..graph.num_nodes()).map(|u| graph.is_test(u)).collect();
        let sub = graph.with_masks(train_mask, test_mask)?;
        let seed = derive_seed(train_cfg.seed, 0xA0A0 ^ (m as u64));
        let params = gnn::train(&sub, &TrainConfig { seed, ..train_cfg.clone() })?;
        Ok(Run { kept, correct: correctness(&params, &sub, graph, &train_nodes) })
    });
    let runs = runs.into_iter().collect::<Result<Vec<Run>>>()?;

    let index_of: BTreeMap<usize, usize> =
        train_nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();

    // Partitioned probability for node `target` judged at node `probe`.
    let pr = |target_idx: usize, probe_idx: usize, include: bool| -> Option<f64> {
        let mut hits = 0usize;
        let mut total = 0usize;
        for run in &runs {
            if run.kept[target_idx] == include {
                total += 1;
                if run.correct[probe_idx] {
                    hits += 1;
                }
            }
        }
        (total > 0).then(|| hits as f64 / total as f64)
    };

    let mut rows = Vec::with_capacity(train_nodes.len());
    for (vi, &v) in train_nodes.iter().enumerate() {
        let with_self = pr(vi, vi, true);
        let without_self = pr(vi, vi, false);
        let (delta_self, defined) = match (with_self, without_self) {
            (Some(a), Some(b)) => ((a - b).abs(), true),
            _ => (0.0, false),
        };
        let weights = neighbor_weights(graph, v, cfg.k_hops, cfg.beta);
        let mut delta_nbr = 0.0;
        for (&j, &w) in &weights {
            if graph.is_train(j) && graph.label(j).is_some() {
                let ji = index_of[&j];
                if let (Some(a), Some(b)) = (pr(vi, ji, true), pr(vi, ji, false)) {
                    delta_nbr += w * (a - b).abs();
                }
            }
        }
        rows.push(MemRow {
            node: v,
            delta_self,
            delta_nbr,
            mem: defined.then(|| blend(cfg, delta_self, delta_nbr)),
        });
    }
    Ok(MemTable {
        rows,
        meta: MemMeta {
            estimator: Estimator::Subsample,
            exclusion_mode: cfg.exclusion_mode,
            alpha: cfg.alpha,
            beta: cfg.beta,
            k_hops: cfg.k_hops,
            seeds: vec![train_cfg.seed],
            num_models: cfg.num_subsample_models,
        },
    })
}

/// Node unlearning difficulty is the memorization score itself.
pub fn node_difficulty(table: &MemTable) -> BTreeMap<usize, Option<f64>> {
    table.node_scores()
}

/// How an unscored endpoint contributes to an edge score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnscoredEndpoint {
    /// Contributes zero (default): unlabeled nodes carry no measured
    /// memorization.
    Zero,
    /// Drop the edge from the output.
    Skip,
}

/// Edge difficulty `H(u)/sqrt(deg u) + H(v)/sqrt(deg v)` for every stored
/// edge, degrees from the current graph.
pub fn edge_difficulty(
    graph: &Graph,
    node_scores: &BTreeMap<usize, Option<f64>>,
    unscored: UnscoredEndpoint,
) -> Vec<(usize, usize, f64)> {
    let score = |v: usize| node_scores.get(&v).copied().flatten();
    let mut out = Vec::with_capacity(graph.num_edges());
    for (u, v) in graph.edge_list() {
        let su = score(u);
        let sv = score(v);
        if unscored == UnscoredEndpoint::Skip && (su.is_none() || sv.is_none()) {
            continue;
        }
        let term = |s: Option<f64>, n: usize| {
            s.map_or(0.0, |s| s / (graph.degree(n) as f64).sqrt())
        };
        out.push((u, v, term(su, u) + term(sv, v)));
    }
    out
}

/// Feature difficulty: mean node difficulty over each feature's owner set
/// intersected with train nodes.
pub fn feature_difficulty(
    graph: &Graph,
    node_scores: &BTreeMap<usize, Option<f64>>,
    owner_sets: &[(usize, Vec<usize>)],
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(owner_sets.len());
    for (feature_id, owners) in owner_sets {
        let mut sum = 0.0;
        let mut count = 0usize;
        for &v in owners {
            if graph.is_train(v) {
                if let Some(Some(s)) = node_scores.get(&v) {
                    sum += s;
                    count += 1;
                }
            }
        }
        if count == 0 {
            return Err(Error::Config(format!(
                "feature {feature_id}: no scored train nodes in owner set"
            )));
        }
        out.push((*feature_id, sum / count as f64));
    }
    Ok(out)
}

/// Sign convention for the margin proxy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProxyOrientation {
    /// Scores are the raw margins.
    AsWritten,
    /// Scores are negated margins (hard nodes have small margins).
    Negated,
}

/// Training-free difficulty proxy: per-train-node prototype margins of the
/// frozen original model on the full graph.
#[derive(Debug, Clone)]
pub struct MarginProxy {
    pub scores: BTreeMap<usize, Option<f64>>,
    pub orientation: ProxyOrientation,
}

pub fn margin_proxy_difficulty(
    params_original: &ModelParams,
    graph: &Graph,
    orientation: ProxyOrientation,
) -> Result<MarginProxy> {
    let post = gnn::forward(params_original, graph);
    let protos = unlearn::prototypes(&post.probs, graph)?;
    let sign = match orientation {
        ProxyOrientation::AsWritten => 1.0,
        ProxyOrientation::Negated => -1.0,
    };
    let mut scores = BTreeMap::new();
    for v in graph.train_nodes() {
        let y = graph.label(v).ok_or(Error::Unlabeled(v))?;
        let gamma = unlearn::margin(post.probs.row(v), y, &protos)?;
        scores.insert(v, Some(sign * gamma));
    }
    Ok(MarginProxy { scores, orientation })
}

/// Serializes edge scores as CSV `u,v,score`.
pub fn edge_scores_csv(scores: &[(usize, usize, f64)]) -> String {
    let mut out = String::from("u,v,score\n");
    for (u, v, s) in scores {
        out.push_str(&format!("{u},{v},{s}\n"));
    }
    out
}

/// Serializes feature scores as CSV `feature_id,score`.
pub fn feature_scores_csv(scores: &[(usize, f64)]) -> String {
    let mut out = String::from("feature_id,score\n");
    for (id, s) in scores {
        out.push_str(&format!("{id},{s}\n"));
    }
    out
}

#[cfg(test)]
mod tests;
