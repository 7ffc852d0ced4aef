//! Forgetting-quality evaluation: accuracy-difference scores against the
//! retraining gold standard, the edge membership-inference attack,
//! difficulty-stratified deletion sets, and the trend experiments
//! (generalization impact, centrality contrast, score histograms).

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use crate::gnn::{accuracy, forward, train, ModelParams, TrainConfig};
use crate::graph::{CentralityMetric, Graph, RequestKind, UnlearnRequest};
use crate::rng::{derive_seed, SplitMix64};
use crate::{Error, Result};

/// Accuracy (or attack AUC) of the unlearned and retrained models on one
/// evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetScores {
    pub unlearned: f64,
    pub retrained: f64,
}

impl SetScores {
    fn diff(self) -> f64 {
        (self.unlearned - self.retrained).abs()
    }
}

/// The three trade-off components and their product for one unlearning run.
///
/// `tou = (1 - diff_deleted) * (1 - diff_remaining) * (1 - diff_test)`
/// exactly; each diff is the absolute score difference on its set. For edge
/// requests the deleted-set scores are attack AUCs instead of accuracies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kind: RequestKind,
    pub diff_deleted: f64,
    pub diff_remaining: f64,
    pub diff_test: f64,
    pub tou: f64,
    pub deleted: SetScores,
    pub remaining: SetScores,
    pub test: SetScores,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mia_seed: Option<u64>,
}

/// `(1 - d1) * (1 - d2) * (1 - d3)`, the trade-off product.
pub fn tou_product(diff_deleted: f64, diff_remaining: f64, diff_test: f64) -> f64 {
    (1.0 - diff_deleted) * (1.0 - diff_remaining) * (1.0 - diff_test)
}

/// Absolute accuracy difference between two models on `node_set`, both
/// evaluated on `graph_eval` (labels also come from `graph_eval`).
pub fn diff_acc(
    params_u: &ModelParams,
    params_r: &ModelParams,
    graph_eval: &Graph,
    node_set: &[usize],
) -> Result<f64> {
    let a = accuracy(params_u, graph_eval, node_set, None)?;
    let b = accuracy(params_r, graph_eval, node_set, None)?;
    Ok((a - b).abs())
}

fn scores_on(
    params_u: &ModelParams,
    params_r: &ModelParams,
    graph: &Graph,
    node_set: &[usize],
) -> Result<SetScores> {
    Ok(SetScores {
        unlearned: accuracy(params_u, graph, node_set, None)?,
        retrained: accuracy(params_r, graph, node_set, None)?,
    })
}

fn assemble(
    kind: RequestKind,
    deleted: SetScores,
    remaining: SetScores,
    test: SetScores,
    mia_seed: Option<u64>,
) -> EvalReport {
    let (d1, d2, d3) = (deleted.diff(), remaining.diff(), test.diff());
    EvalReport {
        kind,
        diff_deleted: d1,
        diff_remaining: d2,
        diff_test: d3,
        tou: tou_product(d1, d2, d3),
        deleted,
        remaining,
        test,
        mia_seed,
    }
}

/// Trade-off report for a node-deletion run. The deleted nodes are
/// re-inserted for evaluation: both models score them on the full original
/// graph. Remaining-train and test sets are scored on the remaining graph.
pub fn tou_node(
    params_u: &ModelParams,
    params_r: &ModelParams,
    graph_full: &Graph,
    graph_remaining: &Graph,
    request: &UnlearnRequest,
) -> Result<EvalReport> {
    if request.kind != RequestKind::Node {
        return Err(Error::Request("tou_node expects a node request".into()));
    }
    let deleted: Vec<usize> = request.node_ids.iter().copied().collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let del = scores_on(params_u, params_r, graph_full, &deleted)?;
    let rem = scores_on(params_u, params_r, graph_remaining, &graph_remaining.train_nodes())?;
    let tst = scores_on(params_u, params_r, graph_remaining, &graph_remaining.test_nodes())?;
    Ok(assemble(RequestKind::Node, del, rem, tst, None))
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        dot += x * y;
        na += x * x;
        nb += y * y;
    }
    dot / (na.sqrt() * nb.sqrt())
}

/// Rank-statistic AUC of positive scores over negative scores; ties count
/// one half.
pub fn rank_auc(positives: &[f64], negatives: &[f64]) -> f64 {
    let mut wins = 0.0;
    for &p in positives {
        for &n in negatives {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += 0.5;
            }
        }
    }
    wins / (positives.len() * negatives.len()) as f64
}

/// Edge membership-inference attack: scores each candidate pair by the
/// cosine similarity of its endpoints' posterior rows on `graph_remaining`
/// and returns the AUC of positives (deleted edges) over negatives
/// (never-edges).
pub fn edge_mia(
    params: &ModelParams,
    graph_remaining: &Graph,
    positive_edges: &[(usize, usize)],
    negative_pairs: &[(usize, usize)],
) -> Result<f64> {
    if positive_edges.is_empty() || negative_pairs.is_empty() {
        return Err(Error::Request("edge attack needs non-empty pair sets".into()));
    }
    let probs = forward(params, graph_remaining).probs;
    let score = |&(u, v): &(usize, usize)| cosine(probs.row(u), probs.row(v));
    let pos: Vec<f64> = positive_edges.iter().map(score).collect();
    let neg: Vec<f64> = negative_pairs.iter().map(score).collect();
    Ok(rank_auc(&pos, &neg))
}

/// Samples `count` distinct non-edges of `graph` with both endpoints
/// labeled, uniformly with a seeded stream.
pub fn sample_negative_pairs(
    graph: &Graph,
    count: usize,
    seed: u64,
) -> Result<Vec<(usize, usize)>> {
    let labeled: Vec<usize> = (0..graph.num_nodes()).filter(|&v| graph.label(v).is_some()).collect();
    if labeled.len() < 2 {
        return Err(Error::Request("need at least two labeled nodes".into()));
    }
    let edges: BTreeSet<(usize, usize)> = graph
        .edge_list()
        .into_iter()
        .map(|(u, v)| (u.min(v), u.max(v)))
        .collect();
    let mut rng = SplitMix64::new(seed);
    let mut chosen = BTreeSet::new();
    let mut out = Vec::with_capacity(count);
    let mut attempts = 0usize;
    let budget = 1000 * count.max(1) + 1000;
    while out.len() < count {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Request(format!(
                "could not sample {count} labeled non-edges (graph too dense or small)"
            )));
        }
        let u = labeled[rng.next_below(labeled.len())];
        let v = labeled[rng.next_below(labeled.len())];
        if u == v {
            continue;
        }
        let pair = (u.min(v), u.max(v));
        if edges.contains(&pair) || !chosen.insert(pair) {
            continue;
        }
        out.push(pair);
    }
    Ok(out)
}

/// Trade-off report for an edge-deletion run. The deleted-set component is
/// the AUC difference of the edge attack on the deleted edges against a
/// shared seeded negative sample; remaining/test components are accuracy
/// differences over all train nodes and the test set on the remaining graph.
pub fn tou_edge(
    params_u: &ModelParams,
    params_r: &ModelParams,
    graph_full: &Graph,
    graph_remaining: &Graph,
    request: &UnlearnRequest,
    mia_seed: u64,
) -> Result<EvalReport> {
    if request.kind != RequestKind::Edge {
        return Err(Error::Request("tou_edge expects an edge request".into()));
    }
    let positives: Vec<(usize, usize)> = request
        .edge_pairs
        .iter()
        .map(|&(u, v)| (u.min(v), u.max(v)))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let negatives = sample_negative_pairs(graph_full, positives.len(), mia_seed)?;
    let del = SetScores {
        unlearned: edge_mia(params_u, graph_remaining, &positives, &negatives)?,
        retrained: edge_mia(params_r, graph_remaining, &positives, &negatives)?,
    };
    let rem = scores_on(params_u, params_r, graph_remaining, &graph_remaining.train_nodes())?;
    let tst = scores_on(params_u, params_r, graph_remaining, &graph_remaining.test_nodes())?;
    Ok(assemble(RequestKind::Edge, del, rem, tst, Some(mia_seed)))
}

/// A copy of `graph` with every edge removed: after normalization the
/// propagation operator is the identity, so each node's prediction depends
/// only on its own feature row.
fn edgeless(graph: &Graph) -> Result<Graph> {
    let train: Vec<bool> = (0..graph.num_nodes()).map(|v| graph.is_train(v)).collect();
    let test: Vec<bool> = (0..graph.num_nodes()).map(|v| graph.is_test(v)).collect();
    Graph::build(graph.features().clone(), graph.labels().to_vec(), &[])?.with_masks(train, test)
}

/// Trade-off report for a feature-deletion run. The deleted-set component
/// averages the accuracy difference on the owner nodes over two input
/// settings: original features with full structure, and original features
/// with no structure at all.
pub fn tou_feat(
    params_u: &ModelParams,
    params_r: &ModelParams,
    graph_full: &Graph,
    graph_remaining: &Graph,
    request: &UnlearnRequest,
) -> Result<EvalReport> {
    if request.kind != RequestKind::Feature {
        return Err(Error::Request("tou_feat expects a feature request".into()));
    }
    let owners: Vec<usize> =
        request.node_ids.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    let structure_free = edgeless(graph_full)?;
    let with_structure = scores_on(params_u, params_r, graph_full, &owners)?;
    let without = scores_on(params_u, params_r, &structure_free, &owners)?;
    let diff_deleted = 0.5 * (with_structure.diff() + without.diff());
    // Report per-setting means so the two scores stay inspectable.
    let del = SetScores {
        unlearned: 0.5 * (with_structure.unlearned + without.unlearned),
        retrained: 0.5 * (with_structure.retrained + without.retrained),
    };
    let rem = scores_on(params_u, params_r, graph_remaining, &graph_remaining.train_nodes())?;
    let tst = scores_on(params_u, params_r, graph_remaining, &graph_remaining.test_nodes())?;
    let (d2, d3) = (rem.diff(), tst.diff());
    Ok(EvalReport {
        kind: RequestKind::Feature,
        diff_deleted,
        diff_remaining: d2,
        diff_test: d3,
        tou: tou_product(diff_deleted, d2, d3),
        deleted: del,
        remaining: rem,
        test: tst,
        mia_seed: None,
    })
}

/// The five difficulty-stratified deletion sets, all drawn from the train
/// nodes and equally sized. Each set is stored in its ranking order, so a
/// prefix of a set is the "most extreme" fraction of it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DifficultySets {
    pub low_mem: Vec<usize>,
    pub high_mem: Vec<usize>,
    pub random: Vec<usize>,
    pub local: Vec<usize>,
    pub distant: Vec<usize>,
}

impl DifficultySets {
    pub fn by_name(&self, name: &str) -> Option<&[usize]> {
        match name {
            "low_mem" => Some(&self.low_mem),
            "high_mem" => Some(&self.high_mem),
            "random" => Some(&self.random),
            "local" => Some(&self.local),
            "distant" => Some(&self.distant),
            _ => None,
        }
    }

    pub const NAMES: [&'static str; 5] = ["low_mem", "high_mem", "random", "local", "distant"];
}

/// Builds the five deletion sets of size `ceil(n_percent/100 * |train|)`.
///
/// Low/high rank the scored train nodes by memorization (ties by node id);
/// random is a seeded uniform sample; local/distant rank by hop distance to
/// `test_set`, with unreachable nodes counting as farthest.
pub fn build_difficulty_sets(
    scores: &BTreeMap<usize, Option<f64>>,
    graph: &Graph,
    test_set: &[usize],
    n_percent: f64,
    seed: u64,
) -> Result<DifficultySets> {
    if !(0.0..=100.0).contains(&n_percent) || n_percent == 0.0 {
        return Err(Error::Config(format!("n_percent {n_percent} outside (0, 100]")));
    }
    let train = graph.train_nodes();
    if train.is_empty() {
        return Err(Error::Config("graph has no train nodes".into()));
    }
    let size = (n_percent / 100.0 * train.len() as f64).ceil() as usize;

    let mut scored: Vec<(f64, usize)> = train
        .iter()
        .filter_map(|&v| scores.get(&v).copied().flatten().map(|s| (s, v)))
        .collect();
    if scored.len() < size {
        return Err(Error::Config(format!(
            "{} scored train nodes but deletion sets need {size}",
            scored.len()
        )));
    }
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let low_mem: Vec<usize> = scored.iter().take(size).map(|&(_, v)| v).collect();
    let mut by_desc = scored.clone();
    by_desc.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let high_mem: Vec<usize> = by_desc.iter().take(size).map(|&(_, v)| v).collect();

    let mut shuffled = train.clone();
    SplitMix64::new(seed).shuffle(&mut shuffled);
    let random: Vec<usize> = shuffled.into_iter().take(size).collect();

    // Hop distance to the test set; None = unreachable = farthest.
    let dist = graph.hop_distances(test_set);
    let key = |v: usize| dist[v].map_or(u64::MAX, u64::from);
    let mut near = train.clone();
    near.sort_by_key(|&v| (key(v), v));
    let local: Vec<usize> = near.iter().take(size).copied().collect();
    let mut far = train.clone();
    far.sort_by_key(|&v| (std::cmp::Reverse(key(v)), v));
    let distant: Vec<usize> = far.iter().take(size).copied().collect();

    Ok(DifficultySets { low_mem, high_mem, random, local, distant })
}

/// One row of the generalization-impact table: test-accuracy change caused
/// by deleting a ranked prefix of one difficulty set and retraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImpactRow {
    pub set: String,
    pub ratio: f64,
    pub mean_delta: f64,
    pub stdev: f64,
}

fn mean_stdev(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Retrains after deleting, for each difficulty set and each ratio, the
/// ranked prefix of size `ceil(ratio * |train|)` (capped at the set size),
/// and reports the test-accuracy delta against the original model averaged
/// over `seeds`.
pub fn generalization_impact(
    graph: &Graph,
    sets: &DifficultySets,
    ratios: &[f64],
    train_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<Vec<ImpactRow>> {
    if seeds.is_empty() {
        return Err(Error::Config("generalization impact needs at least one seed".into()));
    }
    let test_nodes = graph.test_nodes();
    let num_train = graph.train_nodes().len();

    // Original test accuracy per seed, shared across all cells.
    let mut base = Vec::with_capacity(seeds.len());
    for &s in seeds {
        let cfg = TrainConfig { seed: s, ..train_cfg.clone() };
        let params = train(graph, &cfg)?;
        base.push(accuracy(&params, graph, &test_nodes, None)?);
    }

    let mut rows = Vec::new();
    for name in DifficultySets::NAMES {
        let set = sets.by_name(name).expect("known set name");
        for &ratio in ratios {
            if !(0.0..=1.0).contains(&ratio) {
                return Err(Error::Config(format!("ratio {ratio} outside [0, 1]")));
            }
            let k = ((ratio * num_train as f64).ceil() as usize).min(set.len());
            if k == 0 {
                rows.push(ImpactRow { set: name.into(), ratio, mean_delta: 0.0, stdev: 0.0 });
                continue;
            }
            let request = UnlearnRequest::nodes(set[..k].to_vec());
            let remaining = graph.apply_request(&request)?;
            let mut deltas = Vec::with_capacity(seeds.len());
            for (i, &s) in seeds.iter().enumerate() {
                let cfg = TrainConfig { seed: s, ..train_cfg.clone() };
                let retrained = train(&remaining, &cfg)?;
                let acc = accuracy(&retrained, &remaining, &test_nodes, None)?;
                deltas.push(acc - base[i]);
            }
            let (mean_delta, stdev) = mean_stdev(&deltas);
            rows.push(ImpactRow { set: name.into(), ratio, mean_delta, stdev });
        }
    }
    Ok(rows)
}

/// One centrality metric's mean over the easy (low-mem) and hard (high-mem)
/// sets, with their ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastRow {
    pub metric: String,
    pub easy_mean: f64,
    pub hard_mean: f64,
    pub ratio: f64,
}

fn set_mean(values: &[f64], set: &[usize]) -> f64 {
    set.iter().map(|&v| values[v]).sum::<f64>() / set.len().max(1) as f64
}

/// Mean degree / PageRank / k-core centrality of the low-mem vs high-mem
/// sets. Always three rows, in that metric order.
pub fn centrality_contrast(graph: &Graph, sets: &DifficultySets) -> Vec<ContrastRow> {
    [
        ("degree", CentralityMetric::Degree),
        ("pagerank", CentralityMetric::Pagerank),
        ("kcore", CentralityMetric::Kcore),
    ]
    .into_iter()
    .map(|(name, metric)| {
        let values = graph.centrality(metric);
        let easy_mean = set_mean(&values, &sets.low_mem);
        let hard_mean = set_mean(&values, &sets.high_mem);
        ContrastRow { metric: name.into(), easy_mean, hard_mean, ratio: easy_mean / hard_mean }
    })
    .collect()
}

const SVG_WIDTH: f64 = 600.0;
const SVG_HEIGHT: f64 = 400.0;
const SVG_BINS: usize = 30;

/// Renders a 30-bin histogram of `values` as a self-contained 600x400 SVG.
pub fn histogram_svg(values: &[f64], title: &str) -> String {
    let (left, right, top, bottom) = (45.0, 15.0, 30.0, 35.0);
    let plot_w = SVG_WIDTH - left - right;
    let plot_h = SVG_HEIGHT - top - bottom;

    let mut lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if values.is_empty() {
        lo = 0.0;
        hi = 1.0;
    } else if lo == hi {
        lo -= 0.5;
        hi += 0.5;
    }
    let span = hi - lo;
    let mut counts = [0usize; SVG_BINS];
    for &v in values {
        let bin = (((v - lo) / span * SVG_BINS as f64) as usize).min(SVG_BINS - 1);
        counts[bin] += 1;
    }
    let max_count = counts.iter().copied().max().unwrap_or(0).max(1);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {SVG_WIDTH} {SVG_HEIGHT}\">\n"
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n",
        left + plot_w / 2.0,
        title
    ));
    let bar_w = plot_w / SVG_BINS as f64;
    for (i, &c) in counts.iter().enumerate() {
        let h = plot_h * c as f64 / max_count as f64;
        let x = left + i as f64 * bar_w;
        let y = top + plot_h - h;
        svg.push_str(&format!(
            "  <rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{h:.2}\" \
             fill=\"#4878a8\"/>\n",
            bar_w - 1.0
        ));
    }
    // Axes.
    svg.push_str(&format!(
        "  <line x1=\"{left}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        top + plot_h,
        left + plot_w
    ));
    svg.push_str(&format!(
        "  <line x1=\"{left}\" y1=\"{top}\" x2=\"{left}\" y2=\"{}\" stroke=\"black\"/>\n",
        top + plot_h
    ));
    // Tick labels: x range and y max count.
    svg.push_str(&format!(
        "  <text x=\"{left}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{lo:.3}</text>\n",
        SVG_HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\" font-size=\"11\">{hi:.3}</text>\n",
        left + plot_w,
        SVG_HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" font-size=\"11\">{max_count}</text>\n",
        left - 5.0,
        top + 10.0
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Seeds for repeated evaluation runs, derived from one base seed.
pub fn derive_eval_seeds(base: u64, count: usize) -> Vec<u64> {
    (0..count).map(|i| derive_seed(base, 0xEAAE ^ i as u64)).collect()
}

#[cfg(test)]
mod tests;
