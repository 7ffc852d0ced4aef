//! Deterministic trainable 2-layer GCN with analytic gradients.
//!
//! Forward pass: `Z = A_hat * relu(A_hat * X * W1 + b1) * W2 + b2` with the
//! symmetric normalization `A_hat = D~^{-1/2} (A + I) D~^{-1/2}`. Training
//! is full batch with a fixed epoch count; all randomness comes from the
//! splitmix64 stream, all sums run in fixed index order, so `train` is a
//! pure function of `(graph, config)` down to the bit level.

mod adam;

pub use adam::Adam;

use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::linalg::{softmax_rows, Csr, Matrix};
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Weights of the 2-layer GCN plus the optional learnable margin targets.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
    /// Learnable margin targets, present only during unlearning. Aligned
    /// with the sorted margin target node list of the unlearning run.
    pub tau: Option<Vec<f64>>,
}

/// Optimizer selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Adam,
    Sgd,
}

/// Training hyperparameters. Fields missing from a JSON document take
/// their default values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 64,
            epochs: 200,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            seed: 0,
            optimizer: Optimizer::Adam,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.hidden_dim == 0 {
            return Err(Error::Config("hidden_dim must be >= 1".into()));
        }
        Ok(())
    }
}

/// Class probabilities with their companion logits.
#[derive(Debug, Clone)]
pub struct Posteriors {
    pub probs: Matrix,
    pub logits: Matrix,
}

/// Gradients of the GCN weights.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

/// Builds `A_hat = D~^{-1/2} (A + I) D~^{-1/2}`. Isolated nodes get
/// `A_hat[i][i] = 1`.
pub fn normalize_adjacency(graph: &Graph) -> Csr {
    let n = graph.num_nodes();
    let inv_sqrt: Vec<f64> =
        (0..n).map(|v| 1.0 / ((graph.degree(v) + 1) as f64).sqrt()).collect();
    let mut offsets = Vec::with_capacity(n + 1);
    let mut targets = Vec::new();
    let mut values = Vec::new();
    offsets.push(0);
    for u in 0..n {
        let mut placed_self = false;
        for &v in graph.neighbors(u) {
            if !placed_self && v > u {
                targets.push(u);
                values.push(inv_sqrt[u] * inv_sqrt[u]);
                placed_self = true;
            }
            targets.push(v);
            values.push(inv_sqrt[u] * inv_sqrt[v]);
        }
        if !placed_self {
            targets.push(u);
            values.push(inv_sqrt[u] * inv_sqrt[u]);
        }
        offsets.push(targets.len());
    }
    Csr { n, offsets, targets, values }
}

struct ForwardCache {
    pre_act: Matrix,
    hidden: Matrix,
}

fn forward_cached(params: &ModelParams, adj: &Csr, x: &Matrix) -> (Matrix, ForwardCache) {
    let mut pre_act = adj.matmul_dense(&x.matmul(&params.w1));
    pre_act.add_row_broadcast(&params.b1);
    let mut hidden = pre_act.clone();
    hidden.map_in_place(|v| v.max(0.0));
    let mut logits = adj.matmul_dense(&hidden.matmul(&params.w2));
    logits.add_row_broadcast(&params.b2);
    (logits, ForwardCache { pre_act, hidden })
}

/// Full forward pass.
pub fn forward(params: &ModelParams, graph: &Graph) -> Posteriors {
    let adj = normalize_adjacency(graph);
    forward_with_adj(params, &adj, graph.features())
}

/// Forward pass with a precomputed normalized adjacency.
pub fn forward_with_adj(params: &ModelParams, adj: &Csr, x: &Matrix) -> Posteriors {
    let (logits, _) = forward_cached(params, adj, x);
    let probs = softmax_rows(&logits);
    Posteriors { probs, logits }
}

/// Analytic reverse pass of [`forward`]: gradients of every weight given the
/// loss gradient on the logits.
pub fn backward(params: &ModelParams, graph: &Graph, grad_logits: &Matrix) -> Gradients {
    let adj = normalize_adjacency(graph);
    let (_, cache) = forward_cached(params, &adj, graph.features());
    backward_with_cache(params, &adj, graph.features(), &cache, grad_logits)
}

fn backward_with_cache(
    params: &ModelParams,
    adj: &Csr,
    x: &Matrix,
    cache: &ForwardCache,
    grad_logits: &Matrix,
) -> Gradients {
    // A_hat is symmetric, so A_hat^T * G = A_hat * G.
    let propagated = adj.matmul_dense(grad_logits);
    let grad_w2 = cache.hidden.transpose_matmul(&propagated);
    let grad_b2 = grad_logits.col_sums();

    let mut grad_hidden = propagated.matmul_transpose(&params.w2);
    for (g, &a) in grad_hidden.data.iter_mut().zip(&cache.pre_act.data) {
        if a <= 0.0 {
            *g = 0.0;
        }
    }
    let grad_b1 = grad_hidden.col_sums();
    let back_prop = adj.matmul_dense(&grad_hidden);
    let grad_w1 = x.transpose_matmul(&back_prop);

    Gradients { w1: grad_w1, b1: grad_b1, w2: grad_w2, b2: grad_b2 }
}

/// Glorot-uniform initialization from the seeded splitmix64 stream. Stream
/// order: W1 row-major, then W2 row-major; biases start at zero.
pub fn init_params(d: usize, hidden: usize, classes: usize, seed: u64) -> ModelParams {
    let mut rng = SplitMix64::new(seed);
    let mut glorot = |rows: usize, cols: usize| {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let mut m = Matrix::zeros(rows, cols);
        for v in &mut m.data {
            *v = (2.0 * rng.next_f64() - 1.0) * limit;
        }
        m
    };
    let w1 = glorot(d, hidden);
    let w2 = glorot(hidden, classes);
    ModelParams { w1, b1: vec![0.0; hidden], w2, b2: vec![0.0; classes], tau: None }
}

/// Cross-entropy loss over train nodes plus the gradient on logits.
fn train_loss(graph: &Graph, probs: &Matrix, train: &[usize]) -> (f64, Matrix) {
    let inv = 1.0 / train.len() as f64;
    let mut grad = Matrix::zeros(probs.rows, probs.cols);
    let mut loss = 0.0;
    for &v in train {
        let y = graph.label(v).expect("train node is labeled");
        let row = probs.row(v);
        loss -= (row[y] + crate::linalg::KL_EPS).ln();
        let grad_row = grad.row_mut(v);
        for (j, (&p, g)) in row.iter().zip(grad_row.iter_mut()).enumerate() {
            *g = (p - if j == y { 1.0 } else { 0.0 }) * inv;
        }
    }
    (loss * inv, grad)
}

fn sum_sq(m: &Matrix) -> f64 {
    m.data.iter().map(|x| x * x).sum()
}

/// Full-batch training for a fixed number of epochs. Deterministic: the same
/// `(graph, cfg)` yields bitwise-identical parameters.
pub fn train(graph: &Graph, cfg: &TrainConfig) -> Result<ModelParams> {
    cfg.validate()?;
    let train_nodes = graph.train_nodes();
    if train_nodes.is_empty() {
        return Err(Error::Config("graph has no train nodes".into()));
    }
    let classes = graph.num_classes();
    let adj = normalize_adjacency(graph);
    let x = graph.features();
    let mut params = init_params(graph.feature_dim(), cfg.hidden_dim, classes, cfg.seed);

    let mut opt = ParamOptimizer::new(cfg, &params);
    for epoch in 0..cfg.epochs {
        let (logits, cache) = forward_cached(&params, &adj, x);
        let probs = softmax_rows(&logits);
        let (ce, grad_logits) = train_loss(graph, &probs, &train_nodes);
        let loss = ce + cfg.weight_decay * (sum_sq(&params.w1) + sum_sq(&params.w2));
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        let mut grads = backward_with_cache(&params, &adj, x, &cache, &grad_logits);
        for (g, &w) in grads.w1.data.iter_mut().zip(&params.w1.data) {
            *g += 2.0 * cfg.weight_decay * w;
        }
        for (g, &w) in grads.w2.data.iter_mut().zip(&params.w2.data) {
            *g += 2.0 * cfg.weight_decay * w;
        }
        opt.step(&mut params, &grads);
    }
    if !(params.w1.is_finite() && params.w2.is_finite()) {
        return Err(Error::Diverged { epoch: cfg.epochs });
    }
    Ok(params)
}

/// Optimizer state over the four weight tensors.
pub struct ParamOptimizer {
    lr: f64,
    kind: Optimizer,
    adam: Option<[Adam; 4]>,
}

impl ParamOptimizer {
    pub fn new(cfg: &TrainConfig, params: &ModelParams) -> Self {
        let adam = match cfg.optimizer {
            Optimizer::Adam => Some([
                Adam::new(params.w1.data.len()),
                Adam::new(params.b1.len()),
                Adam::new(params.w2.data.len()),
                Adam::new(params.b2.len()),
            ]),
            Optimizer::Sgd => None,
        };
        Self { lr: cfg.learning_rate, kind: cfg.optimizer, adam }
    }

    pub fn step(&mut self, params: &mut ModelParams, grads: &Gradients) {
        match self.kind {
            Optimizer::Adam => {
                let [a1, a2, a3, a4] = self.adam.as_mut().unwrap();
                a1.step(self.lr, &mut params.w1.data, &grads.w1.data);
                a2.step(self.lr, &mut params.b1, &grads.b1);
                a3.step(self.lr, &mut params.w2.data, &grads.w2.data);
                a4.step(self.lr, &mut params.b2, &grads.b2);
            }
            Optimizer::Sgd => {
                for (p, g) in params.w1.data.iter_mut().zip(&grads.w1.data) {
                    *p -= self.lr * g;
                }
                for (p, g) in params.b1.iter_mut().zip(&grads.b1) {
                    *p -= self.lr * g;
                }
                for (p, g) in params.w2.data.iter_mut().zip(&grads.w2.data) {
                    *p -= self.lr * g;
                }
                for (p, g) in params.b2.iter_mut().zip(&grads.b2) {
                    *p -= self.lr * g;
                }
            }
        }
    }
}

/// Argmax prediction with ties broken by the lowest class id.
pub fn predict_row(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &p) in row.iter().enumerate().skip(1) {
        if p > row[best] {
            best = j;
        }
    }
    best
}

/// Match rate of argmax posteriors against labels over `node_set`.
///
/// Labels come from `graph`; posteriors are computed on
/// `eval_graph_override` when given, else on `graph`. The empty set is
/// defined as accuracy 1.0 so accuracy differences degenerate gracefully.
pub fn accuracy(
    params: &ModelParams,
    graph: &Graph,
    node_set: &[usize],
    eval_graph_override: Option<&Graph>,
) -> Result<f64> {
    if node_set.is_empty() {
        return Ok(1.0);
    }
    let post = forward(params, eval_graph_override.unwrap_or(graph));
    let mut hits = 0usize;
    for &v in node_set {
        let y = graph.label(v).ok_or(Error::Unlabeled(v))?;
        if predict_row(post.probs.row(v)) == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / node_set.len() as f64)
}

#[derive(Serialize, Deserialize)]
struct ModelJson {
    version: u32,
    h: usize,
    d: usize,
    #[serde(rename = "C")]
    c: usize,
    #[serde(rename = "W1")]
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    #[serde(rename = "W2")]
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    tau: Option<Vec<f64>>,
}

/// Versioned JSON; `load_model(save_model(p))` round-trips bitwise.
pub fn save_model(params: &ModelParams) -> String {
    let doc = ModelJson {
        version: 1,
        h: params.w1.cols,
        d: params.w1.rows,
        c: params.w2.cols,
        w1: params.w1.to_rows(),
        b1: params.b1.clone(),
        w2: params.w2.to_rows(),
        b2: params.b2.clone(),
        tau: params.tau.clone(),
    };
    serde_json::to_string(&doc).expect("model serialization cannot fail")
}

pub fn load_model(text: &str) -> Result<ModelParams> {
    let doc: ModelJson = serde_json::from_str(text)?;
    if doc.version != 1 {
        return Err(Error::Schema(format!("unsupported model version {}", doc.version)));
    }
    let w1 = Matrix::from_rows(doc.w1);
    let w2 = Matrix::from_rows(doc.w2);
    if w1.rows != doc.d || w1.cols != doc.h || w2.rows != doc.h || w2.cols != doc.c {
        return Err(Error::Schema("model weight shapes inconsistent with header".into()));
    }
    if doc.b1.len() != doc.h || doc.b2.len() != doc.c {
        return Err(Error::Schema("model bias shapes inconsistent with header".into()));
    }
    Ok(ModelParams { w1, b1: doc.b1, w2, b2: doc.b2, tau: doc.tau })
}
