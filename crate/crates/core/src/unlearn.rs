//! Adaptive unlearning: prototype margins, margin-based forgetting,
//! adaptive-temperature distillation, the retraining gold standard and the
//! two ablation variants.
//!
//! The student starts at the frozen original model and optimizes
//! `lambda * L_margin + L_distill` on the remaining graph for a handful of
//! full-batch Adam steps. The margin loss pushes the deleted elements'
//! prototype margins below learnable targets initialized from the teacher;
//! the distillation loss preserves the teacher's behavior on the remaining
//! train nodes with per-node temperatures derived from how much the
//! deletion shifted the teacher's own posteriors.

use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::gnn::{
    self, forward, Gradients, ModelParams, Optimizer, ParamOptimizer, TrainConfig,
};
use crate::graph::{Graph, RequestKind, UnlearnRequest};
use crate::linalg::{
    kl_divergence, sigmoid, softmax_backward_row, softmax_in_place, softplus, Matrix, KL_EPS,
};
use crate::{Error, Result};

/// Whether the margin targets receive gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauMode {
    Frozen,
    Learnable,
}

/// How the per-node temperature maps the teacher's posterior shift.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemperatureMode {
    /// `T = 1 + (t_max - 1) * sigmoid(KL)`; an unaffected node sits at the
    /// midpoint `1 + (t_max - 1) / 2`.
    EquationAsWritten,
    /// `T = 1 + (t_max - 1) * (2 * sigmoid(KL) - 1)`; an unaffected node
    /// gets `T = 1`.
    LiteralProse,
}

/// Unlearning hyperparameters. Fields missing from a JSON document take
/// their default values.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct UnlearnConfig {
    /// Margin-loss weight.
    pub lambda: f64,
    pub t_max: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub tau_mode: TauMode,
    /// Pull of a learnable tau toward its initialization.
    pub tau_anchor_mu: f64,
    pub temperature_mode: TemperatureMode,
    pub seed: u64,
}

impl Default for UnlearnConfig {
    fn default() -> Self {
        Self {
            lambda: 0.55,
            t_max: 8.0,
            epochs: 20,
            learning_rate: 0.01,
            tau_mode: TauMode::Learnable,
            tau_anchor_mu: 1.0,
            temperature_mode: TemperatureMode::EquationAsWritten,
            seed: 0,
        }
    }
}

impl UnlearnConfig {
    fn validate(&self) -> Result<()> {
        if self.lambda < 0.0 {
            return Err(Error::Config("lambda must be >= 0".into()));
        }
        if self.t_max <= 1.0 {
            return Err(Error::Config("t_max must be > 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.tau_anchor_mu < 0.0 {
            return Err(Error::Config("tau_anchor_mu must be >= 0".into()));
        }
        Ok(())
    }
}

/// Ablation variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationVariant {
    /// Distillation only.
    NoMargin,
    /// Margin loss only.
    NoDistill,
}

/// Per-class mean of the training nodes' posterior rows. Errors on a class
/// with no training nodes.
pub fn prototypes(probs: &Matrix, graph: &Graph) -> Result<Matrix> {
    let classes = graph.num_classes();
    let mut protos = Matrix::zeros(classes, probs.cols);
    let mut counts = vec![0usize; classes];
    for v in graph.train_nodes() {
        let y = graph.label(v).ok_or(Error::Unlabeled(v))?;
        counts[y] += 1;
        let row = probs.row(v);
        for (p, &h) in protos.row_mut(y).iter_mut().zip(row) {
            *p += h;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count == 0 {
            return Err(Error::EmptyClass(c));
        }
        let inv = 1.0 / count as f64;
        for p in protos.row_mut(c) {
            *p *= inv;
        }
    }
    Ok(protos)
}

/// Prototype margin: average KL distance to other-class prototypes minus the
/// KL distance to the true-class prototype.
pub fn margin(h: &[f64], y: usize, protos: &Matrix) -> Result<f64> {
    let classes = protos.rows;
    if classes < 2 {
        return Err(Error::Config("margin undefined for a single class".into()));
    }
    let mut others = 0.0;
    for c in 0..classes {
        if c != y {
            others += kl_divergence(h, protos.row(c));
        }
    }
    Ok(others / (classes - 1) as f64 - kl_divergence(h, protos.row(y)))
}

/// Per-node distillation temperatures for the remaining graph's train set.
pub fn temperatures(
    params_original: &ModelParams,
    graph_full: &Graph,
    graph_remaining: &Graph,
    t_max: f64,
    mode: TemperatureMode,
) -> Vec<(usize, f64)> {
    let on_full = forward(params_original, graph_full);
    let on_remaining = forward(params_original, graph_remaining);
    graph_remaining
        .train_nodes()
        .into_iter()
        .map(|v| {
            let kl = kl_divergence(on_remaining.probs.row(v), on_full.probs.row(v));
            let s = sigmoid(kl);
            let t = match mode {
                TemperatureMode::EquationAsWritten => 1.0 + (t_max - 1.0) * s,
                TemperatureMode::LiteralProse => 1.0 + (t_max - 1.0) * (2.0 * s - 1.0),
            };
            (v, t)
        })
        .collect()
}

/// Frozen inputs of one unlearning run.
pub struct UnlearnContext<'a> {
    pub original: &'a ModelParams,
    pub graph_full: &'a Graph,
    pub graph_remaining: Graph,
    pub request: UnlearnRequest,
    /// Teacher prototypes on the remaining graph (used for tau init).
    pub prototypes: Matrix,
    /// Margin target nodes, ascending.
    pub targets: Vec<usize>,
    pub target_labels: Vec<usize>,
    /// Teacher margins on the remaining graph: the initial tau values.
    pub tau_init: Vec<f64>,
    /// Remaining-graph train nodes the distillation sum runs over.
    pub distill_nodes: Vec<usize>,
    /// Temperatures aligned with `distill_nodes`.
    pub temperatures: Vec<f64>,
    /// `softmax(z_o / T)` rows aligned with `distill_nodes`.
    teacher_soft: Matrix,
}

/// The node lift of a deletion set: the nodes whose margins the forgetting
/// loss drives down. Node requests target the deleted nodes; edge/feature
/// requests target the train nodes incident to the deleted edges / owning
/// the deleted features.
pub fn margin_targets(graph_full: &Graph, request: &UnlearnRequest) -> Vec<usize> {
    let set: BTreeSet<usize> = match request.kind {
        RequestKind::Node => request.node_ids.iter().copied().collect(),
        RequestKind::Feature => request.node_ids.iter().copied().collect(),
        RequestKind::Edge => request
            .edge_pairs
            .iter()
            .flat_map(|&(u, v)| [u, v])
            .filter(|&v| graph_full.is_train(v))
            .collect(),
    };
    set.into_iter().collect()
}

impl<'a> UnlearnContext<'a> {
    pub fn build(
        params_original: &'a ModelParams,
        graph_full: &'a Graph,
        request: &UnlearnRequest,
        cfg: &UnlearnConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        request.validate(graph_full)?;
        let graph_remaining = graph_full.apply_request(request)?;
        let targets = margin_targets(graph_full, request);
        let target_labels = targets
            .iter()
            .map(|&v| graph_full.label(v).ok_or(Error::Unlabeled(v)))
            .collect::<Result<Vec<_>>>()?;

        let teacher_remaining = forward(params_original, &graph_remaining);
        let protos = prototypes(&teacher_remaining.probs, &graph_remaining)?;
        let tau_init = targets
            .iter()
            .zip(&target_labels)
            .map(|(&v, &y)| margin(teacher_remaining.probs.row(v), y, &protos))
            .collect::<Result<Vec<_>>>()?;

        let temps = temperatures(
            params_original,
            graph_full,
            &graph_remaining,
            cfg.t_max,
            cfg.temperature_mode,
        );
        let distill_nodes: Vec<usize> = temps.iter().map(|&(v, _)| v).collect();
        let temperatures: Vec<f64> = temps.iter().map(|&(_, t)| t).collect();
        let mut teacher_soft = Matrix::zeros(distill_nodes.len(), graph_full.num_classes());
        for (i, (&v, &t)) in distill_nodes.iter().zip(&temperatures).enumerate() {
            let row = teacher_soft.row_mut(i);
            for (r, &z) in row.iter_mut().zip(teacher_remaining.logits.row(v)) {
                *r = z / t;
            }
            softmax_in_place(row);
        }

        Ok(Self {
            original: params_original,
            graph_full,
            graph_remaining,
            request: request.clone(),
            prototypes: protos,
            targets,
            target_labels,
            tau_init,
            distill_nodes,
            temperatures,
            teacher_soft,
        })
    }
}

/// A loss value with its gradients.
pub struct LossGrad {
    pub value: f64,
    pub grads: Gradients,
    /// Gradient on the margin targets; empty when tau is frozen or the loss
    /// has no tau dependence.
    pub tau_grad: Vec<f64>,
}

fn zero_grads(params: &ModelParams) -> Gradients {
    Gradients {
        w1: Matrix::zeros(params.w1.rows, params.w1.cols),
        b1: vec![0.0; params.b1.len()],
        w2: Matrix::zeros(params.w2.rows, params.w2.cols),
        b2: vec![0.0; params.b2.len()],
    }
}

/// Adds `scale * dKL(h || p)/dh` into `grad_h` and `scale * dKL(h || p)/dp`
/// into `grad_p`, consistent with the floored [`kl_divergence`].
fn add_kl_grads(h: &[f64], p: &[f64], scale: f64, grad_h: &mut [f64], grad_p: &mut [f64]) {
    for j in 0..h.len() {
        grad_h[j] += scale * ((h[j] + KL_EPS).ln() - (p[j] + KL_EPS).ln() + h[j] / (h[j] + KL_EPS));
        grad_p[j] += scale * (-h[j] / (p[j] + KL_EPS));
    }
}

/// Margin-based forgetting loss with gradients through the student
/// posteriors and the student-recomputed prototypes.
///
/// Tau comes from `params_u.tau` when present (aligned with `ctx.targets`),
/// else from `ctx.tau_init`. With `tau_mode = learnable` the value includes
/// the anchor penalty `(mu / |targets|) * sum (tau - tau0)^2` and `tau_grad`
/// is populated.
pub fn margin_loss(
    params_u: &ModelParams,
    ctx: &UnlearnContext,
    cfg: &UnlearnConfig,
) -> Result<LossGrad> {
    let tau = params_u.tau.as_ref().unwrap_or(&ctx.tau_init);
    if tau.len() != ctx.targets.len() {
        return Err(Error::Config(format!(
            "tau length {} does not match {} margin targets",
            tau.len(),
            ctx.targets.len()
        )));
    }
    if ctx.targets.is_empty() {
        return Ok(LossGrad { value: 0.0, grads: zero_grads(params_u), tau_grad: Vec::new() });
    }

    let post = forward(params_u, &ctx.graph_remaining);
    let protos = prototypes(&post.probs, &ctx.graph_remaining)?;
    let classes = protos.rows;
    let inv_targets = 1.0 / ctx.targets.len() as f64;
    let inv_others = 1.0 / (classes - 1) as f64;

    let mut value = 0.0;
    let mut grad_probs = Matrix::zeros(post.probs.rows, post.probs.cols);
    let mut grad_protos = Matrix::zeros(classes, classes);
    let mut tau_grad = vec![0.0; tau.len()];

    for (i, (&v, &y)) in ctx.targets.iter().zip(&ctx.target_labels).enumerate() {
        let h = post.probs.row(v);
        let gamma = margin(h, y, &protos)?;
        let arg = gamma - tau[i];
        value += inv_targets * softplus(arg);
        let coef = inv_targets * sigmoid(arg);
        tau_grad[i] -= coef;

        // d(gamma)/d(h) and d(gamma)/d(protos), both scaled by coef.
        let mut grad_h = vec![0.0; classes];
        for c in 0..classes {
            let scale = if c == y { -coef } else { coef * inv_others };
            add_kl_grads(h, protos.row(c), scale, &mut grad_h, grad_protos.row_mut(c));
        }
        for (g, &add) in grad_probs.row_mut(v).iter_mut().zip(&grad_h) {
            *g += add;
        }
    }

    // Prototypes are per-class means over the remaining train nodes; spread
    // their gradient back onto the member rows.
    let mut counts = vec![0usize; classes];
    let train_nodes = ctx.graph_remaining.train_nodes();
    for &v in &train_nodes {
        counts[ctx.graph_remaining.label(v).expect("train node labeled")] += 1;
    }
    for &v in &train_nodes {
        let y = ctx.graph_remaining.label(v).unwrap();
        let inv = 1.0 / counts[y] as f64;
        let row = grad_probs.row_mut(v);
        for (g, &gp) in row.iter_mut().zip(grad_protos.row(y)) {
            *g += inv * gp;
        }
    }

    if cfg.tau_mode == TauMode::Learnable {
        for (i, (&t, &t0)) in tau.iter().zip(&ctx.tau_init).enumerate() {
            value += cfg.tau_anchor_mu * inv_targets * (t - t0) * (t - t0);
            tau_grad[i] += 2.0 * cfg.tau_anchor_mu * inv_targets * (t - t0);
        }
    } else {
        tau_grad.clear();
    }

    // Softmax backward per row, then through the GCN.
    let mut grad_logits = Matrix::zeros(post.probs.rows, post.probs.cols);
    for v in 0..post.probs.rows {
        softmax_backward_row(post.probs.row(v), grad_probs.row(v), grad_logits.row_mut(v));
    }
    let grads = gnn::backward(params_u, &ctx.graph_remaining, &grad_logits);
    Ok(LossGrad { value, grads, tau_grad })
}

/// Temperature-scaled self-distillation loss over the remaining train
/// nodes; the student distribution is the first KL argument.
pub fn distill_loss(params_u: &ModelParams, ctx: &UnlearnContext) -> Result<LossGrad> {
    if ctx.distill_nodes.is_empty() {
        return Ok(LossGrad { value: 0.0, grads: zero_grads(params_u), tau_grad: Vec::new() });
    }
    let post = forward(params_u, &ctx.graph_remaining);
    let classes = post.probs.cols;
    let inv = 1.0 / ctx.distill_nodes.len() as f64;

    let mut value = 0.0;
    let mut grad_logits = Matrix::zeros(post.logits.rows, classes);
    let mut student_soft = vec![0.0; classes];
    let mut grad_s = vec![0.0; classes];
    let mut grad_soft_logits = vec![0.0; classes];
    for (i, (&v, &t)) in ctx.distill_nodes.iter().zip(&ctx.temperatures).enumerate() {
        for (s, &z) in student_soft.iter_mut().zip(post.logits.row(v)) {
            *s = z / t;
        }
        softmax_in_place(&mut student_soft);
        let teacher = ctx.teacher_soft.row(i);
        value += inv * kl_divergence(&student_soft, teacher) * t * t;

        grad_s.fill(0.0);
        let mut sink = vec![0.0; classes];
        add_kl_grads(&student_soft, teacher, inv * t * t, &mut grad_s, &mut sink);
        softmax_backward_row(&student_soft, &grad_s, &mut grad_soft_logits);
        for (g, &gs) in grad_logits.row_mut(v).iter_mut().zip(&grad_soft_logits) {
            *g += gs / t;
        }
    }

    let grads = gnn::backward(params_u, &ctx.graph_remaining, &grad_logits);
    Ok(LossGrad { value, grads, tau_grad: Vec::new() })
}

fn scaled_add(into: &mut Gradients, from: &Gradients, scale: f64) {
    for (a, &b) in into.w1.data.iter_mut().zip(&from.w1.data) {
        *a += scale * b;
    }
    for (a, &b) in into.b1.iter_mut().zip(&from.b1) {
        *a += scale * b;
    }
    for (a, &b) in into.w2.data.iter_mut().zip(&from.w2.data) {
        *a += scale * b;
    }
    for (a, &b) in into.b2.iter_mut().zip(&from.b2) {
        *a += scale * b;
    }
}

/// Which loss terms an optimization run uses.
#[derive(Clone, Copy, PartialEq, Eq)]
enum LossSelect {
    Both,
    DistillOnly,
    MarginOnly,
}

fn optimize(
    params_original: &ModelParams,
    graph_full: &Graph,
    request: &UnlearnRequest,
    cfg: &UnlearnConfig,
    select: LossSelect,
) -> Result<ModelParams> {
    let ctx = UnlearnContext::build(params_original, graph_full, request, cfg)?;
    let mut student = params_original.clone();
    student.tau = Some(ctx.tau_init.clone());

    let opt_cfg = TrainConfig {
        learning_rate: cfg.learning_rate,
        optimizer: Optimizer::Adam,
        ..TrainConfig::default()
    };
    let mut opt = ParamOptimizer::new(&opt_cfg, &student);
    let mut tau_opt = crate::gnn::Adam::new(ctx.targets.len());

    for epoch in 0..cfg.epochs {
        let mut total = zero_grads(&student);
        let mut tau_grad = vec![0.0; ctx.targets.len()];
        let mut loss = 0.0;

        if select != LossSelect::DistillOnly {
            let m = margin_loss(&student, &ctx, cfg)?;
            loss += cfg.lambda * m.value;
            scaled_add(&mut total, &m.grads, cfg.lambda);
            for (t, &g) in tau_grad.iter_mut().zip(&m.tau_grad) {
                *t += cfg.lambda * g;
            }
        }
        if select != LossSelect::MarginOnly {
            let d = distill_loss(&student, &ctx)?;
            loss += d.value;
            scaled_add(&mut total, &d.grads, 1.0);
        }
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch });
        }

        opt.step(&mut student, &total);
        if cfg.tau_mode == TauMode::Learnable && select != LossSelect::DistillOnly {
            let tau = student.tau.as_mut().expect("tau present during unlearning");
            tau_opt.step(cfg.learning_rate, tau, &tau_grad);
        }
    }
    student.tau = None;
    Ok(student)
}

/// Full adaptive unlearning: optimize `lambda * L_margin + L_distill` from
/// the original parameters. Returns the unlearned model with tau stripped.
pub fn unlearn_mgu(
    params_original: &ModelParams,
    graph_full: &Graph,
    request: &UnlearnRequest,
    cfg: &UnlearnConfig,
) -> Result<ModelParams> {
    optimize(params_original, graph_full, request, cfg, LossSelect::Both)
}

/// Gold standard: fresh training on the remaining graph.
pub fn unlearn_retrain(
    graph_full: &Graph,
    request: &UnlearnRequest,
    train_cfg: &TrainConfig,
) -> Result<ModelParams> {
    request.validate(graph_full)?;
    let remaining = graph_full.apply_request(request)?;
    gnn::train(&remaining, train_cfg)
}

/// Ablation variants: distillation alone or margin loss alone.
pub fn unlearn_ablation(
    params_original: &ModelParams,
    graph_full: &Graph,
    request: &UnlearnRequest,
    cfg: &UnlearnConfig,
    variant: AblationVariant,
) -> Result<ModelParams> {
    let select = match variant {
        AblationVariant::NoMargin => LossSelect::DistillOnly,
        AblationVariant::NoDistill => LossSelect::MarginOnly,
    };
    optimize(params_original, graph_full, request, cfg, select)
}
