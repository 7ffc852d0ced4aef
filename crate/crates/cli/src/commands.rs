//! One function per pipeline-stage subcommand.

use std::path::Path;

use mgu_core::eval::{self, DifficultySets, EvalReport};
use mgu_core::gnn::{accuracy, load_model, save_model, train, ModelParams};
use mgu_core::graph::{gen_sbm, Graph, RequestKind, UnlearnRequest};
use mgu_core::mem::{
    edge_difficulty, edge_scores_csv, estimate_mem_exact, estimate_mem_subsample,
    feature_difficulty, feature_scores_csv, Estimator, MemTable, UnscoredEndpoint,
};
use mgu_core::rng::{derive_seed, SplitMix64};
use mgu_core::unlearn::{unlearn_mgu, UnlearnConfig};
use mgu_core::{Error, Result};

use crate::config::{DatasetSource, ExperimentConfig, Setting};
use crate::manifest::OutDir;

/// Report serialization format.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

/// Runs the configured memorization estimator.
pub fn mem_table(graph: &Graph, cfg: &ExperimentConfig) -> Result<MemTable> {
    match cfg.mem.estimator {
        Estimator::ExactLoo => estimate_mem_exact(graph, &cfg.mem, &cfg.train),
        Estimator::Subsample => estimate_mem_subsample(graph, &cfg.mem, &cfg.train),
    }
}

/// Builds the five difficulty sets at the configured deletion ratio.
pub fn difficulty_sets(
    graph: &Graph,
    table: &MemTable,
    cfg: &ExperimentConfig,
) -> Result<DifficultySets> {
    eval::build_difficulty_sets(
        &table.node_scores(),
        graph,
        &graph.test_nodes(),
        cfg.ratio * 100.0,
        cfg.split.seed,
    )
}

/// Turns (task, setting, ratio) into a concrete deletion request.
pub fn build_request(
    cfg: &ExperimentConfig,
    setting: Setting,
    graph: &Graph,
    sets: &DifficultySets,
    table: &MemTable,
) -> Result<UnlearnRequest> {
    let node_set = sets.by_name(setting.set_name()).expect("known set name").to_vec();
    let request = match cfg.task {
        RequestKind::Node => UnlearnRequest::nodes(node_set),
        RequestKind::Feature => UnlearnRequest::features(node_set),
        RequestKind::Edge => {
            let mut ranked =
                edge_difficulty(graph, &table.node_scores(), UnscoredEndpoint::Zero);
            let count = ((cfg.ratio * ranked.len() as f64).ceil() as usize).min(ranked.len());
            if count == 0 {
                return Err(Error::Config("edge request would be empty".into()));
            }
            let chosen: Vec<(usize, usize)> = match setting {
                Setting::Easy => {
                    ranked.sort_by(|a, b| a.2.total_cmp(&b.2).then((a.0, a.1).cmp(&(b.0, b.1))));
                    ranked.iter().take(count).map(|&(u, v, _)| (u, v)).collect()
                }
                Setting::Hard => {
                    ranked.sort_by(|a, b| b.2.total_cmp(&a.2).then((a.0, a.1).cmp(&(b.0, b.1))));
                    ranked.iter().take(count).map(|&(u, v, _)| (u, v)).collect()
                }
                Setting::Random => {
                    let mut edges: Vec<(usize, usize)> =
                        ranked.iter().map(|&(u, v, _)| (u, v)).collect();
                    SplitMix64::new(derive_seed(cfg.split.seed, 0xED6E)).shuffle(&mut edges);
                    edges.into_iter().take(count).collect()
                }
                Setting::Local | Setting::Distant => {
                    return Err(Error::Config(
                        "edge tasks support the easy, random and hard settings only".into(),
                    ));
                }
            };
            UnlearnRequest::edges(chosen)
        }
    };
    request.validate(graph)?;
    Ok(request)
}

/// Evaluates one unlearned/retrained model pair for any request kind.
pub fn evaluate_request(
    params_u: &ModelParams,
    params_r: &ModelParams,
    graph_full: &Graph,
    graph_remaining: &Graph,
    request: &UnlearnRequest,
    mia_seed: u64,
) -> Result<EvalReport> {
    match request.kind {
        RequestKind::Node => eval::tou_node(params_u, params_r, graph_full, graph_remaining, request),
        RequestKind::Edge => {
            eval::tou_edge(params_u, params_r, graph_full, graph_remaining, request, mia_seed)
        }
        RequestKind::Feature => {
            eval::tou_feat(params_u, params_r, graph_full, graph_remaining, request)
        }
    }
}

/// Renders a report in the requested format.
pub fn render_report(report: &EvalReport, format: Format) -> String {
    match format {
        Format::Json => serde_json::to_string_pretty(report).expect("report serialization"),
        Format::Csv => {
            let kind = match report.kind {
                RequestKind::Node => "node",
                RequestKind::Edge => "edge",
                RequestKind::Feature => "feature",
            };
            format!(
                "kind,diff_deleted,diff_remaining,diff_test,tou\n{kind},{},{},{},{}\n",
                report.diff_deleted, report.diff_remaining, report.diff_test, report.tou
            )
        }
    }
}

/// `gen-sbm`: generates the configured synthetic graph and writes it.
pub fn cmd_gen_sbm(cfg: &ExperimentConfig) -> Result<()> {
    let DatasetSource::Sbm { spec } = &cfg.dataset else {
        return Err(Error::Config("gen-sbm needs a dataset of kind `sbm`".into()));
    };
    let graph = gen_sbm(spec)?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    out.write("graph.json", graph.to_json().as_bytes())?;
    out.finish()?;
    log::info!("wrote graph with {} nodes, {} edges", graph.num_nodes(), graph.num_edges());
    Ok(())
}

/// `train`: trains the original model and writes it with a summary.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<()> {
    let graph = cfg.load_graph()?;
    let params = train(&graph, &cfg.train)?;
    let train_acc = accuracy(&params, &graph, &graph.train_nodes(), None)?;
    let test_acc = accuracy(&params, &graph, &graph.test_nodes(), None)?;
    log::info!("trained: train accuracy {train_acc:.4}, test accuracy {test_acc:.4}");

    let mut out = OutDir::create(&cfg.out_dir)?;
    out.write("model.json", save_model(&params).as_bytes())?;
    let summary = serde_json::json!({
        "train_accuracy": train_acc,
        "test_accuracy": test_acc,
        "nodes": graph.num_nodes(),
        "edges": graph.num_edges(),
        "classes": graph.num_classes(),
    });
    out.write("summary.json", summary.to_string().as_bytes())?;
    out.finish()?;
    Ok(())
}

/// `memscore`: estimates per-node memorization and writes the table.
pub fn cmd_memscore(cfg: &ExperimentConfig) -> Result<()> {
    let graph = cfg.load_graph()?;
    let table = mem_table(&graph, cfg)?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    out.write("mem.csv", table.to_csv().as_bytes())?;
    out.write("mem_meta.json", table.meta_json().as_bytes())?;
    out.finish()?;
    Ok(())
}

/// `difficulty`: memorization table plus the task-level difficulty scores.
pub fn cmd_difficulty(cfg: &ExperimentConfig) -> Result<()> {
    let graph = cfg.load_graph()?;
    let table = mem_table(&graph, cfg)?;
    let scores = table.node_scores();
    let mut out = OutDir::create(&cfg.out_dir)?;
    out.write("mem.csv", table.to_csv().as_bytes())?;
    match cfg.task {
        RequestKind::Node => {
            // Node difficulty is the mem column itself; nothing extra.
        }
        RequestKind::Edge => {
            let ranked = edge_difficulty(&graph, &scores, UnscoredEndpoint::Zero);
            out.write("edge_scores.csv", edge_scores_csv(&ranked).as_bytes())?;
        }
        RequestKind::Feature => {
            // Feature rows are owned by their node: one owner set per train node.
            let owners: Vec<(usize, Vec<usize>)> =
                graph.train_nodes().into_iter().map(|v| (v, vec![v])).collect();
            let ranked = feature_difficulty(&graph, &scores, &owners)?;
            out.write("feature_scores.csv", feature_scores_csv(&ranked).as_bytes())?;
        }
    }
    out.finish()?;
    Ok(())
}

/// `sample`: builds the five difficulty-stratified deletion sets.
pub fn cmd_sample(cfg: &ExperimentConfig) -> Result<()> {
    let graph = cfg.load_graph()?;
    let table = mem_table(&graph, cfg)?;
    let sets = difficulty_sets(&graph, &table, cfg)?;
    let mut out = OutDir::create(&cfg.out_dir)?;
    out.write("sets.json", serde_json::to_string_pretty(&sets).unwrap().as_bytes())?;
    out.finish()?;
    Ok(())
}

/// `unlearn`: builds the configured request and runs adaptive unlearning.
/// The original model comes from `model_path` when given, else is trained
/// fresh.
pub fn cmd_unlearn(cfg: &ExperimentConfig, model_path: Option<&Path>) -> Result<()> {
    let graph = cfg.load_graph()?;
    let original = match model_path {
        Some(p) => load_model(&std::fs::read_to_string(p)?)?,
        None => train(&graph, &cfg.train)?,
    };
    let table = mem_table(&graph, cfg)?;
    let sets = difficulty_sets(&graph, &table, cfg)?;
    let request = build_request(cfg, cfg.setting, &graph, &sets, &table)?;

    let seed = cfg.seeds[0];
    let ucfg = UnlearnConfig { seed, ..cfg.unlearn.clone() };
    let started = std::time::Instant::now();
    let student = unlearn_mgu(&original, &graph, &request, &ucfg)?;
    let elapsed = started.elapsed().as_secs_f64();
    log::info!("unlearned in {elapsed:.3}s");

    let mut out = OutDir::create(&cfg.out_dir)?;
    out.write("request.json", serde_json::to_string_pretty(&request).unwrap().as_bytes())?;
    out.write("model_unlearned.json", save_model(&student).as_bytes())?;
    out.write(
        "timing.json",
        serde_json::json!({ "unlearn_seconds": elapsed }).to_string().as_bytes(),
    )?;
    out.finish()?;
    Ok(())
}

/// `evaluate`: scores an unlearned model against a retrained one.
pub fn cmd_evaluate(
    cfg: &ExperimentConfig,
    unlearned: &Path,
    retrained: &Path,
    request_path: &Path,
    format: Format,
) -> Result<()> {
    let graph = cfg.load_graph()?;
    let params_u = load_model(&std::fs::read_to_string(unlearned)?)?;
    let params_r = load_model(&std::fs::read_to_string(retrained)?)?;
    let request: UnlearnRequest = serde_json::from_str(&std::fs::read_to_string(request_path)?)?;
    request.validate(&graph)?;
    let remaining = graph.apply_request(&request)?;
    let mia_seed = derive_seed(cfg.split.seed, 0x31A);
    let report = evaluate_request(&params_u, &params_r, &graph, &remaining, &request, mia_seed)?;

    let rendered = render_report(&report, format);
    let name = if format == Format::Csv { "report.csv" } else { "report.json" };
    let mut out = OutDir::create(&cfg.out_dir)?;
    out.write(name, rendered.as_bytes())?;
    out.finish()?;
    println!("tou {}", report.tou);
    Ok(())
}
