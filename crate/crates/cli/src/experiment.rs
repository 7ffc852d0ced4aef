//! End-to-end experiment runner: one config in, a fully hashed artifact
//! directory out. Reruns with the same config produce byte-identical
//! deterministic outputs (models, reports, aggregate table) at any worker
//! count.

use std::fmt::Write as _;

use mgu_core::eval::{self, EvalReport};
use mgu_core::gnn::{save_model, train, ModelParams, TrainConfig};
use mgu_core::graph::{Graph, RequestKind};
use mgu_core::mem::Estimator;
use mgu_core::rng::derive_seed;
use mgu_core::unlearn::{
    unlearn_ablation, unlearn_mgu, unlearn_retrain, AblationVariant, UnlearnConfig,
};
use mgu_core::Result;

use crate::commands::{build_request, evaluate_request, mem_table};
use crate::config::{ExperimentConfig, Setting};
use crate::manifest::OutDir;

/// Above this many train nodes the runner switches to the subsample
/// estimator when `auto_estimator` is on.
const AUTO_SUBSAMPLE_THRESHOLD: usize = 400;

/// Unlearning methods compared by the runner, in output order.
const METHODS: [(&str, Option<AblationVariant>); 3] = [
    ("mgu", None),
    ("no_margin", Some(AblationVariant::NoMargin)),
    ("no_distill", Some(AblationVariant::NoDistill)),
];

/// Difficulty settings swept by the runner, in output order.
const SETTINGS: [Setting; 3] = [Setting::Easy, Setting::Random, Setting::Hard];

struct Cell {
    method: &'static str,
    setting: &'static str,
    reports: Vec<EvalReport>,
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

fn run_method(
    method: Option<AblationVariant>,
    original: &ModelParams,
    graph: &Graph,
    request: &mgu_core::graph::UnlearnRequest,
    cfg: &UnlearnConfig,
) -> Result<ModelParams> {
    match method {
        None => unlearn_mgu(original, graph, request, cfg),
        Some(variant) => unlearn_ablation(original, graph, request, cfg, variant),
    }
}

fn aggregate_csv(cells: &[Cell]) -> String {
    let mut csv = String::from(
        "method,setting,n_seeds,tou_mean,tou_stdev,diff_deleted_mean,diff_remaining_mean,diff_test_mean\n",
    );
    for cell in cells {
        let pick = |f: fn(&EvalReport) -> f64| -> Vec<f64> { cell.reports.iter().map(f).collect() };
        let (tou_mean, tou_stdev) = mean_stdev(&pick(|r| r.tou));
        let (dd, _) = mean_stdev(&pick(|r| r.diff_deleted));
        let (dr, _) = mean_stdev(&pick(|r| r.diff_remaining));
        let (dt, _) = mean_stdev(&pick(|r| r.diff_test));
        writeln!(
            csv,
            "{},{},{},{},{},{},{},{}",
            cell.method, cell.setting, cell.reports.len(), tou_mean, tou_stdev, dd, dr, dt
        )
        .expect("string write");
    }
    csv
}

/// `experiment`: the full pipeline. Any stage failure aborts with the stage
/// named in the log; artifacts written before the failure are kept.
pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<()> {
    let stage = |name: &str| log::info!("stage: {name}");
    let fail = |name: &str, e: &mgu_core::Error| log::error!("stage {name} failed: {e}");
    macro_rules! run_stage {
        ($name:expr, $body:expr) => {{
            stage($name);
            match $body {
                Ok(v) => v,
                Err(e) => {
                    fail($name, &e);
                    return Err(e);
                }
            }
        }};
    }

    let mut out = OutDir::create(&cfg.out_dir)?;

    let graph = run_stage!("load", cfg.load_graph());
    out.write("graph.json", graph.to_json().as_bytes())?;

    let original = run_stage!("train", train(&graph, &cfg.train));
    out.write("model_original.json", save_model(&original).as_bytes())?;

    // Estimator choice: honor the config unless auto mode decides the train
    // set is too large for exact leave-one-out.
    let mut mem_cfg = cfg.clone();
    if cfg.auto_estimator && graph.train_nodes().len() > AUTO_SUBSAMPLE_THRESHOLD {
        mem_cfg.mem.estimator = Estimator::Subsample;
        log::info!(
            "auto estimator: {} train nodes > {AUTO_SUBSAMPLE_THRESHOLD}, using subsample",
            graph.train_nodes().len()
        );
    }
    let table = run_stage!("memscore", mem_table(&graph, &mem_cfg));
    out.write("mem.csv", table.to_csv().as_bytes())?;
    out.write("mem_meta.json", table.meta_json().as_bytes())?;
    let defined: Vec<f64> = table.node_scores().values().filter_map(|s| *s).collect();
    out.write(
        "mem_hist.svg",
        eval::histogram_svg(&defined, "memorization scores").as_bytes(),
    )?;

    let sets = run_stage!("sample", crate::commands::difficulty_sets(&graph, &table, cfg));
    out.write("sets.json", serde_json::to_string_pretty(&sets).unwrap().as_bytes())?;

    let contrast = eval::centrality_contrast(&graph, &sets);
    let mut contrast_csv = String::from("metric,low_mem_mean,high_mem_mean,ratio\n");
    for row in &contrast {
        writeln!(contrast_csv, "{},{},{},{}", row.metric, row.easy_mean, row.hard_mean, row.ratio)
            .expect("string write");
    }
    out.write("centrality.csv", contrast_csv.as_bytes())?;

    let mia_seed = derive_seed(cfg.split.seed, 0x31A);
    let mut cells: Vec<Cell> = Vec::new();
    for setting in SETTINGS {
        if cfg.task == RequestKind::Edge && matches!(setting, Setting::Local | Setting::Distant) {
            continue;
        }
        let request =
            run_stage!("request", build_request(cfg, setting, &graph, &sets, &table));
        out.write(
            &format!("requests/{}.json", setting.label()),
            serde_json::to_string_pretty(&request).unwrap().as_bytes(),
        )?;
        let remaining = graph.apply_request(&request)?;

        let mut per_method: Vec<Cell> = METHODS
            .iter()
            .map(|&(name, _)| Cell { method: name, setting: setting.label(), reports: Vec::new() })
            .collect();

        for &seed in &cfg.seeds {
            let retrain_cfg = TrainConfig { seed, ..cfg.train.clone() };
            let retrained =
                run_stage!("retrain", unlearn_retrain(&graph, &request, &retrain_cfg));
            out.write(
                &format!("models/{}_retrain_seed{}.json", setting.label(), seed),
                save_model(&retrained).as_bytes(),
            )?;

            for (idx, &(name, variant)) in METHODS.iter().enumerate() {
                let ucfg = UnlearnConfig { seed, ..cfg.unlearn.clone() };
                let student = run_stage!(
                    "unlearn",
                    run_method(variant, &original, &graph, &request, &ucfg)
                );
                out.write(
                    &format!("models/{}_{}_seed{}.json", setting.label(), name, seed),
                    save_model(&student).as_bytes(),
                )?;
                let report = run_stage!(
                    "evaluate",
                    evaluate_request(&student, &retrained, &graph, &remaining, &request, mia_seed)
                );
                out.write(
                    &format!("reports/{}_{}_seed{}.json", setting.label(), name, seed),
                    serde_json::to_string_pretty(&report).unwrap().as_bytes(),
                )?;
                per_method[idx].reports.push(report);
            }
        }
        cells.extend(per_method);
    }

    out.write("aggregate.csv", aggregate_csv(&cells).as_bytes())?;
    out.finish()?;
    log::info!("experiment complete: {} cells", cells.len());
    Ok(())
}
