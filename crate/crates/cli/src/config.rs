//! Experiment configuration: a single JSON document that drives every
//! subcommand, with command-line flags taking precedence.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use mgu_core::gnn::TrainConfig;
use mgu_core::graph::{gen_sbm, load_csv, load_linqs, Graph, RequestKind, SbmSpec};
use mgu_core::mem::MemConfig;
use mgu_core::unlearn::UnlearnConfig;
use mgu_core::{Error, Result};

/// Where the graph comes from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetSource {
    /// Synthetic stochastic block model.
    Sbm { spec: SbmSpec },
    /// Node/edge CSV pair (`id,label,f0..` and `src,dst`).
    Csv { nodes: PathBuf, edges: PathBuf },
    /// Citation-network format (`.content` / `.cites`).
    Linqs { content: PathBuf, cites: PathBuf },
    /// A previously serialized graph JSON (e.g. from `gen-sbm`).
    GraphJson { path: PathBuf },
}

/// Train/test split parameters, applied when the dataset carries no masks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_frac: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self { train_frac: 0.8, seed: 0 }
    }
}

/// Which difficulty stratum the deletion request is drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    Easy,
    Random,
    Hard,
    Local,
    Distant,
}

impl Setting {
    /// The difficulty-set name this setting selects.
    pub fn set_name(self) -> &'static str {
        match self {
            Setting::Easy => "low_mem",
            Setting::Random => "random",
            Setting::Hard => "high_mem",
            Setting::Local => "local",
            Setting::Distant => "distant",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Setting::Easy => "easy",
            Setting::Random => "random",
            Setting::Hard => "hard",
            Setting::Local => "local",
            Setting::Distant => "distant",
        }
    }
}

fn default_task() -> RequestKind {
    RequestKind::Node
}

fn default_setting() -> Setting {
    Setting::Random
}

fn default_ratio() -> f64 {
    0.05
}

fn default_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_true() -> bool {
    true
}

/// The full pipeline configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub mem: MemConfig,
    #[serde(default)]
    pub unlearn: UnlearnConfig,
    /// What the deletion request targets.
    #[serde(default = "default_task")]
    pub task: RequestKind,
    #[serde(default = "default_setting")]
    pub setting: Setting,
    /// Fraction of the train set (or edge set) to delete.
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    /// One full unlearn/retrain/evaluate cycle per seed.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    /// Let the experiment runner pick the estimator by train-set size
    /// (subsample above 400 train nodes, exact leave-one-out below).
    #[serde(default = "default_true")]
    pub auto_estimator: bool,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.ratio) || self.ratio == 0.0 {
            return Err(Error::Config(format!("ratio {} outside (0, 0.5]", self.ratio)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must not be empty".into()));
        }
        for path in self.input_paths() {
            if !path.exists() {
                return Err(Error::Config(format!("dataset path {} does not exist", path.display())));
            }
        }
        Ok(())
    }

    fn input_paths(&self) -> Vec<&Path> {
        match &self.dataset {
            DatasetSource::Sbm { .. } => Vec::new(),
            DatasetSource::Csv { nodes, edges } => vec![nodes, edges],
            DatasetSource::Linqs { content, cites } => vec![content, cites],
            DatasetSource::GraphJson { path } => vec![path],
        }
    }

    /// Loads or generates the graph and ensures it carries split masks.
    pub fn load_graph(&self) -> Result<Graph> {
        let graph = match &self.dataset {
            DatasetSource::Sbm { spec } => gen_sbm(spec)?,
            DatasetSource::Csv { nodes, edges } => {
                let (g, stats) = load_csv(nodes, edges)?;
                log::info!("loaded csv dataset: {} nodes, {:?}", g.num_nodes(), stats);
                g
            }
            DatasetSource::Linqs { content, cites } => {
                let (g, stats) = load_linqs(content, cites)?;
                log::info!("loaded citation dataset: {} nodes, {:?}", g.num_nodes(), stats);
                g
            }
            DatasetSource::GraphJson { path } => {
                let text = std::fs::read_to_string(path)?;
                Graph::from_json(&text)?
            }
        };
        if graph.train_nodes().is_empty() {
            graph.split(self.split.train_frac, self.split.seed)
        } else {
            Ok(graph)
        }
    }
}
