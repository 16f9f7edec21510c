use std::path::{Path, PathBuf};

use graphxain::explain::{ExplainerConfig, NodeAggregation};
use graphxain::gcn::TrainConfig;
use graphxain::narrative::ProviderConfig;
use graphxain::{Error, Result};
use serde::{Deserialize, Serialize};

/// Everything a run needs. Loaded from JSON; command-line flags win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    /// Defaults to `<out>/checkpoint.json`.
    pub checkpoint: Option<PathBuf>,
    pub out: PathBuf,
    /// When set, overrides the split, training, explainer and sampling seeds.
    pub seed: Option<u64>,
    pub train: TrainConfig,
    pub explainer: ExplainerConfig,
    pub provider: ProviderConfig,
    pub k: usize,
    pub m: usize,
    pub expand_connected: bool,
    /// Upper bound for `expand_connected`; defaults to the whole
    /// computation subgraph.
    pub k_max: Option<usize>,
    pub aggregation: NodeAggregation,
    /// Standardise features with training-node statistics before training.
    pub standardize: bool,
    /// Number of nodes `explain` samples when no ids are given.
    pub sample: usize,
    pub dataset_description: Option<String>,
    pub dataset_description_file: Option<PathBuf>,
    pub label_names: [String; 2],
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            nodes: None,
            edges: None,
            checkpoint: None,
            out: PathBuf::from("graphxain-out"),
            seed: None,
            train: TrainConfig::default(),
            explainer: ExplainerConfig::default(),
            provider: ProviderConfig::default(),
            k: 7,
            m: 7,
            expand_connected: false,
            k_max: None,
            aggregation: NodeAggregation::Sum,
            standardize: true,
            sample: 5,
            dataset_description: None,
            dataset_description_file: None,
            label_names: ["class 0".into(), "class 1".into()],
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

impl RunConfig {
    /// Relative paths in the file are taken relative to its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.into(),
            source: e,
        })?;
        let mut cfg: RunConfig = serde_json::from_str(&text).map_err(|e| Error::Json {
            context: path.display().to_string(),
            source: e,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        rebase(base, &mut cfg.nodes);
        rebase(base, &mut cfg.edges);
        rebase(base, &mut cfg.checkpoint);
        rebase(base, &mut cfg.dataset_description_file);
        let mut out = Some(cfg.out.clone());
        rebase(base, &mut out);
        cfg.out = out.expect("set above");
        Ok(cfg)
    }

    pub fn apply_seed(&mut self) {
        if let Some(seed) = self.seed {
            self.train.seed = seed;
            self.explainer.seed = seed;
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.m == 0 {
            return Err(Error::Config("k and m must be at least 1".into()));
        }
        self.train.validate()?;
        self.explainer.validate()?;
        self.provider.validate()
    }

    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint
            .clone()
            .unwrap_or_else(|| self.out.join("checkpoint.json"))
    }

    pub fn input_paths(&self) -> Result<(&Path, &Path)> {
        match (&self.nodes, &self.edges) {
            (Some(n), Some(e)) => Ok((n, e)),
            _ => Err(Error::Config("config must name both `nodes` and `edges` files".into())),
        }
    }

    pub fn dataset_description(&self) -> Result<String> {
        if let Some(path) = &self.dataset_description_file {
            return std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            });
        }
        self.dataset_description
            .clone()
            .ok_or_else(|| Error::Validation("a dataset_description is required to build a prompt".into()))
    }
}
