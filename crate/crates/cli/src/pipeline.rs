use std::fs;
use std::path::{Path, PathBuf};

use graphxain::explain::{expand_to_connected, explain_with, truncate_with, Explanation, ExplanationView};
use graphxain::gcn::{train, Checkpoint, GcnModel, TrainReport};
use graphxain::graph::{ingest, normalize, split, Graph, IdMap, NormalizedAdjacency};
use graphxain::narrative::{
    build_prompt, generate_description, generate_narrative, validate_narrative_structure, HttpProvider, MockProvider,
    NarrativeResult, PromptBundle, Provider, StructureReport,
};
use graphxain::render::{importance_json, to_dot};
use graphxain::rng::seeded_rng;
use graphxain::{Error, Result};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::Io {
            path: dir.into(),
            source: e,
        })?;
    }
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })
}

/// File-name-safe form of an external id.
pub fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || "._-".contains(c) {
                c
            } else {
                '_'
            }
        })
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("artifact serialization cannot fail") + "\n"
}

pub fn load_graph(cfg: &RunConfig) -> Result<Graph> {
    let (nodes, edges) = cfg.input_paths()?;
    ingest(nodes, edges)
}

pub struct TrainOutcome {
    pub report: TrainReport,
    pub checkpoint_path: PathBuf,
}

pub fn run_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    let graph = load_graph(cfg)?;
    let masks = split(&graph, cfg.train.seed)?;
    let (graph, scaling) = if cfg.standardize {
        let (g, s) = graph.standardized(&masks.train)?;
        (g, Some(s))
    } else {
        (graph, None)
    };
    let (model, report) = train(&graph, &masks, &cfg.train)?;
    let checkpoint = Checkpoint::new(&model, &cfg.train, graph.feature_names(), &report, scaling);
    let checkpoint_path = cfg.checkpoint_path();
    write(&checkpoint_path, &checkpoint.to_json())?;
    write(&cfg.out.join("report.json"), &to_json(&report))?;
    write(&cfg.out.join("id_map.json"), &to_json(&IdMap::from_graph(&graph)))?;
    Ok(TrainOutcome {
        report,
        checkpoint_path,
    })
}

/// A trained model next to the graph it reads: `raw` keeps the original
/// feature values for prompts, `input` is what the model sees.
pub struct Context {
    pub raw: Graph,
    pub input: Graph,
    pub adjacency: NormalizedAdjacency,
    pub model: GcnModel,
}

impl Context {
    pub fn load(cfg: &RunConfig) -> Result<Self> {
        let raw = load_graph(cfg)?;
        let checkpoint = Checkpoint::load(cfg.checkpoint_path())?;
        if checkpoint.feature_names != raw.feature_names() {
            return Err(Error::Validation(
                "checkpoint feature names do not match the node file header".into(),
            ));
        }
        let model = checkpoint.model()?;
        let input = match &checkpoint.feature_scaling {
            Some(s) => {
                let mut x = raw.features().clone();
                s.apply(&mut x)?;
                raw.with_features(x)?
            }
            None => raw.clone(),
        };
        let adjacency = normalize(&input);
        Ok(Self {
            raw,
            input,
            adjacency,
            model,
        })
    }

    pub fn index_of(&self, id: &str) -> Result<usize> {
        self.raw
            .index_of(id)
            .ok_or_else(|| Error::Validation(format!("unknown node id {id:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplainArtifact {
    pub explanation: Explanation,
    pub view: ExplanationView,
}

pub fn make_view(cfg: &RunConfig, expl: &Explanation) -> ExplanationView {
    if cfg.expand_connected {
        let k_max = cfg.k_max.unwrap_or(expl.computation_nodes.len());
        expand_to_connected(expl, cfg.k, k_max, cfg.m, cfg.aggregation)
    } else {
        truncate_with(expl, cfg.k, cfg.m, cfg.aggregation)
    }
}

pub fn explain_one(cfg: &RunConfig, ctx: &Context, id: &str) -> Result<ExplainArtifact> {
    let target = ctx.index_of(id)?;
    let explanation = explain_with(&ctx.model, &ctx.input, &ctx.adjacency, target, &cfg.explainer)?;
    let view = make_view(cfg, &explanation);
    Ok(ExplainArtifact { explanation, view })
}

/// `count` distinct ids drawn with the explainer seed, in draw order.
pub fn sample_ids(graph: &Graph, count: usize, seed: u64) -> Vec<String> {
    let n = graph.num_nodes();
    let mut rng = seeded_rng(seed);
    sample(&mut rng, n, count.min(n))
        .into_iter()
        .map(|i| graph.node_ids()[i].clone())
        .collect()
}

pub fn explain_path(cfg: &RunConfig, id: &str) -> PathBuf {
    cfg.out.join("explain").join(format!("{}.json", file_stem(id)))
}

pub fn run_explain(cfg: &RunConfig, ids: &[String]) -> Result<Vec<(String, ExplainArtifact)>> {
    let ctx = Context::load(cfg)?;
    let ids = if ids.is_empty() {
        sample_ids(&ctx.raw, cfg.sample, cfg.explainer.seed)
    } else {
        ids.to_vec()
    };
    for id in &ids {
        ctx.index_of(id)?;
    }
    let artifacts: Vec<(String, ExplainArtifact)> = ids
        .par_iter()
        .map(|id| explain_one(cfg, &ctx, id).map(|a| (id.clone(), a)))
        .collect::<Result<_>>()?;
    for (id, a) in &artifacts {
        write(&explain_path(cfg, id), &to_json(a))?;
    }
    Ok(artifacts)
}

/// Stored explanation for `id` when present, otherwise a fresh one. The view
/// is rebuilt from the explanation with the current `k`/`m` settings.
pub fn explanation_for(cfg: &RunConfig, ctx: &Context, id: &str) -> Result<ExplainArtifact> {
    let path = explain_path(cfg, id);
    if path.exists() {
        let text = fs::read_to_string(&path).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
        let stored: ExplainArtifact = serde_json::from_str(&text).map_err(|e| Error::Json {
            context: path.display().to_string(),
            source: e,
        })?;
        if stored.explanation.target_id != id {
            return Err(Error::Validation(format!(
                "{} holds an explanation for {}",
                path.display(),
                stored.explanation.target_id
            )));
        }
        let view = make_view(cfg, &stored.explanation);
        return Ok(ExplainArtifact {
            explanation: stored.explanation,
            view,
        });
    }
    explain_one(cfg, ctx, id)
}

pub struct NarrateOutcome {
    pub result: NarrativeResult,
    pub report: Option<StructureReport>,
    pub result_path: PathBuf,
}

pub fn run_narrate(cfg: &RunConfig, id: &str, mock: bool, describe: bool) -> Result<NarrateOutcome> {
    let ctx = Context::load(cfg)?;
    ctx.index_of(id)?;
    let artifact = explanation_for(cfg, &ctx, id)?;
    let dir = cfg.out.join("narrate");
    let stem = file_stem(id);
    if describe {
        let bundle = PromptBundle::new(
            &ctx.raw,
            &artifact.view,
            cfg.dataset_description.as_deref().unwrap_or(""),
            &cfg.label_names,
        )?;
        let result = generate_description(&bundle);
        let result_path = dir.join(format!("{stem}.description.json"));
        write(&result_path, &(result.to_json() + "\n"))?;
        write(&dir.join(format!("{stem}.description.txt")), &result.text)?;
        return Ok(NarrateOutcome {
            result,
            report: None,
            result_path,
        });
    }
    let bundle = PromptBundle::new(&ctx.raw, &artifact.view, &cfg.dataset_description()?, &cfg.label_names)?;
    let prompt = build_prompt(&bundle)?;
    write(&dir.join(format!("{stem}.prompt.txt")), &prompt)?;
    let provider: Box<dyn Provider> = if mock {
        Box::new(MockProvider)
    } else {
        Box::new(HttpProvider::from_env(cfg.provider.clone())?)
    };
    let result = generate_narrative(&prompt, provider.as_ref(), cfg.provider.temperature)?;
    let report = validate_narrative_structure(&result.text, &bundle, &prompt);
    let result_path = dir.join(format!("{stem}.json"));
    write(&result_path, &(result.to_json() + "\n"))?;
    write(&dir.join(format!("{stem}.txt")), &result.text)?;
    Ok(NarrateOutcome {
        result,
        report: Some(report),
        result_path,
    })
}

/// Accepts a bare view or an `explain` artifact.
pub fn read_view(path: &Path) -> Result<ExplanationView> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.into(),
        source: e,
    })?;
    let json_err = |e| Error::Json {
        context: path.display().to_string(),
        source: e,
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    let view = match value.get("view") {
        Some(v) => v.clone(),
        None => value,
    };
    serde_json::from_value(view).map_err(json_err)
}

pub fn run_render(cfg: &RunConfig, input: &Path) -> Result<(PathBuf, PathBuf)> {
    let view = read_view(input)?;
    let stem = file_stem(&view.target_id);
    let dir = cfg.out.join("render");
    let dot = dir.join(format!("{stem}.dot"));
    let imp = dir.join(format!("{stem}.importance.json"));
    write(&dot, &to_dot(&view))?;
    write(&imp, &(importance_json(&view) + "\n"))?;
    Ok((dot, imp))
}
