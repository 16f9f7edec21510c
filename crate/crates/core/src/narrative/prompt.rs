//! Prompt assembly from explanation artifacts.

use std::collections::HashMap;
use std::sync::LazyLock;

use regex::{Captures, Regex};
use serde::{Deserialize, Serialize};

use super::format::fmt_num;
use super::sha256_hex;
use crate::error::{Error, Result};
use crate::explain::ExplanationView;
use crate::graph::Graph;

/// Template text; placeholders are `{{name}}`.
pub const PROMPT_TEMPLATE: &str = include_str!("../../templates/prompt_v1.txt");
pub const PROMPT_TEMPLATE_VERSION: &str = "prompt_v1";

/// System message sent alongside every prompt.
pub const SYSTEM_MESSAGE: &str =
    "You write faithful, readable explanations of graph neural network predictions using only the facts you are given.";

pub fn template_hash() -> String {
    sha256_hex(PROMPT_TEMPLATE.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFeatures {
    pub id: String,
    /// Values for `PromptBundle::feature_columns`, in that order.
    pub values: Vec<f64>,
}

/// Everything the prompt and the description are rendered from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub dataset_description: String,
    pub target_id: String,
    /// The top-m feature names of the view; every node lists these columns.
    pub feature_columns: Vec<String>,
    pub target_features: Vec<(String, f64)>,
    /// External ids of the target's neighbours in the full graph.
    pub target_edges: Vec<String>,
    pub prediction: Prediction,
    pub subgraph: ExplanationView,
    /// One entry per view node, target first.
    pub node_features: Vec<NodeFeatures>,
    pub feature_importances: Vec<(String, f64)>,
}

impl PromptBundle {
    /// `graph` should carry the feature values a reader would recognise
    /// (the unstandardised ones).
    pub fn new(
        graph: &Graph,
        view: &ExplanationView,
        dataset_description: &str,
        label_names: &[String; 2],
    ) -> Result<Self> {
        graph.check_node(view.target)?;
        let columns: Vec<usize> = view
            .features
            .iter()
            .map(|f| {
                graph
                    .feature_names()
                    .iter()
                    .position(|n| *n == f.name)
                    .ok_or_else(|| Error::Validation(format!("view feature {:?} is not a graph column", f.name)))
            })
            .collect::<Result<_>>()?;
        let x = graph.features();
        let mut node_features = Vec::with_capacity(view.nodes.len());
        for n in &view.nodes {
            graph.check_node(n.index)?;
            if graph.node_ids()[n.index] != n.id {
                return Err(Error::Validation(format!(
                    "view node {} does not match graph id {}",
                    n.id,
                    graph.node_ids()[n.index]
                )));
            }
            node_features.push(NodeFeatures {
                id: n.id.clone(),
                values: columns.iter().map(|&c| x[[n.index, c]]).collect(),
            });
        }
        let feature_columns: Vec<String> = view.features.iter().map(|f| f.name.clone()).collect();
        let bundle = Self {
            dataset_description: dataset_description.to_string(),
            target_id: view.target_id.clone(),
            target_features: feature_columns
                .iter()
                .zip(&columns)
                .map(|(name, &c)| (name.clone(), x[[view.target, c]]))
                .collect(),
            feature_columns,
            target_edges: graph
                .neighbors(view.target)
                .iter()
                .map(|&j| graph.node_ids()[j].clone())
                .collect(),
            prediction: Prediction {
                probability: view.prediction,
                label: label_names[usize::from(view.predicted_label)].clone(),
            },
            subgraph: view.clone(),
            node_features,
            feature_importances: view.features.iter().map(|f| (f.name.clone(), f.importance)).collect(),
        };
        bundle.validate()?;
        Ok(bundle)
    }

    /// Structural checks. The dataset description is only required by
    /// [`build_prompt`].
    pub fn validate(&self) -> Result<()> {
        if self.target_id.is_empty() {
            return Err(Error::Validation("target id is empty".into()));
        }
        for nf in &self.node_features {
            if nf.values.len() != self.feature_columns.len() {
                return Err(Error::Validation(format!(
                    "node {} has {} feature values, expected {}",
                    nf.id,
                    nf.values.len(),
                    self.feature_columns.len()
                )));
            }
        }
        for e in &self.subgraph.edges {
            for end in [e.u, e.v] {
                let id = self
                    .subgraph
                    .node_id(end)
                    .ok_or_else(|| Error::Validation(format!("subgraph edge endpoint {end} is not a view node")))?;
                if !self.node_features.iter().any(|n| n.id == id) {
                    return Err(Error::Validation(format!("subgraph node {id} has no feature line")));
                }
            }
        }
        Ok(())
    }

    /// View edges as (id, id, weight), heaviest first; ties keep view order.
    pub fn weighted_edges(&self) -> Vec<(&str, &str, f64)> {
        let mut edges: Vec<(&str, &str, f64)> = self
            .subgraph
            .edges
            .iter()
            .map(|e| {
                (
                    self.subgraph.node_id(e.u).unwrap_or_default(),
                    self.subgraph.node_id(e.v).unwrap_or_default(),
                    e.weight,
                )
            })
            .collect();
        edges.sort_by(|a, b| b.2.total_cmp(&a.2));
        edges
    }

    /// Ids of view nodes other than the target plus the target's graph
    /// neighbours.
    pub fn neighbor_ids(&self) -> Vec<&str> {
        let mut ids: Vec<&str> = self.node_features.iter().skip(1).map(|n| n.id.as_str()).collect();
        for id in &self.target_edges {
            if !ids.contains(&id.as_str()) {
                ids.push(id);
            }
        }
        ids
    }
}

static PLACEHOLDER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\{\{([a-z_]+)\}\}").expect("static regex"));

fn render(template: &str, values: &HashMap<&str, String>) -> Result<String> {
    let mut missing = None;
    let out = PLACEHOLDER.replace_all(template, |c: &Captures<'_>| match values.get(&c[1]) {
        Some(v) => v.clone(),
        None => {
            missing.get_or_insert_with(|| c[1].to_string());
            String::new()
        }
    });
    match missing {
        Some(name) => Err(Error::Validation(format!(
            "template placeholder {{{{{name}}}}} has no value"
        ))),
        None => Ok(out.into_owned()),
    }
}

fn feature_list(names: &[String], values: &[f64]) -> String {
    names
        .iter()
        .zip(values)
        .map(|(n, v)| format!("{n} = {}", fmt_num(*v)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Render the prompt. Identical bundles give identical bytes.
pub fn build_prompt(bundle: &PromptBundle) -> Result<String> {
    bundle.validate()?;
    if bundle.dataset_description.trim().is_empty() {
        return Err(Error::Validation(
            "dataset description is required to build a prompt".into(),
        ));
    }
    let lines = |items: Vec<String>, empty: &str| {
        if items.is_empty() {
            empty.to_string()
        } else {
            items.join("\n")
        }
    };
    let mut values: HashMap<&str, String> = HashMap::new();
    values.insert("dataset_description", bundle.dataset_description.trim().to_string());
    values.insert("target_id", bundle.target_id.clone());
    values.insert(
        "target_features",
        lines(
            bundle
                .target_features
                .iter()
                .map(|(n, v)| format!("- {n}: {}", fmt_num(*v)))
                .collect(),
            "(none)",
        ),
    );
    values.insert(
        "target_connections",
        if bundle.target_edges.is_empty() {
            "(none)".into()
        } else {
            bundle.target_edges.join(", ")
        },
    );
    values.insert("prediction_label", bundle.prediction.label.clone());
    values.insert("prediction_probability", fmt_num(bundle.prediction.probability));
    values.insert("k", bundle.node_features.len().to_string());
    values.insert(
        "subgraph_nodes",
        lines(
            bundle
                .node_features
                .iter()
                .map(|n| format!("- {}: {}", n.id, feature_list(&bundle.feature_columns, &n.values)))
                .collect(),
            "(none)",
        ),
    );
    values.insert(
        "subgraph_edges",
        lines(
            bundle
                .weighted_edges()
                .into_iter()
                .map(|(u, v, w)| format!("- {u} -- {v}: {}", fmt_num(w)))
                .collect(),
            "(no edges were kept)",
        ),
    );
    values.insert("m", bundle.feature_importances.len().to_string());
    values.insert(
        "feature_importances",
        lines(
            bundle
                .feature_importances
                .iter()
                .map(|(n, w)| format!("- {n}: {}", fmt_num(*w)))
                .collect(),
            "(none)",
        ),
    );
    render(PROMPT_TEMPLATE, &values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_reports_unknown_placeholder() {
        let mut v = HashMap::new();
        v.insert("a", "x{{b}}".to_string());
        assert_eq!(render("[{{a}}]", &v).unwrap(), "[x{{b}}]");
        assert!(render("{{a}} {{zzz}}", &v).is_err());
    }

    #[test]
    fn template_sections_in_order() {
        let heads = [
            "cause-and-effect",
            "## Dataset",
            "## Target node",
            "## Model prediction",
            "## Explanatory subgraph",
            "## Feature importance",
            "## Output instructions",
        ];
        let pos: Vec<usize> = heads.iter().map(|h| PROMPT_TEMPLATE.find(h).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        assert!(super::super::format::numeric_tokens(PROMPT_TEMPLATE).is_empty());
    }
}
