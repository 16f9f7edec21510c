//! Human-scale truncation of explanations.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::{EdgeWeight, Explanation};
use crate::error::{Error, Result};

/// How edge weights are folded into a node importance.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeAggregation {
    /// Sum of incident edge weights.
    #[default]
    Sum,
    /// Largest incident edge weight.
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewNode {
    pub index: usize,
    pub id: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub name: String,
    /// Sigmoided mask value.
    pub importance: f64,
    /// `importance` divided by the sum over all features.
    pub normalized: f64,
}

/// At most `k_used` nodes (target first, then by importance) with the
/// edges they induce, and the `m` strongest features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationView {
    pub target: usize,
    pub target_id: String,
    pub prediction: f64,
    pub predicted_label: u8,
    pub nodes: Vec<ViewNode>,
    pub edges: Vec<EdgeWeight>,
    pub features: Vec<FeatureImportance>,
    pub connected: bool,
    pub k_used: usize,
    pub aggregation: NodeAggregation,
}

impl ExplanationView {
    pub fn node_id(&self, index: usize) -> Option<&str> {
        self.nodes.iter().find(|n| n.index == index).map(|n| n.id.as_str())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("view serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("explanation view", e))
    }
}

fn node_importance(expl: &Explanation, aggregation: NodeAggregation) -> HashMap<usize, f64> {
    let mut importance: HashMap<usize, f64> = expl.computation_nodes.iter().map(|n| (n.index, 0.0)).collect();
    for e in &expl.edges {
        for end in [e.u, e.v] {
            let slot = importance.entry(end).or_insert(0.0);
            *slot = match aggregation {
                NodeAggregation::Sum => *slot + e.weight,
                NodeAggregation::Max => slot.max(e.weight),
            };
        }
    }
    importance
}

/// Keep the target plus the `k − 1` most important other nodes (ties broken
/// by ascending index) and the `m` heaviest features (ties by position).
pub fn truncate(expl: &Explanation, k: usize, m: usize) -> ExplanationView {
    truncate_with(expl, k, m, NodeAggregation::Sum)
}

pub fn truncate_with(expl: &Explanation, k: usize, m: usize, aggregation: NodeAggregation) -> ExplanationView {
    let k = k.max(1);
    let importance = node_importance(expl, aggregation);
    let mut others: Vec<usize> = expl
        .computation_nodes
        .iter()
        .map(|n| n.index)
        .filter(|&i| i != expl.target)
        .collect();
    others.sort_by(|a, b| importance[b].total_cmp(&importance[a]).then(a.cmp(b)));
    others.truncate(k - 1);

    let mut selected = vec![expl.target];
    selected.extend(others);
    let nodes: Vec<ViewNode> = selected
        .iter()
        .map(|&i| ViewNode {
            index: i,
            id: expl.node_id(i).unwrap_or_default().to_owned(),
            importance: importance.get(&i).copied().unwrap_or(0.0),
        })
        .collect();
    let edges: Vec<EdgeWeight> = expl
        .edges
        .iter()
        .filter(|e| selected.contains(&e.u) && selected.contains(&e.v))
        .cloned()
        .collect();

    let total: f64 = expl.feature_weights.iter().map(|f| f.weight).sum();
    let mut order: Vec<usize> = (0..expl.feature_weights.len()).collect();
    order.sort_by(|&a, &b| {
        expl.feature_weights[b]
            .weight
            .total_cmp(&expl.feature_weights[a].weight)
            .then(a.cmp(&b))
    });
    let features = order
        .into_iter()
        .take(m)
        .map(|c| {
            let f = &expl.feature_weights[c];
            FeatureImportance {
                name: f.name.clone(),
                importance: f.weight,
                normalized: if total > 0.0 { f.weight / total } else { 0.0 },
            }
        })
        .collect();

    let connected = is_connected(&selected, &edges);
    ExplanationView {
        target: expl.target,
        target_id: expl.target_id.clone(),
        prediction: expl.prediction,
        predicted_label: expl.predicted_label,
        nodes,
        edges,
        features,
        connected,
        k_used: k,
        aggregation,
    }
}

/// Whether every node is reachable from `nodes[0]` over `edges`.
fn is_connected(nodes: &[usize], edges: &[EdgeWeight]) -> bool {
    let mut seen = vec![false; nodes.len()];
    let pos = |x: usize| nodes.iter().position(|&n| n == x);
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for e in edges {
            let other = if e.u == nodes[i] {
                e.v
            } else if e.v == nodes[i] {
                e.u
            } else {
                continue;
            };
            if let Some(j) = pos(other) {
                if !seen[j] {
                    seen[j] = true;
                    queue.push_back(j);
                }
            }
        }
    }
    seen.into_iter().all(|s| s)
}

/// Smallest `k` in `[k_start, k_max]` whose truncated view is connected,
/// or the `k_max` view (with `connected = false`) when there is none.
///
/// `k_max` is capped at the number of computation nodes and `k_start` at
/// `k_max`.
pub fn expand_to_connected(
    expl: &Explanation,
    k_start: usize,
    k_max: usize,
    m: usize,
    aggregation: NodeAggregation,
) -> ExplanationView {
    let k_max = k_max.min(expl.computation_nodes.len()).max(1);
    let k_start = k_start.clamp(1, k_max);
    for k in k_start..k_max {
        let view = truncate_with(expl, k, m, aggregation);
        if view.connected {
            return view;
        }
    }
    truncate_with(expl, k_max, m, aggregation)
}
