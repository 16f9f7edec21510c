//! Text exports of an explanation view: Graphviz DOT and a feature
//! importance table.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::explain::ExplanationView;
use crate::narrative::fmt_num;

/// Pen width of the heaviest possible edge (weight 1).
pub const MAX_PENWIDTH: f64 = 5.0;

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

/// Undirected DOT graph. The target is drawn as a filled double circle;
/// each edge carries its weight as label and a proportional pen width.
/// Nodes and edges appear in view order.
pub fn to_dot(view: &ExplanationView) -> String {
    let mut out = String::from("graph explanation {\n");
    let _ = writeln!(
        out,
        "  label={};",
        quote(&format!(
            "prediction {} for {}",
            fmt_num(view.prediction),
            view.target_id
        ))
    );
    out.push_str("  node [shape=circle];\n");
    for n in &view.nodes {
        if n.index == view.target {
            let _ = writeln!(
                out,
                "  {} [shape=doublecircle, style=filled, fillcolor=gold];",
                quote(&n.id)
            );
        } else {
            let _ = writeln!(out, "  {};", quote(&n.id));
        }
    }
    for e in &view.edges {
        let (Some(u), Some(v)) = (view.node_id(e.u), view.node_id(e.v)) else {
            continue;
        };
        let _ = writeln!(
            out,
            "  {} -- {} [label={}, penwidth={}];",
            quote(u),
            quote(v),
            quote(&fmt_num(e.weight)),
            fmt_num(MAX_PENWIDTH * e.weight)
        );
    }
    out.push_str("}\n");
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceRow {
    pub feature: String,
    pub importance: f64,
    pub normalized: f64,
}

/// Feature importances sorted descending (ties keep view order).
pub fn importance_table(view: &ExplanationView) -> Vec<ImportanceRow> {
    let mut rows: Vec<ImportanceRow> = view
        .features
        .iter()
        .map(|f| ImportanceRow {
            feature: f.name.clone(),
            importance: f.importance,
            normalized: f.normalized,
        })
        .collect();
    rows.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    rows
}

pub fn importance_json(view: &ExplanationView) -> String {
    serde_json::to_string_pretty(&importance_table(view)).expect("importance serialization cannot fail")
}
