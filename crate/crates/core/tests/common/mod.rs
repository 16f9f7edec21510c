//! Independent reference implementations and fixture helpers shared by the
//! integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use graphxain::explain::{EdgeWeight, Explanation, ExplanationView, FeatureWeight, NodeRef};
use graphxain::gcn::{GcnModel, TrainConfig};
use graphxain::graph::{ingest, split, Graph, RawGraph};
use graphxain::narrative::PromptBundle;
use graphxain::rng::{seeded_rng, SeededRng};
use ndarray::{Array1, Array2};
use rand::RngExt;

pub fn repo_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

pub fn fixture_dir() -> PathBuf {
    repo_root().join("fixtures")
}

/// Random graph with `n` nodes (before isolated-node removal), `d`
/// features in [-2, 2) and both labels present.
pub fn random_graph(rng: &mut SeededRng, n: usize, d: usize) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (rng.random_range(0..i), i)).collect();
    for _ in 0..n {
        edges.push((rng.random_range(0..n), rng.random_range(0..n)));
    }
    RawGraph {
        node_ids: (0..n).map(|i| format!("n{i}")).collect(),
        feature_names: (0..d).map(|c| format!("f{c}")).collect(),
        features: (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect(),
        labels: (0..n).map(|i| (i % 2) as u8).collect(),
        edges,
    }
    .preprocess()
    .expect("random graph has edges")
}

pub fn random_model(rng: &mut SeededRng, d: usize, hidden: usize) -> GcnModel {
    let mut m = GcnModel::init(d, hidden, rng.random_range(0..u64::MAX), 1.0);
    for b in m.b1.iter_mut() {
        *b = rng.random_range(-0.5..0.5);
    }
    m.b2 = rng.random_range(-0.5..0.5);
    m
}

/// Dense `D̃^{-1/2}(A + I)D̃^{-1/2}` built from the edge list.
pub fn dense_adjacency(graph: &Graph) -> Vec<Vec<f64>> {
    let n = graph.num_nodes();
    let mut a = vec![vec![0.0; n]; n];
    for (i, row) in a.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for &(u, v) in graph.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    for i in 0..n {
        for j in 0..n {
            a[i][j] /= (deg[i] * deg[j]).sqrt();
        }
    }
    a
}

/// Two-layer GCN logits with plain loops over dense matrices.
pub fn dense_forward(model: &GcnModel, graph: &Graph) -> Vec<f64> {
    let a = dense_adjacency(graph);
    let x = graph.features();
    let (n, d, h) = (graph.num_nodes(), graph.num_features(), model.hidden());
    let mut ax = vec![vec![0.0; d]; n];
    for (i, row) in ax.iter_mut().enumerate() {
        for j in 0..n {
            for (c, v) in row.iter_mut().enumerate() {
                *v += a[i][j] * x[[j, c]];
            }
        }
    }
    let mut hw = vec![0.0; n];
    for i in 0..n {
        for k in 0..h {
            let mut z = model.b1[k];
            for c in 0..d {
                z += ax[i][c] * model.w1[[c, k]];
            }
            hw[i] += z.max(0.0) * model.w2[k];
        }
    }
    (0..n)
        .map(|i| (0..n).map(|j| a[i][j] * hw[j]).sum::<f64>() + model.b2)
        .collect()
}

/// O(n²) AUC: fraction of (positive, negative) pairs ordered correctly,
/// ties counting one half.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> Option<f64> {
    let (mut num, mut pairs) = (0u64, 0u64);
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1;
                num += if si > sj {
                    2
                } else if si == sj {
                    1
                } else {
                    0
                };
            }
        }
    }
    (pairs > 0).then(|| num as f64 / (2 * pairs) as f64)
}

/// Explanation over nodes `0..n` with the given weighted edges and
/// feature weights; node `i` has id `v{i}`.
pub fn synthetic_explanation(
    n: usize,
    target: usize,
    edges: Vec<(usize, usize, f64)>,
    features: &[f64],
) -> Explanation {
    Explanation {
        target,
        target_id: format!("v{target}"),
        prediction: 0.75,
        predicted_label: 1,
        computation_nodes: (0..n)
            .map(|i| NodeRef {
                index: i,
                id: format!("v{i}"),
            })
            .collect(),
        edges: edges
            .into_iter()
            .map(|(u, v, weight)| EdgeWeight { u, v, weight })
            .collect(),
        feature_weights: features
            .iter()
            .enumerate()
            .map(|(c, &weight)| FeatureWeight {
                name: format!("x{c}"),
                weight,
            })
            .collect(),
        loss_trace: vec![],
        fidelity_trace: vec![],
    }
}

/// Node selection by counting, for every node, how many others beat it
/// (higher summed incident weight, or equal weight and smaller index).
pub fn oracle_selection(expl: &Explanation, k: usize) -> Vec<usize> {
    let n = expl.computation_nodes.len();
    let mut w = vec![vec![0.0; n]; n];
    for e in &expl.edges {
        w[e.u][e.v] = e.weight;
        w[e.v][e.u] = e.weight;
    }
    let score: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
    let others: Vec<usize> = (0..n).filter(|&i| i != expl.target).collect();
    let mut chosen: Vec<(usize, usize)> = others
        .iter()
        .map(|&i| {
            let beaten_by = others
                .iter()
                .filter(|&&j| score[j] > score[i] || (score[j] == score[i] && j < i))
                .count();
            (beaten_by, i)
        })
        .filter(|&(rank, _)| rank < k.max(1) - 1)
        .collect();
    chosen.sort();
    let mut out = vec![expl.target];
    out.extend(chosen.into_iter().map(|(_, i)| i));
    out
}

/// Connectivity of `nodes` under the explanation edges they induce, by
/// repeated relaxation.
pub fn oracle_connected(expl: &Explanation, nodes: &[usize]) -> bool {
    let mut reach: BTreeMap<usize, bool> = nodes.iter().map(|&i| (i, i == nodes[0])).collect();
    loop {
        let mut changed = false;
        for e in &expl.edges {
            if let (Some(&a), Some(&b)) = (reach.get(&e.u), reach.get(&e.v)) {
                if a != b {
                    reach.insert(e.u, true);
                    reach.insert(e.v, true);
                    changed = true;
                }
            }
        }
        if !changed {
            return reach.values().all(|&r| r);
        }
    }
}

/// Smallest k in `[k_start, k_max]` with a connected oracle selection.
pub fn oracle_expand(expl: &Explanation, k_start: usize, k_max: usize) -> (usize, bool) {
    let k_max = k_max.min(expl.computation_nodes.len()).max(1);
    let k_start = k_start.clamp(1, k_max);
    for k in k_start..=k_max {
        if oracle_connected(expl, &oracle_selection(expl, k)) {
            return (k, true);
        }
    }
    (k_max, false)
}

pub fn view_indices(view: &ExplanationView) -> Vec<usize> {
    view.nodes.iter().map(|n| n.index).collect()
}

/// Central differences of `f` around `x`.
pub fn finite_difference(x: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            p[i] = x[i] + h;
            let up = f(&p);
            p[i] = x[i] - h;
            let down = f(&p);
            p[i] = x[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - b| / max(|a|, |b|, floor)`.
pub fn max_rel_error(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn flatten(model: &GcnModel) -> Vec<f64> {
    let mut v: Vec<f64> = model.w1.iter().copied().collect();
    v.extend(model.b1.iter());
    v.extend(model.w2.iter());
    v.push(model.b2);
    v
}

pub fn unflatten(like: &GcnModel, v: &[f64]) -> GcnModel {
    let (d, h) = (like.num_features(), like.hidden());
    GcnModel {
        w1: Array2::from_shape_vec((d, h), v[..d * h].to_vec()).unwrap(),
        b1: Array1::from(v[d * h..d * h + h].to_vec()),
        w2: Array1::from(v[d * h + h..d * h + 2 * h].to_vec()),
        b2: v[d * h + 2 * h],
    }
}

/// The planted-community fixture shipped under `fixtures/planted`.
pub fn fixture_graph() -> Graph {
    let dir = fixture_dir().join("planted");
    ingest(dir.join("nodes.csv"), dir.join("edges.csv")).expect("fixture ingests")
}

pub struct FixtureConfig {
    pub dataset_description: String,
    pub label_names: [String; 2],
    pub train: TrainConfig,
}

pub fn fixture_config() -> FixtureConfig {
    let text = std::fs::read_to_string(fixture_dir().join("planted/config.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    FixtureConfig {
        dataset_description: v["dataset_description"].as_str().unwrap().to_string(),
        label_names: serde_json::from_value(v["label_names"].clone()).unwrap(),
        train: serde_json::from_value(v["train"].clone()).unwrap(),
    }
}

/// Stored `explain` artifact for fixture node g0.
pub fn golden_artifact() -> (Explanation, ExplanationView) {
    let text = std::fs::read_to_string(fixture_dir().join("golden/g0.explain.json")).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    (
        serde_json::from_value(v["explanation"].clone()).unwrap(),
        serde_json::from_value(v["view"].clone()).unwrap(),
    )
}

pub fn golden_bundle(view: &ExplanationView) -> PromptBundle {
    let cfg = fixture_config();
    PromptBundle::new(&fixture_graph(), view, &cfg.dataset_description, &cfg.label_names).unwrap()
}

/// Compare against `fixtures/golden/<name>`; with `GRAPHXAIN_BLESS=1`
/// rewrite the file instead.
pub fn check_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = fixture_dir().join("golden").join(name);
    if std::env::var("GRAPHXAIN_BLESS").is_ok_and(|v| v == "1") {
        std::fs::write(&path, actual).map_err(|e| e.to_string())?;
        return Ok(());
    }
    let expected = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected
            .lines()
            .zip(actual.lines())
            .position(|(a, b)| a != b)
            .map_or_else(
                || "length differs".to_string(),
                |i| format!("first difference on line {}", i + 1),
            );
        Err(format!("{name}: {line}"))
    }
}

/// Split with seed 42 and fit standardisation on the training nodes.
pub fn standardized(graph: &Graph, seed: u64) -> (Graph, graphxain::graph::SplitMasks) {
    let masks = split(graph, seed).unwrap();
    let (g, _) = graph.standardized(&masks.train).unwrap();
    (g, masks)
}

pub fn rng(seed: u64) -> SeededRng {
    seeded_rng(seed)
}
