//! Node-attributed undirected graphs: ingestion, preprocessing and
//! neighbourhood queries.

mod adjacency;
mod ingest;
mod split;

use std::collections::{BTreeSet, VecDeque};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use adjacency::{normalize, NormalizedAdjacency};
pub use ingest::{ingest, write_csv, IdMap};
pub use split::{split, SplitMasks};

/// An immutable, validated, undirected graph with node features and binary
/// labels.
///
/// Edges are stored once as `(u, v)` with `u < v`, sorted and deduplicated.
/// Self-loops never appear here; they are added by [`NormalizedAdjacency`].
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_ids: Vec<String>,
    feature_names: Vec<String>,
    features: Array2<f64>,
    labels: Vec<u8>,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

/// Unprocessed graph data as read from disk, before symmetrization and
/// isolated-node removal.
#[derive(Debug, Clone, Default)]
pub struct RawGraph {
    pub node_ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// One row per node, each of length `feature_names.len()`.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    /// Directed pairs of node indices; may contain duplicates, reversed
    /// copies and self-loops.
    pub edges: Vec<(usize, usize)>,
}

impl RawGraph {
    /// Symmetrize, drop self-loops and duplicates, remove isolated nodes and
    /// reindex the survivors densely (preserving their relative order).
    pub fn preprocess(self) -> Result<Graph> {
        let n = self.node_ids.len();
        let d = self.feature_names.len();
        if self.features.len() != n || self.labels.len() != n {
            return Err(Error::Shape(format!(
                "{n} node ids but {} feature rows and {} labels",
                self.features.len(),
                self.labels.len()
            )));
        }
        if let Some((i, row)) = self.features.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(Error::Shape(format!(
                "node {} has {} features, expected {d}",
                self.node_ids[i],
                row.len()
            )));
        }

        let mut canonical = BTreeSet::new();
        for &(a, b) in &self.edges {
            if a >= n || b >= n {
                return Err(Error::Validation(format!(
                    "edge ({a}, {b}) references a node outside 0..{n}"
                )));
            }
            if a != b {
                canonical.insert((a.min(b), a.max(b)));
            }
        }

        let mut connected = vec![false; n];
        for &(u, v) in &canonical {
            connected[u] = true;
            connected[v] = true;
        }
        let mut remap = vec![usize::MAX; n];
        let mut kept = Vec::new();
        for (old, _) in connected.iter().enumerate().filter(|(_, &c)| c) {
            remap[old] = kept.len();
            kept.push(old);
        }
        if kept.is_empty() {
            return Err(Error::EmptyGraph);
        }

        let node_ids = kept.iter().map(|&i| self.node_ids[i].clone()).collect();
        let labels = kept.iter().map(|&i| self.labels[i]).collect();
        let mut features = Array2::zeros((kept.len(), d));
        for (new, &old) in kept.iter().enumerate() {
            for (c, &x) in self.features[old].iter().enumerate() {
                features[[new, c]] = x;
            }
        }
        let edges = canonical.into_iter().map(|(u, v)| (remap[u], remap[v])).collect();
        Graph::new(node_ids, self.feature_names, features, labels, edges)
    }
}

impl Graph {
    /// Build a graph from already-canonical parts, checking every invariant.
    ///
    /// Unlike [`RawGraph::preprocess`] this never rewrites its input: a
    /// reversed, duplicated or self-loop edge, or an isolated node, is an
    /// error.
    pub fn new(
        node_ids: Vec<String>,
        feature_names: Vec<String>,
        features: Array2<f64>,
        labels: Vec<u8>,
        mut edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if n == 0 {
            return Err(Error::EmptyGraph);
        }
        if features.dim() != (n, feature_names.len()) {
            return Err(Error::Shape(format!(
                "feature matrix is {:?}, expected ({n}, {})",
                features.dim(),
                feature_names.len()
            )));
        }
        if labels.len() != n {
            return Err(Error::Shape(format!("{} labels for {n} nodes", labels.len())));
        }
        if let Some(bad) = labels.iter().find(|&&y| y > 1) {
            return Err(Error::Validation(format!("label {bad} is not binary")));
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::Validation("feature matrix contains non-finite values".into()));
        }
        let mut seen = BTreeSet::new();
        for id in &node_ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Validation(format!("duplicate node id {id:?}")));
            }
        }

        edges.sort_unstable();
        let mut neighbors = vec![Vec::new(); n];
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= v {
                return Err(Error::Validation(format!(
                    "edge ({u}, {v}) is not canonical (need u < v)"
                )));
            }
            if v >= n {
                return Err(Error::Index { index: v, len: n });
            }
            if i > 0 && edges[i - 1] == (u, v) {
                return Err(Error::Validation(format!("duplicate edge ({u}, {v})")));
            }
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        if let Some(isolated) = neighbors.iter().position(Vec::is_empty) {
            return Err(Error::Validation(format!("node {:?} is isolated", node_ids[isolated])));
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        Ok(Self {
            node_ids,
            feature_names,
            features,
            labels,
            edges,
            neighbors,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn num_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Canonical `(u, v)` pairs with `u < v`, sorted ascending.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Neighbours of `node`, ascending.
    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.num_nodes() && self.neighbors[a].binary_search(&b).is_ok()
    }

    pub fn check_node(&self, node: usize) -> Result<()> {
        if node < self.num_nodes() {
            Ok(())
        } else {
            Err(Error::Index {
                index: node,
                len: self.num_nodes(),
            })
        }
    }

    /// Index of the node with external id `id`.
    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|x| x == id)
    }

    /// Nodes within shortest-path distance `k` of `node`, in BFS discovery
    /// order: `node` first, then by distance, and within one distance layer
    /// in the order their parents were visited, each parent contributing its
    /// neighbours in ascending index order.
    pub fn khop_neighborhood(&self, node: usize, k: usize) -> Result<Vec<usize>> {
        self.check_node(node)?;
        let mut dist = vec![usize::MAX; self.num_nodes()];
        let mut order = vec![node];
        let mut queue = VecDeque::from([node]);
        dist[node] = 0;
        while let Some(u) = queue.pop_front() {
            if dist[u] == k {
                continue;
            }
            for &v in &self.neighbors[u] {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    order.push(v);
                    queue.push_back(v);
                }
            }
        }
        Ok(order)
    }

    /// Copy of the graph with every feature column standardized to mean 0
    /// and variance 1, with statistics taken over `reference` nodes only.
    pub fn standardized(&self, reference: &[usize]) -> Result<(Graph, FeatureScaling)> {
        let scaling = FeatureScaling::fit(&self.features, reference)?;
        let mut out = self.clone();
        scaling.apply(&mut out.features)?;
        Ok((out, scaling))
    }

    /// Replace the feature matrix, keeping structure and labels.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Graph> {
        Graph::new(
            self.node_ids.clone(),
            self.feature_names.clone(),
            features,
            self.labels.clone(),
            self.edges.clone(),
        )
    }

    /// Both graphs side by side, `other`'s nodes reindexed after `self`'s.
    /// Feature names must agree and node ids must not collide.
    pub fn disjoint_union(&self, other: &Graph) -> Result<Graph> {
        if self.feature_names != other.feature_names {
            return Err(Error::Validation("feature names differ between graphs".into()));
        }
        let offset = self.num_nodes();
        let mut features = Array2::zeros((offset + other.num_nodes(), self.num_features()));
        features.slice_mut(ndarray::s![..offset, ..]).assign(&self.features);
        features.slice_mut(ndarray::s![offset.., ..]).assign(&other.features);
        Graph::new(
            self.node_ids.iter().chain(&other.node_ids).cloned().collect(),
            self.feature_names.clone(),
            features,
            self.labels.iter().chain(&other.labels).copied().collect(),
            self.edges
                .iter()
                .copied()
                .chain(other.edges.iter().map(|&(u, v)| (u + offset, v + offset)))
                .collect(),
        )
    }

    /// Byte-stable JSON document `{nodes, feature_names, edges, labels}`.
    pub fn to_canonical_json(&self) -> String {
        let doc = CanonicalGraph {
            nodes: self
                .node_ids
                .iter()
                .enumerate()
                .map(|(i, id)| CanonicalNode {
                    id: id.clone(),
                    features: self.features.row(i).to_vec(),
                })
                .collect(),
            feature_names: self.feature_names.clone(),
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
            labels: self.labels.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("graph serialization cannot fail")
    }

    pub fn from_canonical_json(text: &str) -> Result<Graph> {
        let doc: CanonicalGraph = serde_json::from_str(text).map_err(|e| Error::json("canonical graph", e))?;
        let d = doc.feature_names.len();
        let mut features = Array2::zeros((doc.nodes.len(), d));
        for (i, node) in doc.nodes.iter().enumerate() {
            if node.features.len() != d {
                return Err(Error::Shape(format!(
                    "node {:?} has {} features, expected {d}",
                    node.id,
                    node.features.len()
                )));
            }
            for (c, &x) in node.features.iter().enumerate() {
                features[[i, c]] = x;
            }
        }
        Graph::new(
            doc.nodes.into_iter().map(|n| n.id).collect(),
            doc.feature_names,
            features,
            doc.labels,
            doc.edges.into_iter().map(|[u, v]| (u, v)).collect(),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct CanonicalGraph {
    nodes: Vec<CanonicalNode>,
    feature_names: Vec<String>,
    edges: Vec<[usize; 2]>,
    labels: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
struct CanonicalNode {
    id: String,
    features: Vec<f64>,
}

/// Per-column affine scaling `(x - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScaling {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaling {
    pub fn fit(features: &Array2<f64>, reference: &[usize]) -> Result<Self> {
        if reference.is_empty() {
            return Err(Error::EmptyMask);
        }
        let count = reference.len() as f64;
        let d = features.ncols();
        let mut mean = vec![0.0; d];
        let mut std = vec![0.0; d];
        for c in 0..d {
            let col = features.column(c);
            let mu = reference.iter().map(|&i| col[i]).sum::<f64>() / count;
            let var = reference.iter().map(|&i| (col[i] - mu).powi(2)).sum::<f64>() / count;
            mean[c] = mu;
            // constant columns are centred but not scaled
            std[c] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Ok(Self { mean, std })
    }

    pub fn apply(&self, features: &mut Array2<f64>) -> Result<()> {
        if features.ncols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "scaling fitted on {} features, applied to {}",
                self.mean.len(),
                features.ncols()
            )));
        }
        for mut row in features.rows_mut() {
            for (c, x) in row.iter_mut().enumerate() {
                *x = (*x - self.mean[c]) / self.std[c];
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(n: usize, edges: &[(usize, usize)]) -> RawGraph {
        RawGraph {
            node_ids: (0..n).map(|i| format!("v{i}")).collect(),
            feature_names: vec!["x".into()],
            features: (0..n).map(|i| vec![i as f64]).collect(),
            labels: (0..n).map(|i| (i % 2) as u8).collect(),
            edges: edges.to_vec(),
        }
    }

    fn path_graph(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        raw(n, &edges).preprocess().unwrap()
    }

    #[test]
    fn preprocess_symmetrizes_dedups_and_drops_isolated() {
        let g = raw(3, &[(0, 1), (1, 0), (1, 1)]).preprocess().unwrap();
        assert_eq!(g.num_nodes(), 2);
        assert_eq!(g.edges(), &[(0, 1)]);
        assert_eq!(g.node_ids(), &["v0".to_string(), "v1".to_string()]);
    }

    #[test]
    fn triple_duplicate_edge_collapses() {
        let g = raw(2, &[(0, 1), (0, 1), (0, 1)]).preprocess().unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn reindexing_preserves_features_and_labels() {
        let g = raw(4, &[(1, 3)]).preprocess().unwrap();
        assert_eq!(g.node_ids(), &["v1".to_string(), "v3".to_string()]);
        assert_eq!(g.features()[[1, 0]], 3.0);
        assert_eq!(g.labels(), &[1, 1]);
        assert_eq!(g.edges(), &[(0, 1)]);
    }

    #[test]
    fn no_edges_means_empty_graph() {
        assert!(matches!(raw(3, &[(2, 2)]).preprocess(), Err(Error::EmptyGraph)));
    }

    #[test]
    fn new_rejects_non_canonical_input() {
        let f = Array2::zeros((2, 0));
        let ids = vec!["a".to_string(), "b".to_string()];
        assert!(Graph::new(ids.clone(), vec![], f.clone(), vec![0, 1], vec![(1, 0)]).is_err());
        assert!(Graph::new(ids.clone(), vec![], f.clone(), vec![0, 2], vec![(0, 1)]).is_err());
        assert!(Graph::new(ids.clone(), vec![], f.clone(), vec![0, 1], vec![(0, 1), (0, 1)]).is_err());
        assert!(Graph::new(ids, vec![], f, vec![0, 1], vec![]).is_err());
    }

    #[test]
    fn khop_examples() {
        let p = path_graph(4);
        assert_eq!(p.khop_neighborhood(0, 0).unwrap(), vec![0]);
        assert_eq!(p.khop_neighborhood(0, 2).unwrap(), vec![0, 1, 2]);
        assert_eq!(p.khop_neighborhood(2, 1).unwrap(), vec![2, 1, 3]);
        let tri = raw(3, &[(0, 1), (1, 2), (0, 2)]).preprocess().unwrap();
        for v in 0..3 {
            let mut hood = tri.khop_neighborhood(v, 2).unwrap();
            hood.sort();
            assert_eq!(hood, vec![0, 1, 2]);
        }
        assert!(matches!(
            p.khop_neighborhood(9, 1),
            Err(Error::Index { index: 9, len: 4 })
        ));
    }

    #[test]
    fn canonical_json_round_trips() {
        let g = raw(5, &[(0, 1), (3, 1), (4, 2), (2, 0)]).preprocess().unwrap();
        let text = g.to_canonical_json();
        let back = Graph::from_canonical_json(&text).unwrap();
        assert_eq!(back, g);
        assert_eq!(back.to_canonical_json(), text);
    }

    #[test]
    fn standardization_uses_reference_rows_only() {
        let g = raw(4, &[(0, 1), (2, 3)]).preprocess().unwrap();
        let (s, scaling) = g.standardized(&[0, 1]).unwrap();
        assert_eq!(scaling.mean, vec![0.5]);
        assert_eq!(scaling.std, vec![0.5]);
        assert_eq!(s.features().column(0).to_vec(), vec![-1.0, 1.0, 3.0, 5.0]);
    }
}
