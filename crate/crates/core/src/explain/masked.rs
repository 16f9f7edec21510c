//! Forward pass under soft edge and feature masks, with analytic gradients
//! with respect to the mask logits.
//!
//! Every off-diagonal entry `Â[i][j]` of an edge inside the target's
//! computation subgraph is multiplied by that edge's mask weight (shared by
//! `(i, j)` and `(j, i)`); self-loop entries are left alone. Feature column
//! `c` of every node is multiplied by the feature weight `c`. The GCN is
//! evaluated only on the computation subgraph, which determines the
//! target's logit exactly for a two-layer model.

use std::collections::{BTreeMap, HashMap};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::gcn::{bce_with_logit, sigmoid, GcnModel};
use crate::graph::{Graph, NormalizedAdjacency};

use super::ExplainerConfig;

/// Hops that determine a two-layer GCN's output at a node.
pub const GCN_LAYERS: usize = 2;

/// Entry of a local adjacency row: `(local column, Â value, edge slot)`.
/// `slot` is `None` for the self-loop.
type RowEntry = (usize, f64, Option<usize>);

/// The target's computation subgraph prepared for repeated masked forward
/// and backward passes.
#[derive(Debug, Clone)]
pub struct MaskedProblem<'a> {
    model: &'a GcnModel,
    /// Global indices in BFS order; the target is first.
    nodes: Vec<usize>,
    /// Canonical global edges with both endpoints in `nodes`, ascending.
    edges: Vec<(usize, usize)>,
    rows: Vec<Vec<RowEntry>>,
    features: Array2<f64>,
}

/// Values produced by [`MaskedProblem::evaluate`].
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedEval {
    pub logit: f64,
    pub probability: f64,
}

/// Loss value, its fidelity (cross-entropy) part, and gradients with respect
/// to the edge and feature logits.
#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub cross_entropy: f64,
    pub edge_grad: Vec<f64>,
    pub feature_grad: Vec<f64>,
}

/// `P = (X ⊙ f) W1`, `Z1` and `q = relu(Z1) W2` over the local nodes.
struct ForwardCache {
    p: Array2<f64>,
    z1: Array2<f64>,
    q: Array1<f64>,
}

impl<'a> MaskedProblem<'a> {
    pub fn new(model: &'a GcnModel, graph: &Graph, adj: &NormalizedAdjacency, target: usize) -> Result<Self> {
        graph.check_node(target)?;
        if model.num_features() != graph.num_features() {
            return Err(Error::Shape(format!(
                "model expects {} features, graph has {}",
                model.num_features(),
                graph.num_features()
            )));
        }
        let nodes = graph.khop_neighborhood(target, GCN_LAYERS)?;
        let local: HashMap<usize, usize> = nodes.iter().enumerate().map(|(l, &g)| (g, l)).collect();

        let mut edges: Vec<(usize, usize)> = Vec::new();
        for &u in &nodes {
            for &v in graph.neighbors(u) {
                if u < v && local.contains_key(&v) {
                    edges.push((u, v));
                }
            }
        }
        edges.sort_unstable();
        let slot: HashMap<(usize, usize), usize> = edges.iter().enumerate().map(|(s, &e)| (e, s)).collect();

        let rows = nodes
            .iter()
            .map(|&u| {
                adj.row(u)
                    .filter_map(|(v, a)| {
                        let lv = *local.get(&v)?;
                        let s = (u != v).then(|| slot[&(u.min(v), u.max(v))]);
                        Some((lv, a, s))
                    })
                    .collect()
            })
            .collect();

        let mut features = Array2::zeros((nodes.len(), graph.num_features()));
        for (l, &g) in nodes.iter().enumerate() {
            features.row_mut(l).assign(&graph.features().row(g));
        }
        Ok(Self {
            model,
            nodes,
            edges,
            rows,
            features,
        })
    }

    pub fn target(&self) -> usize {
        self.nodes[0]
    }

    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// Slot of edge `{a, b}` in [`edges`](Self::edges).
    pub fn edge_slot(&self, a: usize, b: usize) -> Option<usize> {
        self.edges.binary_search(&(a.min(b), a.max(b))).ok()
    }

    fn check_lengths(&self, edge_weights: &[f64], feature_weights: &[f64]) -> Result<()> {
        if edge_weights.len() != self.edges.len() || feature_weights.len() != self.num_features() {
            return Err(Error::Shape(format!(
                "expected {} edge and {} feature mask entries, got {} and {}",
                self.edges.len(),
                self.num_features(),
                edge_weights.len(),
                feature_weights.len()
            )));
        }
        Ok(())
    }

    fn masked_value(a: f64, slot: Option<usize>, edge_weights: &[f64]) -> f64 {
        match slot {
            Some(s) => a * edge_weights[s],
            None => a,
        }
    }

    /// Forward pass with mask weights (not logits) in `[0, 1]`.
    pub fn evaluate(&self, edge_weights: &[f64], feature_weights: &[f64]) -> Result<MaskedEval> {
        self.check_lengths(edge_weights, feature_weights)?;
        let (logit, _) = self.forward_parts(edge_weights, feature_weights);
        Ok(MaskedEval {
            logit,
            probability: sigmoid(logit),
        })
    }

    /// Returns the target logit and the intermediates needed for backprop.
    fn forward_parts(&self, ew: &[f64], fw: &[f64]) -> (f64, ForwardCache) {
        let m = self.model;
        let mut xm = self.features.clone();
        for mut row in xm.rows_mut() {
            for (c, x) in row.iter_mut().enumerate() {
                *x *= fw[c];
            }
        }
        let p = xm.dot(&m.w1);
        let mut z1 = Array2::zeros((self.nodes.len(), m.hidden()));
        for (i, row) in self.rows.iter().enumerate() {
            let mut acc = z1.row_mut(i);
            for &(j, a, s) in row {
                acc.scaled_add(Self::masked_value(a, s, ew), &p.row(j));
            }
            acc += &m.b1;
        }
        let q = z1.mapv(|x| x.max(0.0)).dot(&m.w2);
        let logit = self.rows[0]
            .iter()
            .map(|&(j, a, s)| Self::masked_value(a, s, ew) * q[j])
            .sum::<f64>()
            + m.b2;
        (logit, ForwardCache { p, z1, q })
    }

    /// Explainer objective and its gradient with respect to the mask logits.
    pub fn loss_and_grad(
        &self,
        edge_logits: &[f64],
        feature_logits: &[f64],
        label: u8,
        config: &ExplainerConfig,
    ) -> Result<LossAndGrad> {
        self.check_lengths(edge_logits, feature_logits)?;
        let ew: Vec<f64> = edge_logits.iter().map(|&x| sigmoid(x)).collect();
        let fw: Vec<f64> = feature_logits.iter().map(|&x| sigmoid(x)).collect();
        let (logit, ForwardCache { p, z1, q }) = self.forward_parts(&ew, &fw);
        let y = label as f64;
        let cross_entropy = bce_with_logit(logit, y);
        let (reg, reg_edge_grad, reg_feature_grad) = regularizers(&ew, &fw, config);

        // d loss / d weight, accumulated before the sigmoid chain rule
        let mut d_ew = vec![0.0; ew.len()];
        let dz = sigmoid(logit) - y;
        let mut dq = Array1::<f64>::zeros(q.len());
        for &(j, a, s) in &self.rows[0] {
            dq[j] += dz * Self::masked_value(a, s, &ew);
            if let Some(s) = s {
                d_ew[s] += dz * a * q[j];
            }
        }
        let m = self.model;
        let mut dp = Array2::zeros(p.dim());
        for (i, row) in self.rows.iter().enumerate() {
            if dq[i] == 0.0 {
                continue;
            }
            // δ = dq_i · W2 ⊙ [Z1_i > 0]
            let delta: Array1<f64> =
                Array1::from_shape_fn(m.hidden(), |c| if z1[[i, c]] > 0.0 { dq[i] * m.w2[c] } else { 0.0 });
            for &(j, a, s) in row {
                dp.row_mut(j).scaled_add(Self::masked_value(a, s, &ew), &delta);
                if let Some(s) = s {
                    d_ew[s] += a * delta.dot(&p.row(j));
                }
            }
        }
        let dxm = dp.dot(&m.w1.t());
        let mut d_fw = vec![0.0; fw.len()];
        for (dx_row, x_row) in dxm.rows().into_iter().zip(self.features.rows()) {
            for c in 0..fw.len() {
                d_fw[c] += dx_row[c] * x_row[c];
            }
        }

        let edge_grad = d_ew
            .iter()
            .zip(&reg_edge_grad)
            .zip(&ew)
            .map(|((d, r), &w)| (d + r) * w * (1.0 - w))
            .collect();
        let feature_grad = d_fw
            .iter()
            .zip(&reg_feature_grad)
            .zip(&fw)
            .map(|((d, r), &w)| (d + r) * w * (1.0 - w))
            .collect();
        Ok(LossAndGrad {
            loss: cross_entropy + reg,
            cross_entropy,
            edge_grad,
            feature_grad,
        })
    }
}

fn entropy(p: f64) -> f64 {
    let mut h = 0.0;
    if p > 0.0 {
        h -= p * p.ln();
    }
    if p < 1.0 {
        h -= (1.0 - p) * (1.0 - p).ln();
    }
    h
}

/// d H(p) / dp = ln((1 − p) / p)
fn entropy_slope(p: f64) -> f64 {
    (1.0 - p).ln() - p.ln()
}

fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Sparsity and entropy penalties on mask weights, and their derivatives
/// with respect to each weight.
///
/// Edge size is a sum over edges; feature size is a mean over features.
/// Both entropy terms are means.
fn regularizers(ew: &[f64], fw: &[f64], config: &ExplainerConfig) -> (f64, Vec<f64>, Vec<f64>) {
    let value = config.size_weight_edge * ew.iter().sum::<f64>()
        + config.entropy_weight_edge * mean(&ew.iter().map(|&p| entropy(p)).collect::<Vec<_>>())
        + config.size_weight_feature * mean(fw)
        + config.entropy_weight_feature * mean(&fw.iter().map(|&p| entropy(p)).collect::<Vec<_>>());
    let ne = ew.len().max(1) as f64;
    let nf = fw.len().max(1) as f64;
    let edge = ew
        .iter()
        .map(|&p| config.size_weight_edge + config.entropy_weight_edge * entropy_slope(p) / ne)
        .collect();
    let feature = fw
        .iter()
        .map(|&p| (config.size_weight_feature + config.entropy_weight_feature * entropy_slope(p)) / nf)
        .collect();
    (value, edge, feature)
}

/// The explainer objective evaluated from a masked prediction probability:
/// cross-entropy against `predicted_label` plus the mask regularizers.
pub fn explainer_loss(
    masked_probability: f64,
    predicted_label: u8,
    edge_logits: &[f64],
    feature_logits: &[f64],
    config: &ExplainerConfig,
) -> f64 {
    let p = masked_probability;
    let ce = if predicted_label == 1 { -p.ln() } else { -(1.0 - p).ln() };
    let ew: Vec<f64> = edge_logits.iter().map(|&x| sigmoid(x)).collect();
    let fw: Vec<f64> = feature_logits.iter().map(|&x| sigmoid(x)).collect();
    ce + regularizers(&ew, &fw, config).0
}

/// Mask logits addressed by edge rather than by slot. Edges may be given in
/// either orientation; edges left out are unmasked.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaskLogits {
    pub edges: BTreeMap<(usize, usize), f64>,
    pub features: Vec<f64>,
}

/// Prediction probability at `target` with the given mask logits applied.
///
/// Logits are passed through the sigmoid unclamped, so `+∞` gives an exact
/// weight of 1 and `−∞` an exact 0.
pub fn masked_forward(model: &GcnModel, graph: &Graph, target: usize, logits: &MaskLogits) -> Result<f64> {
    let adj = NormalizedAdjacency::new(graph);
    let problem = MaskedProblem::new(model, graph, &adj, target)?;
    let mut edge_weights = vec![1.0; problem.edges().len()];
    for (&(a, b), &logit) in &logits.edges {
        let slot = problem.edge_slot(a, b).ok_or_else(|| {
            Error::Validation(format!(
                "edge ({a}, {b}) is not an edge of node {target}'s computation subgraph"
            ))
        })?;
        edge_weights[slot] = sigmoid(logit);
    }
    let feature_weights: Vec<f64> = logits.features.iter().map(|&x| sigmoid(x)).collect();
    Ok(problem.evaluate(&edge_weights, &feature_weights)?.probability)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gcn::testutil::{random_graph, random_model};
    use crate::gcn::{predict, GcnModel};

    fn config() -> ExplainerConfig {
        ExplainerConfig::default()
    }

    #[test]
    fn saturated_masks_reproduce_unmasked_prediction() {
        let g = random_graph(12, 3, 11);
        let m = random_model(3, 6, 11);
        for t in 0..g.num_nodes() {
            let adj = NormalizedAdjacency::new(&g);
            let prob = MaskedProblem::new(&m, &g, &adj, t).unwrap();
            let logits = MaskLogits {
                edges: prob.edges().iter().map(|&e| (e, f64::INFINITY)).collect(),
                features: vec![f64::INFINITY; 3],
            };
            let masked = masked_forward(&m, &g, t, &logits).unwrap();
            assert!((masked - predict(&m, &g, t).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn removing_all_edges_leaves_self_loop_path() {
        let g = random_graph(10, 2, 12);
        let mut m = GcnModel::zeros(2, 4);
        m.b1 = Array1::from(vec![0.5, -0.2, 1.0, 0.3]);
        m.w2 = Array1::from(vec![1.0, 2.0, -1.0, 0.5]);
        m.b2 = 0.1;
        let adj = NormalizedAdjacency::new(&g);
        let t = 3;
        let prob = MaskedProblem::new(&m, &g, &adj, t).unwrap();
        let logits = MaskLogits {
            edges: prob.edges().iter().map(|&e| (e, f64::NEG_INFINITY)).collect(),
            features: vec![0.0; 2],
        };
        let relu_b1: f64 = m.b1.iter().zip(&m.w2).map(|(b, w)| b.max(0.0) * w).sum();
        let expected = sigmoid(adj.get(t, t) * relu_b1 + m.b2);
        assert!((masked_forward(&m, &g, t, &logits).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn unknown_edge_rejected() {
        let g = crate::synthetic::disconnecting_gadget(8, 1, 0, "g").unwrap();
        let m = random_model(2, 3, 0);
        let far = (5, 6); // clique edge, both endpoints two hops out
        let mut logits = MaskLogits {
            edges: BTreeMap::from([(far, 0.0)]),
            features: vec![0.0; 2],
        };
        assert!(masked_forward(&m, &g, 0, &logits).is_ok());
        logits.edges.insert((0, 7), 0.0);
        assert!(matches!(masked_forward(&m, &g, 0, &logits), Err(Error::Validation(_))));
    }

    #[test]
    fn loss_examples() {
        let zero = ExplainerConfig {
            size_weight_edge: 0.0,
            entropy_weight_edge: 0.0,
            size_weight_feature: 0.0,
            entropy_weight_feature: 0.0,
            ..config()
        };
        assert_eq!(explainer_loss(1.0, 1, &[0.3], &[1.0], &zero), 0.0);
        let size_only = ExplainerConfig {
            size_weight_edge: 1.0,
            ..zero.clone()
        };
        assert!((explainer_loss(1.0, 1, &[0.0], &[], &size_only) - 0.5).abs() < 1e-15);
        let ent_only = ExplainerConfig {
            entropy_weight_edge: 1.0,
            ..zero
        };
        assert!((explainer_loss(1.0, 1, &[0.0], &[], &ent_only) - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn probability_and_logit_forms_agree() {
        let g = random_graph(11, 3, 13);
        let m = random_model(3, 5, 13);
        let adj = NormalizedAdjacency::new(&g);
        let prob = MaskedProblem::new(&m, &g, &adj, 4).unwrap();
        let el: Vec<f64> = (0..prob.edges().len()).map(|i| (i as f64 * 0.37).sin()).collect();
        let fl = vec![0.2, -0.4, 1.1];
        let cfg = config();
        for label in [0, 1] {
            let lg = prob.loss_and_grad(&el, &fl, label, &cfg).unwrap();
            let ew: Vec<f64> = el.iter().map(|&x| sigmoid(x)).collect();
            let fw: Vec<f64> = fl.iter().map(|&x| sigmoid(x)).collect();
            let p = prob.evaluate(&ew, &fw).unwrap().probability;
            assert!((lg.loss - explainer_loss(p, label, &el, &fl, &cfg)).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let cfg = config();
        for seed in 0..10 {
            let g = random_graph(10, 3, 100 + seed);
            let m = random_model(3, 5, 100 + seed);
            let adj = NormalizedAdjacency::new(&g);
            let prob = MaskedProblem::new(&m, &g, &adj, (seed as usize) % 10).unwrap();
            let el: Vec<f64> = (0..prob.edges().len())
                .map(|i| ((i + seed as usize) as f64 * 0.71).cos())
                .collect();
            let fl = vec![0.3, -0.8, 0.05];
            let lg = prob.loss_and_grad(&el, &fl, 1, &cfg).unwrap();
            let h = 1e-5;
            let loss_at = |el: &[f64], fl: &[f64]| prob.loss_and_grad(el, fl, 1, &cfg).unwrap().loss;
            let check = |analytic: f64, numeric: f64| {
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-7);
                assert!(rel < 1e-4, "analytic {analytic} numeric {numeric}");
            };
            for i in 0..el.len() {
                let (mut up, mut dn) = (el.clone(), el.clone());
                up[i] += h;
                dn[i] -= h;
                check(lg.edge_grad[i], (loss_at(&up, &fl) - loss_at(&dn, &fl)) / (2.0 * h));
            }
            for c in 0..fl.len() {
                let (mut up, mut dn) = (fl.clone(), fl.clone());
                up[c] += h;
                dn[c] -= h;
                check(lg.feature_grad[c], (loss_at(&el, &up) - loss_at(&el, &dn)) / (2.0 * h));
            }
        }
    }
}
