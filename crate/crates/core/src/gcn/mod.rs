//! Two-layer GCN binary node classifier.
//!
//! ```text
//! Z1     = Â · X · W1 + b1          (n × hidden)
//! H1     = relu(Z1)
//! logits = Â · H1 · W2 + b2         (n)
//! ```
//!
//! Gradients of the mean binary cross-entropy are derived by hand; with
//! `g = (σ(logits) − y) / |mask|` restricted to the mask and `s = Â · g`
//! (Â is symmetric):
//!
//! ```text
//! ∂b2 = Σ g        ∂W2 = H1ᵀ s
//! δ1  = (s W2ᵀ) ⊙ [Z1 > 0]
//! ∂b1 = Σ_rows δ1  ∂W1 = (Â X)ᵀ δ1
//! ```

mod checkpoint;
mod loss;
mod train;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::RngExt;

use crate::error::{Error, Result};
use crate::graph::{Graph, NormalizedAdjacency};
use crate::rng::seeded_rng;

pub use checkpoint::{Checkpoint, TrainSummary};
pub use loss::{bce_loss, bce_with_logit, sigmoid};
pub use train::{train, train_with_adjacency, TrainConfig, TrainReport};

/// Weights of the two-layer GCN.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnModel {
    /// `num_features × hidden`
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// `hidden` (the single output column of the second layer)
    pub w2: Array1<f64>,
    pub b2: f64,
}

impl GcnModel {
    pub fn zeros(num_features: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((num_features, hidden)),
            b1: Array1::zeros(hidden),
            w2: Array1::zeros(hidden),
            b2: 0.0,
        }
    }

    /// Glorot-uniform weights scaled by `init_scale`, zero biases.
    /// `W1` is drawn row-major first, then `W2`.
    pub fn init(num_features: usize, hidden: usize, seed: u64, init_scale: f64) -> Self {
        let mut rng = seeded_rng(seed);
        let mut model = Self::zeros(num_features, hidden);
        let bound1 = init_scale * (6.0 / (num_features + hidden) as f64).sqrt();
        let bound2 = init_scale * (6.0 / (hidden + 1) as f64).sqrt();
        for w in model.w1.iter_mut() {
            *w = rng.random_range(-bound1..=bound1);
        }
        for w in model.w2.iter_mut() {
            *w = rng.random_range(-bound2..=bound2);
        }
        model
    }

    pub fn num_features(&self) -> usize {
        self.w1.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.w1.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.iter().chain(&self.b1).chain(&self.w2).all(|x| x.is_finite()) && self.b2.is_finite()
    }

    fn check_shapes(&self, adj: &NormalizedAdjacency, features: ArrayView2<'_, f64>) -> Result<()> {
        if self.b1.len() != self.hidden() || self.w2.len() != self.hidden() {
            return Err(Error::Shape(format!(
                "hidden width {} but b1 has {} and W2 has {} entries",
                self.hidden(),
                self.b1.len(),
                self.w2.len()
            )));
        }
        if features.ncols() != self.num_features() {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.num_features(),
                features.ncols()
            )));
        }
        if features.nrows() != adj.num_nodes() {
            return Err(Error::Shape(format!(
                "{} feature rows for a {}-node adjacency",
                features.nrows(),
                adj.num_nodes()
            )));
        }
        Ok(())
    }
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Activations {
    /// `Â · X`
    pub ax: Array2<f64>,
    pub z1: Array2<f64>,
    pub h1: Array2<f64>,
    pub logits: Vec<f64>,
}

pub fn forward_with_activations(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    features: ArrayView2<'_, f64>,
) -> Result<Activations> {
    model.check_shapes(adj, features)?;
    let ax = adj.matmul(features)?;
    let z1 = ax.dot(&model.w1) + &model.b1;
    let h1 = z1.mapv(|x| x.max(0.0));
    let hw = h1.dot(&model.w2);
    let logits = adj
        .matvec(hw.as_slice().expect("contiguous"))?
        .into_iter()
        .map(|z| z + model.b2)
        .collect();
    Ok(Activations { ax, z1, h1, logits })
}

/// Per-node logits.
pub fn forward(model: &GcnModel, adj: &NormalizedAdjacency, features: ArrayView2<'_, f64>) -> Result<Vec<f64>> {
    Ok(forward_with_activations(model, adj, features)?.logits)
}

/// Gradients of the mean BCE over a node mask, with the loss value.
#[derive(Debug, Clone, PartialEq)]
pub struct GcnGradients {
    pub loss: f64,
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub w2: Array1<f64>,
    pub b2: f64,
}

pub fn gradients(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    features: ArrayView2<'_, f64>,
    labels: &[u8],
    mask: &[usize],
) -> Result<GcnGradients> {
    let act = forward_with_activations(model, adj, features)?;
    let loss = bce_loss(&act.logits, labels, mask)?;

    let n = adj.num_nodes();
    let scale = 1.0 / mask.len() as f64;
    let mut g = vec![0.0; n];
    for &i in mask {
        g[i] += (sigmoid(act.logits[i]) - labels[i] as f64) * scale;
    }
    let s = Array1::from(adj.matvec(&g)?);

    let b2 = g.iter().sum();
    let w2 = act.h1.t().dot(&s);
    // δ1[i][c] = s[i] · W2[c] where Z1[i][c] > 0; relu'(0) = 0
    let mut delta = Array2::zeros((n, model.hidden()));
    for ((i, c), d) in delta.indexed_iter_mut() {
        if act.z1[[i, c]] > 0.0 {
            *d = s[i] * model.w2[c];
        }
    }
    let b1 = delta.sum_axis(Axis(0));
    let w1 = act.ax.t().dot(&delta);
    Ok(GcnGradients { loss, w1, b1, w2, b2 })
}

/// Predicted probability `σ(logit)` at `node`.
pub fn predict(model: &GcnModel, graph: &Graph, node: usize) -> Result<f64> {
    graph.check_node(node)?;
    let adj = NormalizedAdjacency::new(graph);
    predict_with(model, &adj, graph.features().view(), node)
}

pub fn predict_with(
    model: &GcnModel,
    adj: &NormalizedAdjacency,
    features: ArrayView2<'_, f64>,
    node: usize,
) -> Result<f64> {
    if node >= adj.num_nodes() {
        return Err(Error::Index {
            index: node,
            len: adj.num_nodes(),
        });
    }
    Ok(sigmoid(forward(model, adj, features)?[node]))
}


#[cfg(test)]
mod tests {
    use super::testutil::*;
    use super::*;

    #[test]
    fn zero_model_predicts_one_half() {
        let g = random_graph(6, 3, 1);
        let m = GcnModel::zeros(3, 16);
        let adj = NormalizedAdjacency::new(&g);
        assert!(forward(&m, &adj, g.features().view())
            .unwrap()
            .iter()
            .all(|&z| z == 0.0));
        assert_eq!(predict(&m, &g, 2).unwrap(), 0.5);
        let mut m = m;
        m.b2 = 0.75;
        assert!(forward(&m, &adj, g.features().view())
            .unwrap()
            .iter()
            .all(|&z| z == 0.75));
    }

    #[test]
    fn single_node_sums_hidden_units() {
        let adj = NormalizedAdjacency::from_edges(1, &[]).unwrap();
        let mut m = GcnModel::zeros(1, 16);
        m.w1.fill(1.0);
        m.w2.fill(1.0);
        let x = Array2::from_elem((1, 1), 1.0);
        assert_eq!(forward(&m, &adj, x.view()).unwrap(), vec![16.0]);
    }

    #[test]
    fn shape_errors() {
        let g = random_graph(6, 3, 2);
        let adj = NormalizedAdjacency::new(&g);
        let m = GcnModel::zeros(4, 8);
        assert!(matches!(forward(&m, &adj, g.features().view()), Err(Error::Shape(_))));
        let m = GcnModel::zeros(3, 8);
        let short = Array2::zeros((5, 3));
        assert!(matches!(forward(&m, &adj, short.view()), Err(Error::Shape(_))));
        assert!(matches!(predict(&m, &g, 6), Err(Error::Index { .. })));
    }

    #[test]
    fn b2_gradient_of_zero_model() {
        let g = random_graph(10, 3, 3);
        let adj = NormalizedAdjacency::new(&g);
        let mask = [0, 1, 2, 5, 7];
        let grads = gradients(&GcnModel::zeros(3, 4), &adj, g.features().view(), g.labels(), &mask).unwrap();
        let expected = mask.iter().map(|&i| 0.5 - g.labels()[i] as f64).sum::<f64>() / mask.len() as f64;
        assert!((grads.b2 - expected).abs() < 1e-15);
        assert!(grads.w1.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn predict_is_sigmoid_of_forward() {
        let g = random_graph(9, 4, 4);
        let m = random_model(4, 5, 4);
        let adj = NormalizedAdjacency::new(&g);
        let logits = forward(&m, &adj, g.features().view()).unwrap();
        for (i, &z) in logits.iter().enumerate() {
            assert_eq!(predict(&m, &g, i).unwrap(), sigmoid(z));
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let a = GcnModel::init(42, 16, 7, 1.0);
        assert_eq!(a, GcnModel::init(42, 16, 7, 1.0));
        assert_ne!(a, GcnModel::init(42, 16, 8, 1.0));
        let bound = (6.0f64 / 58.0).sqrt();
        assert!(a.w1.iter().all(|w| w.abs() <= bound));
        assert!(a.b1.iter().all(|&b| b == 0.0));
    }
}
