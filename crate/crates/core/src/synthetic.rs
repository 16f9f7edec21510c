//! Seeded synthetic graphs with known ground truth.

use rand::RngExt;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{Graph, RawGraph};
use crate::rng::seeded_rng;

/// Two communities of equal size. Nodes in the first half have label 0 and
/// nodes in the second half label 1. Column `signal` is the label plus
/// Gaussian noise; the remaining `noise_features` columns are standard
/// normal.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedCommunities {
    pub nodes: usize,
    pub p_intra: f64,
    pub p_inter: f64,
    pub signal_noise_sd: f64,
    pub noise_features: usize,
    pub seed: u64,
}

impl Default for PlantedCommunities {
    fn default() -> Self {
        Self {
            nodes: 200,
            p_intra: 0.10,
            p_inter: 0.01,
            signal_noise_sd: 0.5,
            noise_features: 4,
            seed: 7,
        }
    }
}

/// Index of the label-carrying column in graphs from [`PlantedCommunities`].
pub const SIGNAL_FEATURE: usize = 0;

impl PlantedCommunities {
    pub fn build(&self) -> Result<Graph> {
        if self.nodes < 2 {
            return Err(Error::Config("planted graph needs at least 2 nodes".into()));
        }
        let mut rng = seeded_rng(self.seed);
        let noise = Normal::new(0.0, self.signal_noise_sd).map_err(|e| Error::Config(e.to_string()))?;
        let unit = Normal::new(0.0, 1.0).expect("unit normal");
        let n = self.nodes;
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= n / 2)).collect();

        let mut edges = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if labels[u] == labels[v] {
                    self.p_intra
                } else {
                    self.p_inter
                };
                if rng.random_bool(p) {
                    edges.push((u, v));
                }
            }
        }
        let features = (0..n)
            .map(|i| {
                let mut row = vec![labels[i] as f64 + noise.sample(&mut rng)];
                row.extend((0..self.noise_features).map(|_| unit.sample(&mut rng)));
                row
            })
            .collect();
        let mut feature_names = vec!["signal".to_string()];
        feature_names.extend((1..=self.noise_features).map(|c| format!("noise_{c}")));

        RawGraph {
            node_ids: (0..n).map(|i| format!("p{i}")).collect(),
            feature_names,
            features,
            labels,
            edges,
        }
        .preprocess()
    }
}

/// A small component built so that a 7-node truncated view around its
/// target is disconnected.
///
/// The target links to `clique / 2` bridge nodes; bridge `b` links to two
/// members of a `clique`-node clique (every member hangs off exactly one
/// bridge, so the whole clique lies within two hops). Clique members carry
/// `clique` incident edges against a bridge's three, so they outrank every
/// bridge under sum-of-weights importance and the view only reconnects once
/// the first bridge is admitted at `k = clique + 2`.
///
/// Node ids are `{id_prefix}{i}` with the target at 0, bridges next, clique
/// last. Label 0 on the target and bridges, 1 in the clique.
pub fn disconnecting_gadget(clique: usize, noise_features: usize, seed: u64, id_prefix: &str) -> Result<Graph> {
    if clique < 8 || !clique.is_multiple_of(2) {
        return Err(Error::Config("gadget clique must be even and at least 8".into()));
    }
    let mut rng = seeded_rng(seed);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let noise = Normal::new(0.0, 0.5).expect("valid sd");
    let bridges = clique / 2;
    let first = 1 + bridges;
    let n = first + clique;
    let mut edges: Vec<(usize, usize)> = (1..=bridges).map(|b| (0, b)).collect();
    for a in first..n {
        edges.push((1 + (a - first) / 2, a));
        for b in a + 1..n {
            edges.push((a, b));
        }
    }
    let labels: Vec<u8> = (0..n).map(|i| u8::from(i >= first)).collect();
    let features = (0..n)
        .map(|i| {
            let mut row = vec![labels[i] as f64 + noise.sample(&mut rng)];
            row.extend((0..noise_features).map(|_| unit.sample(&mut rng)));
            row
        })
        .collect();
    let mut feature_names = vec!["signal".to_string()];
    feature_names.extend((1..=noise_features).map(|c| format!("noise_{c}")));
    RawGraph {
        node_ids: (0..n).map(|i| format!("{id_prefix}{i}")).collect(),
        feature_names,
        features,
        labels,
        edges,
    }
    .preprocess()
}
