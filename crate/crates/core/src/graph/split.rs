use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Graph;
use crate::error::{Error, Result};
use crate::rng::seeded_rng;

/// Disjoint train/validation/test node sets covering every node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitMasks {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
}

/// Seeded 60/20/20 split.
///
/// Node indices are shuffled with [`SeededRng`](crate::rng::SeededRng); the
/// validation and test sets each get `floor(n / 5)` nodes and the rounding
/// remainder goes to train. Each set is returned sorted.
pub fn split(graph: &Graph, seed: u64) -> Result<SplitMasks> {
    let n = graph.num_nodes();
    if n < 5 {
        return Err(Error::Split(format!("need at least 5 nodes, graph has {n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded_rng(seed));

    let held_out = n / 5;
    let train_len = n - 2 * held_out;
    let mut train = order[..train_len].to_vec();
    let mut val = order[train_len..train_len + held_out].to_vec();
    let mut test = order[train_len + held_out..].to_vec();
    train.sort_unstable();
    val.sort_unstable();
    test.sort_unstable();
    Ok(SplitMasks { train, val, test, seed })
}
