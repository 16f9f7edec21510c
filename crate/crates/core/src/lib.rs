//! Two-layer GCN node classification, mask-based explanations of single
//! predictions, and two text renderings of an explanation: a narrative
//! written by a language model and a templated description.
//!
//! The guide in `book/` walks through the pipeline; its code blocks run as
//! doctests of this crate.

pub mod error;
pub mod explain;
pub mod gcn;
pub mod graph;
pub mod metrics;
pub mod narrative;
pub mod optim;
pub mod render;
pub mod rng;
pub mod synthetic;

pub use error::{Error, ErrorKind, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/graphs.md")]
    mod graphs {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/explaining.md")]
    mod explaining {}
    #[doc = include_str!("../../../book/src/narratives.md")]
    mod narratives {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
