//! Background-node fetching and skeleton condensation for node-attributed graphs.
//!
//! The input is an undirected graph whose nodes are split into *targets* (the
//! nodes a downstream classifier must label) and *backgrounds* (everything
//! else). The pipeline is:
//!
//! 1. [`fetch`]: pick the background nodes that bridge two targets within a
//!    hop budget, plus each target's most feature-correlated nearby
//!    backgrounds, and cut out the induced "vanilla" subgraph.
//! 2. [`condense`]: merge fetched backgrounds that share the same structure
//!    set (accessible targets, optionally with hop distances) into synthetic
//!    supernodes, producing a [`condense::SkeletonGraph`].
//!
//! Supporting modules provide an executable check of the linear path-passing
//! swap invariance ([`lmpp`]), compression statistics ([`metrics`]), edge-cut
//! ablations ([`ablation`]) and a small propagation classifier used to score
//! graphs end to end ([`eval`]).
//!
//! The crate is `no_std` with `alloc`. Enable `parallel` (implies `std`) to
//! run the per-target stages on the current rayon pool; results are identical
//! regardless of worker count.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod ablation;
pub mod condense;
pub mod dataset;
mod error;
pub mod eval;
pub mod fetch;
pub mod graph;
pub mod linalg;
pub mod lmpp;
pub mod metrics;
mod par;
pub mod sig;

pub use crate::condense::{Aggregation, SkeletonGraph, Strategy};
pub use crate::dataset::{DatasetBundle, FeatureMatrix, LabelVector, RoleMask};
pub use crate::error::Error;
pub use crate::fetch::{FetchConfig, FetchResult};
pub use crate::graph::{Graph, NodeId};

pub type Result<T, E = Error> = core::result::Result<T, E>;
