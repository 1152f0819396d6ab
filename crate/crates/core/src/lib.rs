//! Extraction of small axis-aligned decision trees from blackbox models.
//!
//! A diagonal Gaussian mixture fitted to the training inputs serves as the
//! input distribution. The extractor grows a tree best-first, and for every
//! node draws fresh samples from the mixture conditioned on the node's box and
//! labels them with the oracle, so even deep nodes see enough points.

// `!(x > 0.0)` style checks are deliberate: they reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cartpole;
pub mod constraint;
mod error;
pub mod extraction;
pub mod gmm;
pub mod ingest;
pub mod label;
pub mod model;
pub mod normal;
pub mod oracle;
pub mod par;
pub(crate) mod rng;
pub mod space;
pub mod synth;
pub mod tree;
pub mod truncnorm;
pub mod wire;

pub use constraint::{simplify_constraint, Atom, BoxConstraint, Direction, Interval};
pub use error::{Error, Result};
pub use extraction::{extract_tree, fit_cart, fit_forest, ExtractionConfig, Forest, ForestConfig};
pub use gmm::{fit_bic, fit_em, DiagonalGmm, EmConfig};
pub use label::{Label, Labels};
pub use oracle::{FnOracle, Oracle};
pub use rng::Stream;
pub use space::{Feature, FeatureKind, FeatureSpace, Task};
pub use tree::{DecisionTree, Node, NodeId};
pub use wire::{WireConfig, WireOracle};
