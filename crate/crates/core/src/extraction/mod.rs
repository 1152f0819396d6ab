//! Tree induction: the sampling-based extractor, the CART baseline and a
//! bagged forest for self-contained experiments.

mod cart;
mod extract;
mod forest;
mod grow;
mod impurity;
mod split;

pub use cart::{fit_cart, fit_cart_with, CartConfig};
pub use extract::{distribution_disagreement, extract_tree, node_sample, ExtractionConfig, LabeledSample};
pub use forest::{fit_forest, Forest, ForestConfig, ForestDocument, MaxFeatures};
pub use impurity::{class_counts, gini, impurity, majority, variance};
pub use split::{best_split, best_split_rows, classification_gain, midpoint, SideSummary, SplitCandidate, SplitRules};

#[allow(unused_imports)]
pub(crate) use extract::disagreement;
