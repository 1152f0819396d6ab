//! CART on a fixed labelled set, grown with the same best-first order and
//! split scan as the extractor.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::extract::leaf_label;
use super::grow::{grow, Evaluated, GrowLimits, NodeEvaluator};
use super::split::{best_split_rows, SplitCandidate, SplitRules};
use crate::constraint::BoxConstraint;
use crate::error::{Error, Result};
use crate::label::Labels;
use crate::space::{check_dim, FeatureKind, FeatureSpace};
use crate::tree::DecisionTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CartConfig {
    /// Node budget; `usize::MAX` grows until leaves are pure.
    pub k: usize,
    pub min_gain: f64,
    pub max_depth: usize,
    /// Features a tree may split on; all when `None`.
    pub features: Option<Vec<usize>>,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            k: 31,
            min_gain: 1e-7,
            max_depth: 64,
            features: None,
        }
    }
}

struct Cart<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a Labels,
    kinds: Vec<FeatureKind>,
    cfg: &'a CartConfig,
}

impl Cart<'_> {
    fn evaluate(&self, rows: Vec<usize>) -> Evaluated<Vec<usize>> {
        let rules = SplitRules {
            kinds: &self.kinds,
            features: self.cfg.features.as_deref(),
            min_gain: self.cfg.min_gain,
        };
        let split = best_split_rows(self.x, self.y, &rows, &rules);
        Evaluated {
            label: leaf_label(&self.y.select(&rows)),
            split,
            payload: rows,
        }
    }
}

impl NodeEvaluator for Cart<'_> {
    type Payload = Vec<usize>;

    fn root(&self, _: &BoxConstraint) -> Result<Evaluated<Vec<usize>>> {
        Ok(self.evaluate((0..self.x.nrows()).collect()))
    }

    fn child(&self, parent: &Vec<usize>, _: &BoxConstraint, split: &SplitCandidate, left: bool, _: usize) -> Result<Option<Evaluated<Vec<usize>>>> {
        let rows: Vec<usize> = parent
            .iter()
            .copied()
            .filter(|&r| (self.x[[r, split.feature]] <= split.threshold) == left)
            .collect();
        Ok((!rows.is_empty()).then(|| self.evaluate(rows)))
    }

    fn concurrent(&self) -> bool {
        true
    }
}

/// Fits a CART tree with at most `k` nodes to `(x, y)`.
pub fn fit_cart(x: ArrayView2<'_, f64>, y: &Labels, space: &FeatureSpace, k: usize) -> Result<DecisionTree> {
    fit_cart_with(x, y, space, &CartConfig { k, ..Default::default() })
}

pub fn fit_cart_with(x: ArrayView2<'_, f64>, y: &Labels, space: &FeatureSpace, cfg: &CartConfig) -> Result<DecisionTree> {
    if x.nrows() == 0 {
        return Err(Error::domain("cannot fit a tree to an empty data set"));
    }
    check_dim(space.dim(), x.ncols())?;
    check_dim(x.nrows(), y.len())?;
    if cfg.k == 0 {
        return Err(Error::domain("node budget must be at least 1"));
    }
    if let Some(f) = &cfg.features {
        if f.iter().any(|&i| i >= space.dim()) {
            return Err(Error::domain("feature subset out of range"));
        }
    }
    let cart = Cart {
        x,
        y,
        kinds: space.kinds(),
        cfg,
    };
    let budget = if cfg.k.is_multiple_of(2) { cfg.k - 1 } else { cfg.k };
    grow(
        &cart,
        y.task(),
        space.names(),
        &GrowLimits {
            budget,
            max_depth: cfg.max_depth,
        },
    )
}
