use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tree::DecisionTree;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeOccurrence {
    pub occurs: bool,
    pub shallowest_depth: Option<usize>,
    pub splits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceReport {
    pub feature: usize,
    pub feature_name: String,
    pub trees: Vec<TreeOccurrence>,
    /// Trees in which the feature appears anywhere.
    pub occurrences: usize,
    /// Trees whose root splits on the feature.
    pub top_branch: usize,
}

pub fn occurrence_report(trees: &[DecisionTree], feature: usize) -> Result<OccurrenceReport> {
    let Some(first) = trees.first() else {
        return Err(Error::domain("occurrence report needs at least one tree"));
    };
    if trees.iter().any(|t| t.feature_names() != first.feature_names()) {
        return Err(Error::domain("trees do not share a feature space"));
    }
    if feature >= first.dim() {
        return Err(Error::domain(format!("feature {feature} out of range for d = {}", first.dim())));
    }
    let per_tree: Vec<TreeOccurrence> = trees
        .iter()
        .map(|t| {
            let depths: Vec<usize> = t.splits().filter(|s| s.1 == feature).map(|s| t.depth(s.0)).collect();
            TreeOccurrence {
                occurs: !depths.is_empty(),
                shallowest_depth: depths.iter().copied().min(),
                splits: depths.len(),
            }
        })
        .collect();
    Ok(OccurrenceReport {
        feature,
        feature_name: first.feature_names()[feature].clone(),
        occurrences: per_tree.iter().filter(|o| o.occurs).count(),
        top_branch: per_tree.iter().filter(|o| o.shallowest_depth == Some(0)).count(),
        trees: per_tree,
    })
}

impl OccurrenceReport {
    pub fn render(&self) -> String {
        let mut s = format!(
            "feature '{}': in {} of {} trees, top branch in {}\n",
            self.feature_name,
            self.occurrences,
            self.trees.len(),
            self.top_branch
        );
        s += "tree  occurs  depth  splits\n";
        for (i, o) in self.trees.iter().enumerate() {
            let depth = o.shallowest_depth.map_or("-".to_string(), |d| d.to_string());
            s += &format!("{i:>4}  {:>6}  {depth:>5}  {:>6}\n", if o.occurs { "yes" } else { "no" }, o.splits);
        }
        s
    }
}
