//! Bagged forest of unlimited-budget CART trees, used as a target model.

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::cart::{fit_cart_with, CartConfig};
use super::impurity::majority;
use crate::error::{Error, Result};
use crate::label::Labels;
use crate::oracle::Oracle;
use crate::par;
use crate::rng::Stream;
use crate::space::{check_dim, FeatureSpace, Task};
use crate::tree::{DecisionTree, TreeDocument};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    All,
    /// round(√d) features per tree
    Sqrt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub trees: usize,
    pub seed: u64,
    pub bootstrap: bool,
    pub max_features: MaxFeatures,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 100,
            seed: 0,
            bootstrap: true,
            max_features: MaxFeatures::Sqrt,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Forest {
    task: Task,
    feature_names: Vec<String>,
    trees: Vec<DecisionTree>,
}

/// Serialized form: `{kind: "forest", task, feature_names, trees: [...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ForestDocument {
    pub kind: String,
    pub task: Task,
    pub feature_names: Vec<String>,
    pub trees: Vec<TreeDocument>,
}

/// Trains a forest; each tree sees a bootstrap resample and a random feature
/// subset.
pub fn fit_forest(x: ArrayView2<'_, f64>, y: &Labels, space: &FeatureSpace, cfg: &ForestConfig) -> Result<Forest> {
    if x.nrows() < 2 {
        return Err(Error::domain("a forest needs at least two rows"));
    }
    check_dim(space.dim(), x.ncols())?;
    check_dim(x.nrows(), y.len())?;
    if cfg.trees == 0 {
        return Err(Error::domain("a forest needs at least one tree"));
    }
    let n = x.nrows();
    let d = x.ncols();
    let per_tree = match cfg.max_features {
        MaxFeatures::All => d,
        MaxFeatures::Sqrt => ((d as f64).sqrt().round() as usize).clamp(1, d),
    };
    let base = Stream::new(cfg.seed);
    let trees = par::try_map_range(cfg.trees, |t| {
        let mut rng = base.child(t as u64).rng();
        let rows: Vec<usize> = if cfg.bootstrap {
            (0..n).map(|_| rng.random_range(0..n)).collect()
        } else {
            (0..n).collect()
        };
        let features = if per_tree < d {
            let mut f = sample(&mut rng, d, per_tree).into_vec();
            f.sort_unstable();
            Some(f)
        } else {
            None
        };
        let xs = Array2::from_shape_fn((rows.len(), d), |(r, c)| x[[rows[r], c]]);
        let ys = y.select(&rows);
        let tree_cfg = CartConfig {
            k: usize::MAX,
            features,
            ..CartConfig::default()
        };
        fit_cart_with(xs.view(), &ys, space, &tree_cfg)
    })?;
    Ok(Forest {
        task: y.task(),
        feature_names: space.names(),
        trees,
    })
}

impl Forest {
    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Majority vote (lowest class on ties) or mean of the trees.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        check_dim(self.feature_names.len(), x.ncols())?;
        let n = x.nrows();
        let d = x.ncols();
        let chunks = par::map_range(par::chunk_count(n), |c| {
            let (start, end) = par::chunk_bounds(c, n);
            let mut row = vec![0.0; d];
            let mut classes = Vec::new();
            let mut values = Vec::new();
            let mut votes = Vec::new();
            for r in start..end {
                row.iter_mut().zip(x.row(r)).for_each(|(a, b)| *a = *b);
                match self.task {
                    Task::Classification => {
                        votes.clear();
                        for t in &self.trees {
                            let c = t.predict(&row).expect("checked dimension").as_f64() as usize;
                            if votes.len() <= c {
                                votes.resize(c + 1, 0);
                            }
                            votes[c] += 1;
                        }
                        classes.push(majority(&votes));
                    }
                    Task::Regression => {
                        let s: f64 = self
                            .trees
                            .iter()
                            .map(|t| t.predict(&row).expect("checked dimension").as_f64())
                            .sum();
                        values.push(s / self.trees.len() as f64);
                    }
                }
            }
            (classes, values)
        });
        Ok(match self.task {
            Task::Classification => Labels::Classes(chunks.into_iter().flat_map(|(c, _)| c).collect()),
            Task::Regression => Labels::Values(chunks.into_iter().flat_map(|(_, v)| v).collect()),
        })
    }

    pub fn to_document(&self) -> ForestDocument {
        ForestDocument {
            kind: "forest".into(),
            task: self.task,
            feature_names: self.feature_names.clone(),
            trees: self.trees.iter().map(DecisionTree::to_document).collect(),
        }
    }

    pub fn from_document(doc: ForestDocument) -> Result<Self> {
        if doc.kind != "forest" {
            return Err(Error::domain(format!("expected a forest document, got kind '{}'", doc.kind)));
        }
        if doc.trees.is_empty() {
            return Err(Error::domain("forest document has no trees"));
        }
        let trees = doc
            .trees
            .into_iter()
            .map(DecisionTree::from_document)
            .collect::<Result<Vec<_>>>()?;
        if trees.iter().any(|t| t.task() != doc.task || t.feature_names() != doc.feature_names.as_slice()) {
            return Err(Error::domain("forest trees disagree with the forest header"));
        }
        Ok(Forest {
            task: doc.task,
            feature_names: doc.feature_names,
            trees,
        })
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&self.to_document()).expect("forest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_document(serde_json::from_str(s)?)
    }
}

impl Oracle for Forest {
    fn dimension(&self) -> usize {
        self.feature_names.len()
    }

    fn task(&self) -> Task {
        self.task
    }

    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        self.predict(x)
    }
}
