//! In-repo models loaded from their JSON files.

use std::path::Path;

use ndarray::ArrayView2;

use crate::error::{Error, Result};
use crate::extraction::Forest;
use crate::label::Labels;
use crate::oracle::Oracle;
use crate::space::Task;
use crate::tree::DecisionTree;

#[derive(Clone, Debug, PartialEq)]
pub enum Model {
    Tree(DecisionTree),
    Forest(Forest),
}

impl Model {
    /// Forest files carry `"kind": "forest"`; anything else must be a tree.
    pub fn from_json(s: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(s)?;
        match value.get("kind").and_then(|k| k.as_str()) {
            Some("forest") => Ok(Model::Forest(Forest::from_document(serde_json::from_value(value)?)?)),
            Some(other) => Err(Error::domain(format!("unknown model kind '{other}'"))),
            None => Ok(Model::Tree(DecisionTree::from_document(serde_json::from_value(value)?)?)),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        match self {
            Model::Tree(t) => t.to_json(),
            Model::Forest(f) => f.to_json(),
        }
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            Model::Tree(t) => t.feature_names(),
            Model::Forest(f) => f.feature_names(),
        }
    }
}

impl Oracle for Model {
    fn dimension(&self) -> usize {
        match self {
            Model::Tree(t) => t.dimension(),
            Model::Forest(f) => f.dimension(),
        }
    }

    fn task(&self) -> Task {
        match self {
            Model::Tree(t) => Oracle::task(t),
            Model::Forest(f) => f.task(),
        }
    }

    fn predict_batch(&self, x: ArrayView2<'_, f64>) -> Result<Labels> {
        match self {
            Model::Tree(t) => Oracle::predict_batch(t, x),
            Model::Forest(f) => f.predict_batch(x),
        }
    }
}
