use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

impl std::fmt::Display for Task {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Task::Classification => "classification",
            Task::Regression => "regression",
        })
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "classification" => Ok(Task::Classification),
            "regression" => Ok(Task::Regression),
            other => Err(Error::domain(format!("unknown task '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureKind {
    Numeric,
    /// Takes values in {0, 1} in ingested data. Trees split it only at 0.5.
    BinaryIndicator,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn new(name: impl Into<String>, kind: FeatureKind) -> Self {
        Feature { name: name.into(), kind }
    }
}

/// The input space: an ordered list of named features.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Feature>", into = "Vec<Feature>")]
pub struct FeatureSpace {
    features: Vec<Feature>,
}

impl FeatureSpace {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::domain("feature space needs at least one feature"));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::domain(format!("duplicate feature name '{}'", f.name)));
            }
        }
        Ok(FeatureSpace { features })
    }

    /// All-numeric space with the given names.
    pub fn numeric<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        Self::new(
            names
                .iter()
                .map(|n| Feature {
                    name: n.as_ref().to_string(),
                    kind: FeatureKind::Numeric,
                })
                .collect(),
        )
    }

    /// All-numeric space named `x0..x{d-1}`.
    pub fn anonymous(d: usize) -> Result<Self> {
        let names: Vec<String> = (0..d).map(|i| format!("x{i}")).collect();
        Self::numeric(&names)
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn name(&self, i: usize) -> &str {
        &self.features[i].name
    }

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    pub fn kinds(&self) -> Vec<FeatureKind> {
        self.features.iter().map(|f| f.kind).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }

    /// Resolves a feature given either by name or by numeric index.
    pub fn resolve(&self, spec: &str) -> Result<usize> {
        if let Some(i) = self.index_of(spec) {
            return Ok(i);
        }
        match spec.parse::<usize>() {
            Ok(i) if i < self.dim() => Ok(i),
            _ => Err(Error::domain(format!("unknown feature '{spec}'"))),
        }
    }
}

impl TryFrom<Vec<Feature>> for FeatureSpace {
    type Error = Error;

    fn try_from(features: Vec<Feature>) -> Result<Self> {
        FeatureSpace::new(features)
    }
}

impl From<FeatureSpace> for Vec<Feature> {
    fn from(space: FeatureSpace) -> Self {
        space.features
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicates_and_empty() {
        assert!(FeatureSpace::numeric(&["a", "a"]).is_err());
        assert!(FeatureSpace::numeric::<&str>(&[]).is_err());
    }

    #[test]
    fn resolves_by_name_or_index() {
        let s = FeatureSpace::numeric(&["a", "b"]).unwrap();
        assert_eq!(s.resolve("b").unwrap(), 1);
        assert_eq!(s.resolve("0").unwrap(), 0);
        assert!(s.resolve("2").is_err());
    }
}
